//! Canonical byte encoding for control messages: UTF-8 JSON with
//! lexicographically sorted object keys, no insignificant whitespace, decimal
//! integers, and a single trailing newline. Equal messages always encode to
//! identical bytes.

use crate::scheduler::ControlMessage;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("malformed control message: {0}")]
    Malformed(String),
    #[error("control message violates an invariant: {0}")]
    Invalid(String),
}

/// Canonical bytes of a valid message.
pub fn encode_control_message(msg: &ControlMessage) -> Vec<u8> {
    debug_assert!(msg.check_invariants().is_ok());
    // Routing through Value sorts object keys; the message carries no floats,
    // so the byte image is exact.
    let value = serde_json::to_value(msg).expect("message serializes");
    let mut bytes = serde_json::to_vec(&value).expect("value serializes");
    bytes.push(b'\n');
    bytes
}

/// Inverse of [`encode_control_message`] on its image; checks every message
/// invariant before returning.
pub fn decode_control_message(bytes: &[u8]) -> Result<ControlMessage, CodecError> {
    let msg: ControlMessage =
        serde_json::from_slice(bytes).map_err(|e| CodecError::Malformed(e.to_string()))?;
    msg.check_invariants().map_err(CodecError::Invalid)?;
    Ok(msg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NodeId, Tick, UnitFieldId};
    use crate::scheduler::Hop;
    use proptest::prelude::*;

    fn demo_message() -> ControlMessage {
        ControlMessage {
            flow_id: "flow-000001".into(),
            recipient: NodeId(0),
            knowledge_link: "kn://unit/0".into(),
            unit_field: UnitFieldId(0),
            problem: "p".into(),
            deadline: 9,
            hops: vec![Hop { node: NodeId(1), access_start: 2, access_end: 4, permission: true }],
        }
    }

    #[test]
    fn canonical_bytes_are_sorted_compact_and_newline_terminated() {
        let bytes = encode_control_message(&demo_message());
        let expected = concat!(
            r#"{"deadline":9,"flow_id":"flow-000001","hops":"#,
            r#"[{"access_end":4,"access_start":2,"node":1,"permission":true}],"#,
            r#""knowledge_link":"kn://unit/0","problem":"p","recipient":0,"unit_field":0}"#,
            "\n"
        );
        assert_eq!(std::str::from_utf8(&bytes).unwrap(), expected);
    }

    #[test]
    fn decode_inverts_encode() {
        let msg = demo_message();
        let bytes = encode_control_message(&msg);
        let back = decode_control_message(&bytes).unwrap();
        assert_eq!(back, msg);
        assert_eq!(encode_control_message(&back), bytes);
    }

    #[test]
    fn truncated_bytes_are_malformed() {
        let bytes = encode_control_message(&demo_message());
        let cut = &bytes[..bytes.len() / 2];
        assert!(matches!(decode_control_message(cut), Err(CodecError::Malformed(_))));
        assert!(matches!(decode_control_message(b"not json\n"), Err(CodecError::Malformed(_))));
    }

    #[test]
    fn unknown_keys_are_malformed() {
        let mut v = serde_json::to_value(demo_message()).unwrap();
        v.as_object_mut().unwrap().insert("extra".into(), 1.into());
        let bytes = serde_json::to_vec(&v).unwrap();
        assert!(matches!(decode_control_message(&bytes), Err(CodecError::Malformed(_))));
    }

    #[test]
    fn invariant_violations_are_invalid_not_malformed() {
        // Structurally valid JSON, but the zero-length window claims permission.
        let bytes = serde_json::to_vec(&serde_json::json!({
            "deadline": 9,
            "flow_id": "f",
            "hops": [{"access_end": 2, "access_start": 2, "node": 1, "permission": true}],
            "knowledge_link": "k",
            "problem": "p",
            "recipient": 0,
            "unit_field": 0,
        }))
        .unwrap();
        assert!(matches!(decode_control_message(&bytes), Err(CodecError::Invalid(_))));
    }

    prop_compose! {
        fn arb_hops()(raw in proptest::collection::vec((0u64..4, 0u64..5, any::<u32>()), 0..6))
            -> (Vec<Hop>, Tick)
        {
            let mut hops = Vec::new();
            let mut cursor: Tick = 0;
            for (gap, len, node) in raw {
                cursor += gap;
                hops.push(Hop {
                    node: NodeId(node),
                    access_start: cursor,
                    access_end: cursor + len,
                    permission: len > 0,
                });
                cursor += len;
            }
            (hops, cursor)
        }
    }

    proptest! {
        #[test]
        fn round_trip_is_byte_exact(
            (hops, span) in arb_hops(),
            extra in 0u64..10,
            flow_id in "[a-zA-Z0-9_-]{1,16}",
            link in "\\PC{0,24}",
            problem in "\\PC{0,24}",
            recipient in any::<u32>(),
            field in any::<u32>(),
        ) {
            let msg = ControlMessage {
                flow_id,
                recipient: NodeId(recipient),
                knowledge_link: link,
                unit_field: UnitFieldId(field),
                problem,
                deadline: span + extra,
                hops,
            };
            prop_assume!(msg.check_invariants().is_ok());
            let bytes = encode_control_message(&msg);
            prop_assert_eq!(*bytes.last().unwrap(), b'\n');
            let back = decode_control_message(&bytes).unwrap();
            prop_assert_eq!(&back, &msg);
            prop_assert_eq!(encode_control_message(&back), bytes);
        }
    }
}
