//! Shared helpers for integration tests: randomized planning instances, an
//! independent constraint checker for planned flows, and a random valid
//! control message generator.

use kfn_core::erta::ErtStore;
use kfn_core::model::{
    Calendar, CalendarEntry, EnergyMatrix, EntryKind, NodeId, Tick, TimeInterval, UnitFieldId,
};
use kfn_core::scheduler::{ControlMessage, Hop, ScheduleRequest};
use rand::Rng;

pub struct Instance {
    pub energies: EnergyMatrix,
    pub calendars: Vec<Calendar>,
    pub erts: ErtStore,
    pub req: ScheduleRequest,
}

pub const INSTANCE_E_MAX: f64 = 10.0;

/// Node 0 is the recipient; up to six donor candidates with random energies,
/// random busy calendars (roughly a third stay empty), and response-time
/// estimates trained from a few random observations.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, force_empty_calendars: bool) -> Instance {
    let candidate_count: u32 = rng.random_range(0..=6);
    let node_count = candidate_count + 1;

    let mut energies = EnergyMatrix::new(node_count, 1, INSTANCE_E_MAX);
    for node in 0..node_count {
        let e = rng.random_range(0.0..=INSTANCE_E_MAX);
        energies.set(NodeId(node), UnitFieldId(0), e).unwrap();
    }

    let now: Tick = rng.random_range(0..5);
    let tc: Tick = rng.random_range(3..=20);
    let deadline = now + tc;

    let mut calendars = vec![Calendar::new(); node_count as usize];
    if !force_empty_calendars {
        for cal in calendars.iter_mut().skip(1) {
            if rng.random::<f64>() < 0.3 {
                continue;
            }
            for _ in 0..rng.random_range(1..=3u32) {
                let len: Tick = rng.random_range(1..=4);
                let start: Tick = rng.random_range(0..deadline + 2);
                let interval = TimeInterval::new(start, start + len).unwrap();
                let _ = cal.insert(CalendarEntry { interval, kind: EntryKind::Task });
            }
        }
    }

    let mut erts = ErtStore::new(node_count, 0.5, 3.0).unwrap();
    for node in 1..node_count {
        for _ in 0..rng.random_range(0..4u32) {
            let observed = rng.random_range(0.5..8.0);
            erts.record_response(NodeId(node), observed).unwrap();
        }
    }

    let req = ScheduleRequest {
        recipient: NodeId(0),
        unit_field: UnitFieldId(0),
        knowledge_link: "kn://unit/0".into(),
        problem: "fuzz".into(),
        now,
        time_constraint: tc,
        candidates: (1..node_count).map(NodeId).collect(),
    };

    Instance { energies, calendars, erts, req }
}

/// Verifies a planned message against every constraint a legal plan must
/// satisfy, using nothing but the instance data and interval arithmetic.
pub fn check_planned_flow(inst: &Instance, msg: &ControlMessage) -> Result<(), String> {
    msg.check_invariants()?;

    let deadline = inst.req.now + inst.req.time_constraint;
    if msg.deadline != deadline {
        return Err(format!("deadline {} differs from requested {deadline}", msg.deadline));
    }
    if msg.recipient != inst.req.recipient {
        return Err(format!("recipient {} differs from request", msg.recipient.0));
    }

    let recipient_e =
        inst.energies.energy(inst.req.recipient, inst.req.unit_field).unwrap();

    let mut windows: Vec<TimeInterval> = Vec::new();
    for (i, hop) in msg.hops.iter().enumerate() {
        if !inst.req.candidates.contains(&hop.node) {
            return Err(format!("hop {i}: node {} was never a candidate", hop.node.0));
        }
        if msg.hops.iter().filter(|h| h.node == hop.node).count() != 1 {
            return Err(format!("hop {i}: node {} appears twice", hop.node.0));
        }
        let e = inst.energies.energy(hop.node, inst.req.unit_field).unwrap();
        if e <= recipient_e {
            return Err(format!(
                "hop {i}: node {} energy {e} not above recipient {recipient_e}",
                hop.node.0
            ));
        }
        if !hop.permission {
            return Err(format!("hop {i}: planned without permission"));
        }
        if hop.access_start < inst.req.now {
            return Err(format!(
                "hop {i}: starts at {} before now {}",
                hop.access_start, inst.req.now
            ));
        }
        let window = TimeInterval::new(hop.access_start, hop.access_end)
            .map_err(|e| format!("hop {i}: {e}"))?;
        let needed = inst.erts.duration_ticks(hop.node);
        if window.len() != needed {
            return Err(format!(
                "hop {i}: window length {} differs from expected duration {needed}",
                window.len()
            ));
        }
        for busy in inst.calendars[hop.node.index()].entries() {
            if busy.interval.overlaps(window) {
                return Err(format!(
                    "hop {i}: window {:?} collides with busy time {:?}",
                    window, busy.interval
                ));
            }
        }
        for earlier in &windows {
            if earlier.overlaps(window) {
                return Err(format!("hop {i}: window overlaps another hop"));
            }
        }
        windows.push(window);
    }
    Ok(())
}

/// With empty calendars the plan is fully predictable: donors above the
/// recipient are taken in descending energy order while their whole-tick
/// durations still fit the constraint.
pub fn expected_empty_calendar_hops(inst: &Instance) -> Vec<NodeId> {
    let recipient_e =
        inst.energies.energy(inst.req.recipient, inst.req.unit_field).unwrap();
    let mut above: Vec<(f64, NodeId)> = inst
        .req
        .candidates
        .iter()
        .map(|&c| (inst.energies.energy(c, inst.req.unit_field).unwrap(), c))
        .filter(|&(e, _)| e > recipient_e)
        .collect();
    above.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));

    let mut used: Tick = 0;
    let mut kept = Vec::new();
    for (_, node) in above {
        let d = inst.erts.duration_ticks(node);
        if used + d <= inst.req.time_constraint {
            used += d;
            kept.push(node);
        }
    }
    kept
}

/// A structurally valid message with random hops: ascending windows, an
/// occasional zero-length no-permission hop, and a deadline at or past the
/// last window end.
pub fn random_message<R: Rng + ?Sized>(rng: &mut R, id: u64) -> ControlMessage {
    let hop_count = rng.random_range(0..=4usize);
    let mut hops = Vec::with_capacity(hop_count);
    let mut cursor: Tick = rng.random_range(0..4);
    for i in 0..hop_count {
        cursor += rng.random_range(0..3u64);
        let len: Tick = rng.random_range(0..=3);
        hops.push(Hop {
            node: NodeId(i as u32 + 1),
            access_start: cursor,
            access_end: cursor + len,
            permission: len > 0,
        });
        cursor += len;
    }
    let problems = ["p", "kysymys", "\u{6d41}\u{308d}", ""];
    ControlMessage {
        flow_id: format!("flow-{id:06}"),
        recipient: NodeId(0),
        knowledge_link: format!("kn://unit/{}", rng.random_range(0..3u32)),
        unit_field: UnitFieldId(rng.random_range(0..3)),
        problem: problems[rng.random_range(0..problems.len())].to_string(),
        deadline: cursor + rng.random_range(0..3u64),
        hops,
    }
}
