//! Deadline-backward flow scheduling: pick donor nodes above the recipient's
//! energy, give each the latest feasible processing window before the
//! deadline, compact the result, and emit the control message for the flow.

use crate::erta::ErtStore;
use crate::model::{
    Calendar, CalendarEntry, EnergyMatrix, EntryKind, NodeId, Tick, TimeInterval, UnitFieldId,
};
use serde::{Deserialize, Serialize};

// ─── Requests and flow lists ─────────────────────────────────────────────────

/// One routing request: who needs knowledge in which unit field, by when,
/// and which nodes may serve as hops.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleRequest {
    pub recipient: NodeId,
    pub unit_field: UnitFieldId,
    pub knowledge_link: String,
    pub problem: String,
    pub now: Tick,
    /// Ticks from `now` to the delivery deadline; must be positive.
    pub time_constraint: Tick,
    pub candidates: Vec<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowEntry {
    pub node: NodeId,
    pub interval: TimeInterval,
}

/// Per-flow processing windows in allocation order. Intervals are pairwise
/// disjoint: the flowing item visits one node at a time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowList {
    entries: Vec<FlowEntry>,
}

impl FlowList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, node: NodeId, interval: TimeInterval) {
        assert!(
            self.entries.iter().all(|e| !e.interval.overlaps(interval)),
            "flow list intervals must stay pairwise disjoint"
        );
        self.entries.push(FlowEntry { node, interval });
    }

    pub fn entries(&self) -> &[FlowEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

// ─── Control messages ────────────────────────────────────────────────────────

/// A hop's access window on the path. No permission is encoded as a
/// zero-length window: `permission == false` exactly when
/// `access_start == access_end`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hop {
    pub node: NodeId,
    pub access_start: Tick,
    pub access_end: Tick,
    pub permission: bool,
}

/// Flow metadata traveling with the knowledge item. Hops are sorted by
/// ascending access start and every window closes by the deadline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlMessage {
    pub flow_id: String,
    pub recipient: NodeId,
    pub knowledge_link: String,
    pub unit_field: UnitFieldId,
    pub problem: String,
    pub deadline: Tick,
    pub hops: Vec<Hop>,
}

impl ControlMessage {
    /// Structural invariants every message must satisfy, whether built here
    /// or decoded from bytes.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut prev_start: Option<Tick> = None;
        for (i, hop) in self.hops.iter().enumerate() {
            if hop.access_start > hop.access_end {
                return Err(format!(
                    "hop {i}: access window [{}, {}) is inverted",
                    hop.access_start, hop.access_end
                ));
            }
            if hop.permission != (hop.access_start < hop.access_end) {
                return Err(format!(
                    "hop {i}: permission {} does not match window [{}, {})",
                    hop.permission, hop.access_start, hop.access_end
                ));
            }
            if hop.access_end > self.deadline {
                return Err(format!(
                    "hop {i}: window ends at {} after deadline {}",
                    hop.access_end, self.deadline
                ));
            }
            if let Some(prev) = prev_start {
                if hop.access_start < prev {
                    return Err(format!("hop {i}: starts before the previous hop"));
                }
            }
            prev_start = Some(hop.access_start);
        }
        Ok(())
    }

    /// Node the item moves to after `node`'s hop: the next hop on the path,
    /// or the recipient past the last hop. None when `node` is not a hop.
    pub fn next_stop_after(&self, node: NodeId) -> Option<NodeId> {
        let at = self.hops.iter().position(|h| h.node == node)?;
        Some(match self.hops.get(at + 1) {
            Some(next) => next.node,
            None => self.recipient,
        })
    }

    pub fn hop_of(&self, node: NodeId) -> Option<&Hop> {
        self.hops.iter().find(|h| h.node == node)
    }
}

// ─── Candidate filtering and window allocation ───────────────────────────────

/// Candidates with strictly more energy than the recipient in the requested
/// unit field, ordered by descending energy, node id breaking ties.
pub fn filter_candidates(req: &ScheduleRequest, energies: &EnergyMatrix) -> Vec<NodeId> {
    let recipient_e = energies
        .energy(req.recipient, req.unit_field)
        .expect("recipient within energy matrix");
    let mut seen = std::collections::BTreeSet::new();
    let mut above: Vec<(f64, NodeId)> = req
        .candidates
        .iter()
        .copied()
        .filter(|&c| seen.insert(c))
        .map(|c| {
            let e = energies
                .energy(c, req.unit_field)
                .expect("candidate within energy matrix");
            (e, c)
        })
        .filter(|&(e, _)| e > recipient_e)
        .collect();
    above.sort_by(|(ea, na), (eb, nb)| eb.partial_cmp(ea).unwrap().then(na.cmp(nb)));
    above.into_iter().map(|(_, n)| n).collect()
}

/// Latest interval of exactly `duration` ticks inside `window` that avoids
/// both the node's busy calendar and the windows already granted to the flow.
pub fn allocate_latest(
    busy: &Calendar,
    kfl: &FlowList,
    window: TimeInterval,
    duration: Tick,
) -> Option<TimeInterval> {
    assert!(duration > 0, "durations are whole positive ticks");
    let mut blocked: Vec<(Tick, Tick)> = Vec::new();
    let mut block = |start: Tick, end: Tick| {
        let s = start.max(window.start());
        let e = end.min(window.end());
        if s < e {
            blocked.push((s, e));
        }
    };
    for entry in busy.entries() {
        block(entry.interval.start(), entry.interval.end());
    }
    for entry in kfl.entries() {
        block(entry.interval.start(), entry.interval.end());
    }
    blocked.sort_unstable();

    // Scan gaps in order; remember the latest one that fits.
    let mut best: Option<TimeInterval> = None;
    let mut cursor = window.start();
    let mut consider = |gap_start: Tick, gap_end: Tick| {
        if gap_end - gap_start >= duration {
            best = Some(TimeInterval::new(gap_end - duration, gap_end).expect("non-empty fit"));
        }
    };
    for (s, e) in blocked {
        if s > cursor {
            consider(cursor, s);
        }
        cursor = cursor.max(e);
    }
    if cursor < window.end() {
        consider(cursor, window.end());
    }
    best
}

// ─── Compaction ──────────────────────────────────────────────────────────────

/// Pulls each window earlier against its predecessors: flush when the gap to
/// the latest earlier busy end `e` is shorter than the duration, otherwise to
/// the highest multiple of the duration above `e`, never below the latest
/// earlier flow window end `f`. A sole entry with nothing before it stays
/// where allocation put it. Entries are processed in allocation order and the
/// result is re-sorted by start; lengths are preserved and windows never move
/// later or collide (asserted).
pub fn compact_schedule(kfl: &FlowList, calendars: &[Calendar], t: Tick) -> FlowList {
    let mut current: Vec<FlowEntry> = kfl.entries().to_vec();

    for i in 0..current.len() {
        let FlowEntry { node, interval } = current[i];
        let s = interval.start();
        let d = interval.len();

        let busy = &calendars[node.index()];
        let e = busy
            .entries()
            .iter()
            .map(|en| en.interval.end())
            .filter(|&end| end <= s)
            .max()
            .map_or(t, |end| end.max(t));

        if current.len() == 1 && e == t {
            break;
        }

        let f = current
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, other)| other.interval.end())
            .filter(|&end| end <= s)
            .max()
            .map_or(t, |end| end.max(t));

        let new_start = if s - e < d {
            e.max(f)
        } else {
            let quantized = e + (s - e) / d * d;
            quantized.max(f)
        };
        debug_assert!(new_start <= s);
        let moved = TimeInterval::new(new_start, new_start + d).expect("length preserved");

        for (j, other) in current.iter().enumerate() {
            assert!(
                j == i || !other.interval.overlaps(moved),
                "compaction produced overlapping windows"
            );
        }
        current[i].interval = moved;
    }

    current.sort_by_key(|en| (en.interval.start(), en.node));
    let mut out = FlowList::new();
    for en in current {
        out.push(en.node, en.interval);
    }
    out
}

// ─── Path finding ────────────────────────────────────────────────────────────

/// Single-owner scheduling service. Holds every node's busy calendar and the
/// ledger of flows planned so far; planned windows become busy time for later
/// requests.
#[derive(Debug, Clone)]
pub struct FlowScheduler {
    calendars: Vec<Calendar>,
    history: Vec<FlowList>,
    next_flow: u64,
}

impl FlowScheduler {
    pub fn new(calendars: Vec<Calendar>) -> Self {
        Self { calendars, history: Vec::new(), next_flow: 1 }
    }

    pub fn calendars(&self) -> &[Calendar] {
        &self.calendars
    }

    pub fn history(&self) -> &[FlowList] {
        &self.history
    }

    /// Plans one flow. Donors are tried from the top of the energy order;
    /// a donor whose expected processing time has no free slot inside the
    /// window is skipped. An empty hop list is a legal outcome.
    pub fn find_path(
        &mut self,
        req: &ScheduleRequest,
        energies: &EnergyMatrix,
        erts: &ErtStore,
    ) -> ControlMessage {
        assert!(req.time_constraint > 0, "time constraint must be positive");
        let deadline = req.now + req.time_constraint;
        let window = TimeInterval::new(req.now, deadline).expect("positive constraint");

        let mut kfl = FlowList::new();
        for node in filter_candidates(req, energies) {
            let duration = erts.duration_ticks(node);
            if let Some(iv) =
                allocate_latest(&self.calendars[node.index()], &kfl, window, duration)
            {
                kfl.push(node, iv);
            }
        }

        let compacted = compact_schedule(&kfl, &self.calendars, req.now);

        let hops = compacted
            .entries()
            .iter()
            .map(|en| Hop {
                node: en.node,
                access_start: en.interval.start(),
                access_end: en.interval.end(),
                permission: true,
            })
            .collect();

        let msg = ControlMessage {
            flow_id: format!("flow-{:06}", self.next_flow),
            recipient: req.recipient,
            knowledge_link: req.knowledge_link.clone(),
            unit_field: req.unit_field,
            problem: req.problem.clone(),
            deadline,
            hops,
        };
        debug_assert!(msg.check_invariants().is_ok());
        self.next_flow += 1;

        for en in compacted.entries() {
            self.calendars[en.node.index()]
                .insert(CalendarEntry {
                    interval: en.interval,
                    kind: EntryKind::KnowledgeProcessing,
                })
                .expect("planned window clear of the node's busy time");
        }
        self.history.push(compacted);

        msg
    }
}

/// True when hop energies are non-decreasing along start-time order: the
/// item only ever moves toward higher ground until it drops to the recipient.
pub fn flow_order_principle(kfl: &FlowList, energies: &EnergyMatrix, field: UnitFieldId) -> bool {
    let mut ordered: Vec<&FlowEntry> = kfl.entries().iter().collect();
    ordered.sort_by_key(|en| en.interval.start());
    ordered
        .windows(2)
        .all(|pair| {
            let ea = energies.energy(pair[0].node, field).expect("node in matrix");
            let eb = energies.energy(pair[1].node, field).expect("node in matrix");
            ea <= eb
        })
}
