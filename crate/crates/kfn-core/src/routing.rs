//! Per-node routing agents: receive a flowing knowledge item with its control
//! message, hold it for the node's access window, improve it when the window
//! allows, and pass it along so the recipient is always served by the
//! deadline.

use crate::model::{EnergyMatrix, NodeId, Tick, UnitFieldId};
use crate::scheduler::ControlMessage;
use rand::Rng;
use thiserror::Error;

/// Improvement durations stretch the node's expected response time by a
/// uniform factor from this range.
pub const IMPROVEMENT_FACTOR_RANGE: (f64, f64) = (0.7, 1.3);

#[derive(Debug, Error, PartialEq)]
pub enum RoutingError {
    #[error("node {node} is not on the path of flow {flow_id}")]
    NotOnPath { node: NodeId, flow_id: String },
    #[error("no quality gain possible: node energy {node_e} not above recipient energy {recipient_e}")]
    InvalidGain { node_e: f64, recipient_e: f64 },
}

/// The thing that flows: a link to the knowledge, its unit field, and a
/// quality score in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeItem {
    pub link: String,
    pub unit_field: UnitFieldId,
    pub quality: f64,
}

/// One processing pass at a node lifts quality toward 1 in proportion to the
/// node's energy lead over the recipient: `q + beta * (gap / e_max) * (1 - q)`.
pub fn improve_quality(
    quality: f64,
    node_e: f64,
    recipient_e: f64,
    e_max: f64,
    beta: f64,
) -> Result<f64, RoutingError> {
    if node_e <= recipient_e {
        return Err(RoutingError::InvalidGain { node_e, recipient_e });
    }
    let gain = beta * ((node_e - recipient_e) / e_max) * (1.0 - quality);
    Ok((quality + gain).min(1.0))
}

/// Read context for agents: current energies and the improvement gain factor.
pub struct RoutingEnv<'a> {
    pub energies: &'a EnergyMatrix,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReceiveOutcome {
    /// This agent is the flow's recipient; the item stops here.
    DeliveredToRecipient { item: KnowledgeItem },
    /// The item waits for this node's access window.
    Enqueued,
    /// No usable window (expired or no permission): handed straight on.
    ForwardedImmediately { to: NodeId, item: KnowledgeItem, msg: ControlMessage },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TickEvent {
    StartedImprovement { flow_id: String, until: Tick },
    FinishedAndForwarded { to: NodeId, item: KnowledgeItem, msg: ControlMessage },
    AbortedAndForwarded { to: NodeId, item: KnowledgeItem, msg: ControlMessage },
    Idle,
}

#[derive(Debug, Clone)]
struct QueuedFlow {
    item: KnowledgeItem,
    msg: ControlMessage,
    access_start: Tick,
    access_end: Tick,
}

#[derive(Debug, Clone)]
struct ActiveWork {
    item: KnowledgeItem,
    msg: ControlMessage,
    finish_at: Tick,
    access_end: Tick,
}

/// Routing state of one node. The queue stays sorted by this node's access
/// start across flows; at most one improvement runs at a time, and receiving
/// never blocks on it.
#[derive(Debug, Clone)]
pub struct RoutingAgent {
    node: NodeId,
    ert: f64,
    queue: Vec<QueuedFlow>,
    active: Option<ActiveWork>,
}

impl RoutingAgent {
    pub fn new(node: NodeId, ert: f64) -> Self {
        assert!(ert > 0.0, "expected response time must be positive");
        Self { node, ert, queue: Vec::new(), active: None }
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_busy(&self) -> bool {
        self.active.is_some()
    }

    pub fn on_receive(
        &mut self,
        item: KnowledgeItem,
        msg: ControlMessage,
        now: Tick,
    ) -> Result<ReceiveOutcome, RoutingError> {
        if msg.recipient == self.node {
            return Ok(ReceiveOutcome::DeliveredToRecipient { item });
        }
        let hop = msg
            .hop_of(self.node)
            .ok_or_else(|| RoutingError::NotOnPath { node: self.node, flow_id: msg.flow_id.clone() })?;
        if hop.permission && now < hop.access_end {
            let entry = QueuedFlow {
                access_start: hop.access_start,
                access_end: hop.access_end,
                item,
                msg,
            };
            // Insert after equal starts: FIFO among same-start flows.
            let at = self.queue.partition_point(|q| q.access_start <= entry.access_start);
            self.queue.insert(at, entry);
            Ok(ReceiveOutcome::Enqueued)
        } else {
            let to = msg.next_stop_after(self.node).expect("hop exists on path");
            Ok(ReceiveOutcome::ForwardedImmediately { to, item, msg })
        }
    }

    /// Advance this node to time `now`. Yields every state change: a finished
    /// improvement forwards the improved item, a window running out forwards
    /// it untouched, and a window opening starts work on the queue head.
    pub fn tick<R: Rng + ?Sized>(
        &mut self,
        now: Tick,
        env: &RoutingEnv<'_>,
        rng: &mut R,
    ) -> Vec<TickEvent> {
        let mut events = Vec::new();

        if let Some(work) = self.active.take() {
            // Work that used exactly the window still counts: the finish
            // boundary may land on access_end.
            if work.finish_at <= now && work.finish_at <= work.access_end {
                let mut item = work.item;
                let msg = work.msg;
                let node_e = env
                    .energies
                    .energy(self.node, msg.unit_field)
                    .expect("agent node within matrix");
                let recipient_e = env
                    .energies
                    .energy(msg.recipient, msg.unit_field)
                    .expect("recipient within matrix");
                if let Ok(q) =
                    improve_quality(item.quality, node_e, recipient_e, env.energies.e_max(), env.beta)
                {
                    item.quality = q;
                }
                let to = msg.next_stop_after(self.node).expect("hop exists on path");
                events.push(TickEvent::FinishedAndForwarded { to, item, msg });
            } else if now >= work.access_end {
                let to = work.msg.next_stop_after(self.node).expect("hop exists on path");
                events.push(TickEvent::AbortedAndForwarded { to, item: work.item, msg: work.msg });
            } else {
                self.active = Some(work);
            }
        }

        // Queued flows whose window already closed leave untouched.
        let mut i = 0;
        while i < self.queue.len() {
            if self.queue[i].access_end <= now {
                let expired = self.queue.remove(i);
                let to = expired.msg.next_stop_after(self.node).expect("hop exists on path");
                events.push(TickEvent::AbortedAndForwarded {
                    to,
                    item: expired.item,
                    msg: expired.msg,
                });
            } else {
                i += 1;
            }
        }

        if self.active.is_none() {
            let startable = self
                .queue
                .first()
                .is_some_and(|head| head.access_start <= now && now < head.access_end);
            if startable {
                let head = self.queue.remove(0);
                let factor = rng.random_range(IMPROVEMENT_FACTOR_RANGE.0..=IMPROVEMENT_FACTOR_RANGE.1);
                let duration = (self.ert * factor).ceil() as Tick;
                let work = ActiveWork {
                    finish_at: now + duration.max(1),
                    access_end: head.access_end,
                    item: head.item,
                    msg: head.msg,
                };
                events.push(TickEvent::StartedImprovement {
                    flow_id: work.msg.flow_id.clone(),
                    until: work.finish_at,
                });
                self.active = Some(work);
            }
        }

        if events.is_empty() {
            events.push(TickEvent::Idle);
        }
        events
    }
}

// ─── Whole-flow execution ────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub struct HopRecord {
    pub node: NodeId,
    pub started: Tick,
    pub ended: Tick,
    pub completed: bool,
    pub quality_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowOutcome {
    pub delivered: bool,
    pub delivery_time: Tick,
    pub final_quality: f64,
    pub hop_log: Vec<HopRecord>,
}

/// Runs one control message end to end: inject the item at the first hop at
/// `now`, advance all agents tick by tick in node-id order, and stop when the
/// recipient holds the item. Windows all close by the deadline, so delivery
/// never happens after it.
pub fn execute_flow<R: Rng + ?Sized>(
    msg: &ControlMessage,
    item: KnowledgeItem,
    agents: &mut [RoutingAgent],
    env: &RoutingEnv<'_>,
    now: Tick,
    rng: &mut R,
) -> Result<FlowOutcome, RoutingError> {
    debug_assert!(
        agents.iter().enumerate().all(|(i, a)| a.node().index() == i),
        "agents must be indexed by node id"
    );
    let first = msg.hops.first().map_or(msg.recipient, |h| h.node);
    let mut delivered: Option<(Tick, f64)> = None;
    let mut hop_log: Vec<HopRecord> = Vec::new();
    let mut open_starts: Vec<Option<Tick>> = vec![None; agents.len()];

    let mut inbox: Vec<(NodeId, KnowledgeItem, ControlMessage)> =
        vec![(first, item, msg.clone())];

    let mut t = now;
    loop {
        // Same-tick handoffs cascade until everything rests.
        while let Some((to, item, m)) = inbox.pop() {
            match agents[to.index()].on_receive(item, m, t)? {
                ReceiveOutcome::DeliveredToRecipient { item } => {
                    delivered.get_or_insert((t, item.quality));
                }
                ReceiveOutcome::Enqueued => {}
                ReceiveOutcome::ForwardedImmediately { to, item, msg } => {
                    inbox.push((to, item, msg));
                }
            }
        }
        if delivered.is_some() || t > msg.deadline {
            break;
        }

        for agent in agents.iter_mut() {
            let node = agent.node();
            for event in agent.tick(t, env, rng) {
                match event {
                    TickEvent::StartedImprovement { .. } => {
                        open_starts[node.index()] = Some(t);
                    }
                    TickEvent::FinishedAndForwarded { to, item, msg } => {
                        hop_log.push(HopRecord {
                            node,
                            started: open_starts[node.index()].take().unwrap_or(t),
                            ended: t,
                            completed: true,
                            quality_after: item.quality,
                        });
                        inbox.push((to, item, msg));
                    }
                    TickEvent::AbortedAndForwarded { to, item, msg } => {
                        hop_log.push(HopRecord {
                            node,
                            started: open_starts[node.index()].take().unwrap_or(t),
                            ended: t,
                            completed: false,
                            quality_after: item.quality,
                        });
                        inbox.push((to, item, msg));
                    }
                    TickEvent::Idle => {}
                }
            }
        }
        if inbox.is_empty() {
            t += 1;
        }
    }

    let (delivery_time, final_quality) = delivered.unwrap_or((t, f64::NAN));
    Ok(FlowOutcome {
        delivered: delivered.is_some(),
        delivery_time,
        final_quality,
        hop_log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Calendar;
    use crate::scheduler::Hop;
    use crate::sim::run_rng;

    fn matrix(energies: &[f64]) -> EnergyMatrix {
        let mut m = EnergyMatrix::new(energies.len() as u32, 1, 10.0);
        for (i, &e) in energies.iter().enumerate() {
            m.set(NodeId(i as u32), UnitFieldId(0), e).unwrap();
        }
        m
    }

    fn item(quality: f64) -> KnowledgeItem {
        KnowledgeItem { link: "kn://unit/0".into(), unit_field: UnitFieldId(0), quality }
    }

    fn message(hops: Vec<Hop>) -> ControlMessage {
        ControlMessage {
            flow_id: "flow-000001".into(),
            recipient: NodeId(0),
            knowledge_link: "kn://unit/0".into(),
            unit_field: UnitFieldId(0),
            problem: "p".into(),
            deadline: 10,
            hops,
        }
    }

    fn hop(node: u32, start: Tick, end: Tick) -> Hop {
        Hop { node: NodeId(node), access_start: start, access_end: end, permission: start < end }
    }

    #[test]
    fn quality_gain_is_exact() {
        assert_eq!(improve_quality(0.5, 8.0, 4.0, 10.0, 0.5).unwrap(), 0.6);
        assert_eq!(improve_quality(1.0, 8.0, 4.0, 10.0, 0.5).unwrap(), 1.0);
        assert_eq!(
            improve_quality(0.5, 4.0, 4.0, 10.0, 0.5),
            Err(RoutingError::InvalidGain { node_e: 4.0, recipient_e: 4.0 })
        );
    }

    #[test]
    fn receive_routes_by_role_and_window() {
        let msg = message(vec![hop(1, 5, 8), hop(2, 8, 10)]);

        let mut recipient = RoutingAgent::new(NodeId(0), 1.0);
        assert!(matches!(
            recipient.on_receive(item(0.2), msg.clone(), 0).unwrap(),
            ReceiveOutcome::DeliveredToRecipient { .. }
        ));

        let mut outsider = RoutingAgent::new(NodeId(9), 1.0);
        assert_eq!(
            outsider.on_receive(item(0.2), msg.clone(), 0),
            Err(RoutingError::NotOnPath { node: NodeId(9), flow_id: "flow-000001".into() })
        );

        let mut on_time = RoutingAgent::new(NodeId(1), 1.0);
        assert_eq!(on_time.on_receive(item(0.2), msg.clone(), 3).unwrap(), ReceiveOutcome::Enqueued);
        assert_eq!(on_time.queue_len(), 1);

        // Window [5,8) already over at 9: pass to the next hop.
        let mut late = RoutingAgent::new(NodeId(1), 1.0);
        match late.on_receive(item(0.2), msg.clone(), 9).unwrap() {
            ReceiveOutcome::ForwardedImmediately { to, .. } => assert_eq!(to, NodeId(2)),
            other => panic!("expected immediate forward, got {other:?}"),
        }

        // Last hop late: pass to the recipient.
        let mut last_late = RoutingAgent::new(NodeId(2), 1.0);
        match last_late.on_receive(item(0.2), msg, 10).unwrap() {
            ReceiveOutcome::ForwardedImmediately { to, .. } => assert_eq!(to, NodeId(0)),
            other => panic!("expected immediate forward, got {other:?}"),
        }
    }

    #[test]
    fn no_permission_hop_forwards_immediately() {
        let msg = message(vec![hop(1, 5, 5), hop(2, 8, 10)]);
        msg.check_invariants().unwrap();
        let mut agent = RoutingAgent::new(NodeId(1), 1.0);
        match agent.on_receive(item(0.2), msg, 0).unwrap() {
            ReceiveOutcome::ForwardedImmediately { to, .. } => assert_eq!(to, NodeId(2)),
            other => panic!("expected immediate forward, got {other:?}"),
        }
    }

    // ert 1.5 stretches to (1.05, 1.95], so the sampled duration is always 2.
    #[test]
    fn improvement_finishes_inside_its_window() {
        let energies = matrix(&[2.0, 8.0]);
        let env = RoutingEnv { energies: &energies, beta: 0.5 };
        let mut rng = run_rng(9, "tick");
        let msg = message(vec![hop(1, 5, 8)]);
        let mut agent = RoutingAgent::new(NodeId(1), 1.5);

        agent.on_receive(item(0.2), msg, 4).unwrap();
        assert_eq!(agent.tick(4, &env, &mut rng), vec![TickEvent::Idle]);
        let events = agent.tick(5, &env, &mut rng);
        assert_eq!(
            events,
            vec![TickEvent::StartedImprovement { flow_id: "flow-000001".into(), until: 7 }]
        );
        assert!(agent.is_busy());
        assert_eq!(agent.tick(6, &env, &mut rng), vec![TickEvent::Idle]);
        match &agent.tick(7, &env, &mut rng)[..] {
            [TickEvent::FinishedAndForwarded { to, item, .. }] => {
                assert_eq!(*to, NodeId(0));
                // 0.2 + 0.5 * (6/10) * 0.8
                assert!((item.quality - 0.44).abs() < 1e-12);
            }
            other => panic!("expected finish, got {other:?}"),
        }
        assert!(!agent.is_busy());
    }

    // ert 4.5 stretches to (3.15, 5.85], never finishing a 3-tick window.
    #[test]
    fn overrunning_improvement_aborts_at_window_end() {
        let energies = matrix(&[2.0, 8.0]);
        let env = RoutingEnv { energies: &energies, beta: 0.5 };
        let mut rng = run_rng(10, "tick");
        let msg = message(vec![hop(1, 5, 8)]);
        let mut agent = RoutingAgent::new(NodeId(1), 4.5);

        agent.on_receive(item(0.2), msg, 5).unwrap();
        let events = agent.tick(5, &env, &mut rng);
        assert!(matches!(events[0], TickEvent::StartedImprovement { until, .. } if until >= 9));
        for t in 6..8 {
            assert_eq!(agent.tick(t, &env, &mut rng), vec![TickEvent::Idle]);
        }
        match &agent.tick(8, &env, &mut rng)[..] {
            [TickEvent::AbortedAndForwarded { to, item, .. }] => {
                assert_eq!(*to, NodeId(0));
                assert_eq!(item.quality, 0.2);
            }
            other => panic!("expected abort, got {other:?}"),
        }
    }

    // ert 4.5 stretches to at least 4 ticks, so the agent is still busy when
    // the queued flow's window closes.
    #[test]
    fn queue_stays_sorted_and_expired_entries_leave() {
        let energies = matrix(&[2.0, 8.0, 9.0]);
        let env = RoutingEnv { energies: &energies, beta: 0.5 };
        let mut rng = run_rng(11, "tick");
        let mut agent = RoutingAgent::new(NodeId(1), 4.5);

        let mut early = message(vec![hop(1, 2, 9)]);
        early.flow_id = "flow-000002".into();
        let late = message(vec![hop(1, 3, 5), hop(2, 9, 10)]);

        // Arrive in reverse start order; the earlier window must run first.
        agent.on_receive(item(0.2), late, 1).unwrap();
        agent.on_receive(item(0.2), early, 1).unwrap();
        assert_eq!(agent.queue_len(), 2);

        let events = agent.tick(2, &env, &mut rng);
        assert!(matches!(
            &events[..],
            [TickEvent::StartedImprovement { flow_id, .. }] if flow_id == "flow-000002"
        ));

        // The [3,5) window of the queued flow expires while the agent works.
        for t in 3..5 {
            assert_eq!(agent.tick(t, &env, &mut rng), vec![TickEvent::Idle]);
        }
        match &agent.tick(5, &env, &mut rng)[..] {
            [TickEvent::AbortedAndForwarded { to, item, .. }] => {
                assert_eq!(*to, NodeId(2));
                assert_eq!(item.quality, 0.2);
            }
            other => panic!("expected queue expiry, got {other:?}"),
        }
        assert_eq!(agent.queue_len(), 0);
        assert!(agent.is_busy());
    }

    fn agents(erts: &[f64]) -> Vec<RoutingAgent> {
        erts.iter()
            .enumerate()
            .map(|(i, &e)| RoutingAgent::new(NodeId(i as u32), e))
            .collect()
    }

    #[test]
    fn flow_without_hops_delivers_at_once() {
        let energies = matrix(&[2.0]);
        let env = RoutingEnv { energies: &energies, beta: 0.5 };
        let mut rng = run_rng(12, "flow");
        let msg = message(vec![]);
        let out =
            execute_flow(&msg, item(0.3), &mut agents(&[1.0]), &env, 0, &mut rng).unwrap();
        assert!(out.delivered);
        assert_eq!(out.delivery_time, 0);
        assert_eq!(out.final_quality, 0.3);
        assert!(out.hop_log.is_empty());
    }

    #[test]
    fn planned_flow_reaches_recipient_by_deadline_with_rising_quality() {
        use crate::erta::ErtStore;
        use crate::scheduler::{FlowScheduler, ScheduleRequest};

        let energies = matrix(&[2.0, 5.0, 8.0]);
        let mut erts = ErtStore::new(3, 1.0, 3.0).unwrap();
        erts.record_response(NodeId(2), 2.0).unwrap();
        let mut sched = FlowScheduler::new(vec![Calendar::new(); 3]);
        let req = ScheduleRequest {
            recipient: NodeId(0),
            unit_field: UnitFieldId(0),
            knowledge_link: "kn://unit/0".into(),
            problem: "p".into(),
            now: 0,
            time_constraint: 10,
            candidates: vec![NodeId(1), NodeId(2)],
        };
        let msg = sched.find_path(&req, &energies, &erts);

        let env = RoutingEnv { energies: &energies, beta: 0.5 };
        let mut rng = run_rng(13, "flow");
        let mut ag = agents(&[1.0, erts.ert(NodeId(1)), erts.ert(NodeId(2))]);
        let out = execute_flow(&msg, item(0.2), &mut ag, &env, 0, &mut rng).unwrap();

        assert!(out.delivered);
        assert!(out.delivery_time <= msg.deadline);
        let mut last = 0.2;
        for rec in &out.hop_log {
            assert!(rec.quality_after >= last, "quality fell at {:?}", rec);
            if !rec.completed {
                assert_eq!(rec.quality_after, last);
            }
            last = rec.quality_after;
        }
        assert!(out.final_quality >= 0.2);
    }
}
