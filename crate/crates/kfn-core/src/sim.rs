//! Discrete-slot query simulation. Each designated querier issues one query
//! per slot in a random unit field; the strategy picks a responder; responders
//! accept a bounded number of queries per slot, the rest wait in a backlog and
//! are lost once they wait too long.

use crate::model::{EnergyMatrix, NodeId, UnitFieldId};
use crate::strategies::{self, SelectionError, SelectionContext, Strategy};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid config at {field}: {message}")]
    InvalidConfig { field: &'static str, message: String },
    #[error("energy update requires responder above requester (requester {requester}, responder {responder})")]
    InvalidUpdate { requester: NodeId, responder: NodeId },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub node_count: u32,
    pub querier_count: u32,
    pub capacity_per_slot: u32,
    pub slot_count: u32,
    pub risk: f64,
    pub learning_rate: f64,
    /// Slots a query may wait unaccepted after its creation slot.
    pub lost_after_slots: u32,
    pub e_max: f64,
    pub unit_field_count: u32,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |field: &'static str, message: String| {
            Err(SimError::InvalidConfig { field, message })
        };
        if self.node_count == 0 {
            return fail("node_count", "must be positive".into());
        }
        if self.querier_count > self.node_count {
            return fail(
                "querier_count",
                format!("{} exceeds node_count {}", self.querier_count, self.node_count),
            );
        }
        if self.capacity_per_slot == 0 {
            return fail("capacity_per_slot", "must be positive".into());
        }
        if self.slot_count == 0 {
            return fail("slot_count", "must be positive".into());
        }
        if !(self.risk >= 0.0 && self.risk < 1.0) {
            return fail("risk", format!("{} outside [0, 1)", self.risk));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return fail("learning_rate", format!("{} outside (0, 1]", self.learning_rate));
        }
        if self.lost_after_slots == 0 {
            return fail("lost_after_slots", "must be positive".into());
        }
        if !(self.e_max > 0.0 && self.e_max.is_finite()) {
            return fail("e_max", format!("{} must be positive and finite", self.e_max));
        }
        if self.unit_field_count == 0 {
            return fail("unit_field_count", "must be positive".into());
        }
        Ok(())
    }
}

/// Terminal state of one accepted interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Failure,
}

/// A responder at or below the requester's level always fails; above it, the
/// success chance is `(1 - risk) * (responder_e - requester_e) / e_max`.
pub fn interaction_outcome<R: Rng + ?Sized>(
    responder_e: f64,
    requester_e: f64,
    risk: f64,
    e_max: f64,
    rng: &mut R,
) -> Outcome {
    if responder_e <= requester_e {
        return Outcome::Failure;
    }
    let p = (1.0 - risk) * (responder_e - requester_e) / e_max;
    if rng.random::<f64>() < p {
        Outcome::Success
    } else {
        Outcome::Failure
    }
}

/// Successful flow pulls the requester toward the responder by the learning
/// rate; the responder keeps its level. The result never exceeds the
/// responder's value.
pub fn apply_energy_update(
    m: &mut EnergyMatrix,
    requester: NodeId,
    responder: NodeId,
    field: UnitFieldId,
    learning_rate: f64,
) -> Result<(), SimError> {
    let r = m.energy(requester, field).expect("requester within matrix");
    let p = m.energy(responder, field).expect("responder within matrix");
    if p <= r {
        return Err(SimError::InvalidUpdate { requester, responder });
    }
    let updated = (r + learning_rate * (p - r)).min(p);
    m.set(requester, field, updated).expect("update within bounds");
    Ok(())
}

/// Per-node flag: can this node still accept a query in the current slot.
pub fn available_view(accepted_this_slot: &[u32], capacity_per_slot: u32) -> Vec<bool> {
    accepted_this_slot.iter().map(|&a| a < capacity_per_slot).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SlotCounts {
    pub success: u64,
    pub failure: u64,
    pub lost: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Totals {
    pub created: u64,
    pub success: u64,
    pub failure: u64,
    pub lost: u64,
    pub success_prop: f64,
    pub failure_prop: f64,
    pub lost_prop: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub strategy: Strategy,
    pub queriers: Vec<NodeId>,
    pub per_node_success: Vec<u64>,
    pub per_node_load: Vec<u64>,
    pub per_slot: Vec<SlotCounts>,
    pub totals: Totals,
    pub initial_energies: EnergyMatrix,
    pub final_energies: EnergyMatrix,
}

/// Deterministic stream for one run: the config seed mixed with a label
/// (strategy name, or another harness purpose tag).
pub fn run_rng(seed: u64, label: &str) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&fnv1a64(label.as_bytes()).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Uniform initial energies in `[0, e_max]`, node-major then field-major.
pub fn init_energies<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> EnergyMatrix {
    let mut m = EnergyMatrix::new(cfg.node_count, cfg.unit_field_count, cfg.e_max);
    for node in 0..cfg.node_count {
        for field in 0..cfg.unit_field_count {
            let v = rng.random_range(0.0..=cfg.e_max);
            m.set(NodeId(node), UnitFieldId(field), v).expect("draw within bounds");
        }
    }
    m
}

#[derive(Debug, Clone, Copy)]
struct PendingQuery {
    created_slot: u32,
    requester: NodeId,
    field: UnitFieldId,
}

struct RunState {
    energies: EnergyMatrix,
    accepted: Vec<u32>,
    backlog: Vec<VecDeque<PendingQuery>>,
    per_node_success: Vec<u64>,
    per_node_load: Vec<u64>,
    per_slot: Vec<SlotCounts>,
}

impl RunState {
    fn resolve<R: Rng + ?Sized>(
        &mut self,
        cfg: &SimConfig,
        responder: NodeId,
        q: PendingQuery,
        slot: u32,
        rng: &mut R,
    ) {
        self.accepted[responder.index()] += 1;
        let re = self.energies.energy(responder, q.field).expect("responder in range");
        let qe = self.energies.energy(q.requester, q.field).expect("requester in range");
        match interaction_outcome(re, qe, cfg.risk, cfg.e_max, rng) {
            Outcome::Success => {
                self.per_node_success[responder.index()] += 1;
                self.per_slot[slot as usize].success += 1;
                apply_energy_update(
                    &mut self.energies,
                    q.requester,
                    responder,
                    q.field,
                    cfg.learning_rate,
                )
                .expect("success implies responder above requester");
            }
            Outcome::Failure => {
                self.per_slot[slot as usize].failure += 1;
            }
        }
    }
}

/// One full run under one strategy, fully determined by `cfg.seed` and the
/// strategy name. Every created query ends as exactly one of Success, Failure
/// or Lost by the time the report is built.
pub fn run_simulation(cfg: &SimConfig, strategy: Strategy) -> Result<SimulationReport, SimError> {
    cfg.validate()?;
    let mut rng = run_rng(cfg.seed, strategy.name());
    let n = cfg.node_count as usize;

    let energies = init_energies(cfg, &mut rng);
    let initial_energies = energies.clone();

    // The querier set is fixed for the whole run, drawn once up front.
    let mut queriers: Vec<NodeId> = rand::seq::index::sample(
        &mut rng,
        cfg.node_count as usize,
        cfg.querier_count as usize,
    )
    .into_iter()
    .map(|i| NodeId(i as u32))
    .collect();
    queriers.sort();

    let mut st = RunState {
        energies,
        accepted: vec![0; n],
        backlog: vec![VecDeque::new(); n],
        per_node_success: vec![0; n],
        per_node_load: vec![0; n],
        per_slot: vec![SlotCounts::default(); cfg.slot_count as usize],
    };

    for slot in 0..cfg.slot_count {
        st.accepted.fill(0);

        // Expire queries that waited longer than allowed. Backlogs are in
        // arrival order, so expired entries sit at the front.
        for node in 0..n {
            while let Some(front) = st.backlog[node].front() {
                if slot - front.created_slot > cfg.lost_after_slots {
                    st.backlog[node].pop_front();
                    st.per_slot[slot as usize].lost += 1;
                } else {
                    break;
                }
            }
        }

        // Serve waiting queries before new arrivals, oldest first.
        for node in 0..n {
            while st.accepted[node] < cfg.capacity_per_slot {
                match st.backlog[node].pop_front() {
                    Some(q) => st.resolve(cfg, NodeId(node as u32), q, slot, &mut rng),
                    None => break,
                }
            }
        }

        // New arrivals, one per querier, in ascending node id order.
        for &requester in &queriers {
            let field = UnitFieldId(rng.random_range(0..cfg.unit_field_count));
            let candidates: Vec<NodeId> = (0..cfg.node_count)
                .map(NodeId)
                .filter(|&c| c != requester)
                .collect();
            let availability = available_view(&st.accepted, cfg.capacity_per_slot);
            let ctx = SelectionContext {
                requester,
                unit_field: field,
                energies: &st.energies,
                candidates: &candidates,
                availability: &availability,
            };
            let q = PendingQuery { created_slot: slot, requester, field };
            match strategies::select(strategy, &ctx, &mut rng) {
                Ok(responder) => {
                    st.per_node_load[responder.index()] += 1;
                    if st.accepted[responder.index()] < cfg.capacity_per_slot {
                        st.resolve(cfg, responder, q, slot, &mut rng);
                    } else {
                        st.backlog[responder.index()].push_back(q);
                    }
                }
                // No responder can ever serve this query: the interaction fails.
                Err(SelectionError::NoCandidates) => {
                    st.per_slot[slot as usize].failure += 1;
                }
                // Capacity exhausted everywhere: the query is dropped.
                Err(SelectionError::NoAvailableNode) => {
                    st.per_slot[slot as usize].lost += 1;
                }
            }
        }
    }

    // Whatever still waits when the run ends will never be served.
    let last = cfg.slot_count as usize - 1;
    for node in 0..n {
        st.per_slot[last].lost += st.backlog[node].len() as u64;
        st.backlog[node].clear();
    }

    let created = cfg.querier_count as u64 * cfg.slot_count as u64;
    let success: u64 = st.per_slot.iter().map(|s| s.success).sum();
    let failure: u64 = st.per_slot.iter().map(|s| s.failure).sum();
    let lost: u64 = st.per_slot.iter().map(|s| s.lost).sum();
    debug_assert_eq!(success + failure + lost, created);
    let prop = |c: u64| if created == 0 { 0.0 } else { c as f64 / created as f64 };

    Ok(SimulationReport {
        strategy,
        queriers,
        per_node_success: st.per_node_success,
        per_node_load: st.per_node_load,
        per_slot: st.per_slot,
        totals: Totals {
            created,
            success,
            failure,
            lost,
            success_prop: prop(success),
            failure_prop: prop(failure),
            lost_prop: prop(lost),
        },
        initial_energies,
        final_energies: st.energies,
    })
}
