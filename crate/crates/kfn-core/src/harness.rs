//! Turns a scenario into artifacts: strategy sweeps rendered as CSV and
//! JSON, and a flow demonstration rendered as JSON. Every renderer is a pure
//! function of its inputs, so rerunning a scenario reproduces files byte for
//! byte.

use crate::codec::encode_control_message;
use crate::erta::ErtStore;
use crate::model::{Calendar, CalendarEntry, EntryKind, NodeId, Tick, TimeInterval, UnitFieldId};
use crate::routing::{execute_flow, FlowOutcome, KnowledgeItem, RoutingAgent, RoutingEnv};
use crate::scenario::{sha256_hex, CandidatePool, Scenario};
use crate::scheduler::{ControlMessage, FlowScheduler, ScheduleRequest};
use crate::sim::{run_rng, run_simulation, SimError, SimulationReport};
use rand::Rng;
use rayon::prelude::*;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("invalid parameter {name}: {message}")]
    BadParam { name: &'static str, message: String },
}

/// Runs every listed strategy. Runs are independent and each mixes the seed
/// with its strategy name, so parallel execution changes nothing in the
/// results, only the wall-clock time.
pub fn run_sweep(sc: &Scenario) -> Result<Vec<SimulationReport>, HarnessError> {
    let reports = sc
        .strategies
        .par_iter()
        .map(|&s| run_simulation(&sc.sim, s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(reports)
}

/// Load fraction carried by the busiest tenth of nodes (at least one node).
pub fn top_decile_load_share(loads: &[u64]) -> f64 {
    let total: u64 = loads.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let mut sorted = loads.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let k = (loads.len() / 10).max(1);
    let top: u64 = sorted.iter().take(k).sum();
    top as f64 / total as f64
}

fn comment_line(sc: &Scenario) -> String {
    format!(
        "# name={} digest={} seed={} nodes={} queriers={} capacity={} slots={}\n",
        sc.name,
        sc.digest(),
        sc.sim.seed,
        sc.sim.node_count,
        sc.sim.querier_count,
        sc.sim.capacity_per_slot,
        sc.sim.slot_count,
    )
}

pub fn render_per_node_csv(sc: &Scenario, reports: &[SimulationReport]) -> String {
    let mut out = comment_line(sc);
    out.push_str("strategy,node,is_querier,successes,accepted_load,initial_energy,final_energy\n");
    for rep in reports {
        let mut is_querier = vec![false; sc.sim.node_count as usize];
        for q in &rep.queriers {
            is_querier[q.index()] = true;
        }
        for node in 0..sc.sim.node_count {
            let id = NodeId(node);
            writeln!(
                out,
                "{},{},{},{},{},{:.6},{:.6}",
                rep.strategy.name(),
                node,
                u8::from(is_querier[id.index()]),
                rep.per_node_success[id.index()],
                rep.per_node_load[id.index()],
                rep.initial_energies.node_mean(id).expect("node within matrix"),
                rep.final_energies.node_mean(id).expect("node within matrix"),
            )
            .expect("writing to a string cannot fail");
        }
    }
    out
}

pub fn render_totals_csv(sc: &Scenario, reports: &[SimulationReport]) -> String {
    let mut out = comment_line(sc);
    out.push_str("strategy,created,success,failure,lost,success_prop,failure_prop,lost_prop\n");
    for rep in reports {
        let t = &rep.totals;
        writeln!(
            out,
            "{},{},{},{},{},{:.6},{:.6},{:.6}",
            rep.strategy.name(),
            t.created,
            t.success,
            t.failure,
            t.lost,
            t.success_prop,
            t.failure_prop,
            t.lost_prop,
        )
        .expect("writing to a string cannot fail");
    }
    out
}

fn canonical_json_line(value: &serde_json::Value) -> String {
    let mut text = serde_json::to_string(value).expect("value serializes");
    text.push('\n');
    text
}

pub fn render_summary_json(sc: &Scenario, reports: &[SimulationReport]) -> String {
    let mut results = serde_json::Map::new();
    for rep in reports {
        let t = &rep.totals;
        results.insert(
            rep.strategy.name().to_string(),
            serde_json::json!({
                "created": t.created,
                "success": t.success,
                "failure": t.failure,
                "lost": t.lost,
                "success_prop": t.success_prop,
                "failure_prop": t.failure_prop,
                "lost_prop": t.lost_prop,
                "top_decile_load_share": top_decile_load_share(&rep.per_node_load),
                "per_slot": rep
                    .per_slot
                    .iter()
                    .map(|s| serde_json::json!({
                        "success": s.success,
                        "failure": s.failure,
                        "lost": s.lost,
                    }))
                    .collect::<Vec<_>>(),
            }),
        );
    }

    let best = reports
        .iter()
        .max_by(|a, b| {
            a.totals
                .success_prop
                .partial_cmp(&b.totals.success_prop)
                .expect("proportions are finite")
        })
        .map(|rep| rep.strategy.name());

    let value = serde_json::json!({
        "scenario": sc.canonical_value(),
        "digest": sc.digest(),
        "defaulted": sc.defaulted,
        "results": serde_json::Value::Object(results),
        "best_success_strategy": best,
    });
    canonical_json_line(&value)
}

// ─── Flow demonstration ──────────────────────────────────────────────────────

pub const DEMO_INITIAL_QUALITY: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowDemoParams {
    pub recipient: NodeId,
    pub unit_field: UnitFieldId,
    pub time_constraint: Tick,
    pub now: Tick,
}

#[derive(Debug, Clone)]
pub struct FlowDemo {
    pub message: ControlMessage,
    pub encoded: Vec<u8>,
    pub message_sha256: String,
    pub outcome: FlowOutcome,
}

/// Plans and executes one flow on a synthetic network derived from the
/// scenario seed: random energies, some random busy time per calendar, and
/// per-node expected response times trained from random observations.
pub fn run_flow_demo(sc: &Scenario, p: &FlowDemoParams) -> Result<FlowDemo, HarnessError> {
    let n = sc.sim.node_count;
    if p.recipient.0 >= n {
        return Err(HarnessError::BadParam {
            name: "recipient",
            message: format!("node {} outside 0..{n}", p.recipient.0),
        });
    }
    if p.unit_field.0 >= sc.sim.unit_field_count {
        return Err(HarnessError::BadParam {
            name: "unit_field",
            message: format!("field {} outside 0..{}", p.unit_field.0, sc.sim.unit_field_count),
        });
    }
    if p.time_constraint == 0 {
        return Err(HarnessError::BadParam {
            name: "tc",
            message: "time constraint must be positive".into(),
        });
    }

    let mut rng = run_rng(sc.sim.seed, "flow-energies");
    let energies = crate::sim::init_energies(&sc.sim, &mut rng);

    // Busy calendars: a few tasks per node inside the planning window. Draws
    // happen whether or not an interval lands clear, so the stream position
    // never depends on collisions.
    let horizon = p.now + p.time_constraint;
    let mut rng = run_rng(sc.sim.seed, "flow-busy");
    let mut calendars = vec![Calendar::new(); n as usize];
    for cal in calendars.iter_mut() {
        let count = rng.random_range(0..=sc.flow.busy_intervals_max);
        for _ in 0..count {
            let len = rng.random_range(1..=sc.flow.busy_interval_len_max);
            let start = rng.random_range(0..horizon);
            let interval = TimeInterval::new(start, start + len).expect("positive length");
            let _ = cal.insert(CalendarEntry { interval, kind: EntryKind::Task });
        }
    }

    let mut erts = ErtStore::new(n, sc.scheduler.alpha, sc.scheduler.default_ert)
        .expect("scenario validated scheduler params");
    let mut rng = run_rng(sc.sim.seed, "flow-erts");
    for node in 0..n {
        for _ in 0..sc.flow.ert_observations {
            // Observations spread around the configured default, staying
            // positive for any positive default.
            let observed =
                rng.random_range(0.5 * sc.scheduler.default_ert..=2.0 * sc.scheduler.default_ert);
            erts.record_response(NodeId(node), observed).expect("positive observation");
        }
    }

    let candidates = candidate_pool(sc, p, &energies);
    let mut scheduler = FlowScheduler::new(calendars);
    let req = ScheduleRequest {
        recipient: p.recipient,
        unit_field: p.unit_field,
        knowledge_link: format!("kn://unit/{}", p.unit_field.0),
        problem: "flow demonstration".into(),
        now: p.now,
        time_constraint: p.time_constraint,
        candidates,
    };
    let message = scheduler.find_path(&req, &energies, &erts);
    let encoded = encode_control_message(&message);
    let message_sha256 = sha256_hex(&encoded);

    let env = RoutingEnv { energies: &energies, beta: sc.scheduler.beta };
    let mut agents: Vec<RoutingAgent> =
        (0..n).map(|i| RoutingAgent::new(NodeId(i), erts.ert(NodeId(i)))).collect();
    let item = KnowledgeItem {
        link: req.knowledge_link.clone(),
        unit_field: p.unit_field,
        quality: DEMO_INITIAL_QUALITY,
    };
    let mut rng = run_rng(sc.sim.seed, "flow-exec");
    let outcome = execute_flow(&message, item, &mut agents, &env, p.now, &mut rng)
        .expect("agents cover every node on the path");

    Ok(FlowDemo { message, encoded, message_sha256, outcome })
}

fn candidate_pool(sc: &Scenario, p: &FlowDemoParams, energies: &crate::model::EnergyMatrix) -> Vec<NodeId> {
    let others =
        (0..sc.sim.node_count).map(NodeId).filter(|&id| id != p.recipient);
    match sc.scheduler.candidate_pool {
        CandidatePool::All => others.collect(),
        CandidatePool::TopEnergy => {
            let mut pool: Vec<NodeId> = others.collect();
            pool.sort_by(|&a, &b| {
                let ea = energies.energy(a, p.unit_field).expect("node within matrix");
                let eb = energies.energy(b, p.unit_field).expect("node within matrix");
                eb.partial_cmp(&ea).expect("energies are finite").then(a.0.cmp(&b.0))
            });
            pool.truncate(sc.scheduler.candidate_pool_size as usize);
            pool
        }
    }
}

pub fn render_flow_json(sc: &Scenario, p: &FlowDemoParams, demo: &FlowDemo) -> String {
    let out = &demo.outcome;
    let value = serde_json::json!({
        "name": sc.name,
        "scenario_digest": sc.digest(),
        "params": {
            "recipient": p.recipient.0,
            "unit_field": p.unit_field.0,
            "time_constraint": p.time_constraint,
            "now": p.now,
        },
        "message_canonical": String::from_utf8(demo.encoded.clone())
            .expect("canonical encoding is utf-8"),
        "message_sha256": demo.message_sha256,
        "outcome": {
            "delivered": out.delivered,
            "delivery_time": out.delivery_time,
            "final_quality": out.final_quality,
            "hops": out
                .hop_log
                .iter()
                .map(|h| serde_json::json!({
                    "node": h.node.0,
                    "started": h.started,
                    "ended": h.ended,
                    "completed": h.completed,
                    "quality_after": h.quality_after,
                }))
                .collect::<Vec<_>>(),
        },
    });
    canonical_json_line(&value)
}
