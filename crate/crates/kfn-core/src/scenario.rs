//! Scenario files: one JSON document pins every parameter of a run, so the
//! same file always produces the same output bytes.
//!
//! Missing optional fields take documented defaults and are recorded, so
//! reports can show which values the author never chose.

use crate::model::Tick;
use crate::sim::{SimConfig, SimError};
use crate::strategies::Strategy;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const SCENARIO_VERSION: u32 = 1;

pub const DEFAULT_RISK: f64 = 0.1;
pub const DEFAULT_LEARNING_RATE: f64 = 0.3;
pub const DEFAULT_LOST_AFTER_SLOTS: u32 = 1;
pub const DEFAULT_E_MAX: f64 = 10.0;
pub const DEFAULT_UNIT_FIELD_COUNT: u32 = 1;
pub const DEFAULT_ALPHA: f64 = 0.3;
pub const DEFAULT_ERT: f64 = 3.0;
pub const DEFAULT_BETA: f64 = 0.5;
pub const DEFAULT_POOL_SIZE: u32 = 10;
pub const DEFAULT_BUSY_INTERVALS_MAX: u32 = 3;
pub const DEFAULT_BUSY_INTERVAL_LEN_MAX: Tick = 4;
pub const DEFAULT_ERT_OBSERVATIONS: u32 = 5;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario is not valid JSON: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("invalid scenario: {field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { field: field.into(), message: message.into() }
}

/// Which nodes a flow request may use as donor candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidatePool {
    /// Every node except the recipient.
    All,
    /// The `candidate_pool_size` highest-energy nodes, recipient excluded.
    TopEnergy,
}

impl CandidatePool {
    pub fn name(self) -> &'static str {
        match self {
            CandidatePool::All => "all",
            CandidatePool::TopEnergy => "top-energy",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerParams {
    pub alpha: f64,
    pub default_ert: f64,
    pub beta: f64,
    pub candidate_pool: CandidatePool,
    pub candidate_pool_size: u32,
}

/// Knobs for the flow demonstration: how much synthetic busy time and how
/// many response-time observations seed the planner.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowParams {
    pub busy_intervals_max: u32,
    pub busy_interval_len_max: Tick,
    pub ert_observations: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub sim: SimConfig,
    pub scheduler: SchedulerParams,
    pub strategies: Vec<Strategy>,
    pub flow: FlowParams,
    pub output_dir: Option<String>,
    /// Field paths that took their default because the file omitted them.
    pub defaulted: Vec<String>,
}

// Raw deserialization targets. Optional fields stay Option here so the
// resolver can tell "absent" from "explicitly the default value".

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    version: u32,
    name: String,
    sim: RawSim,
    scheduler: Option<RawScheduler>,
    strategies: Vec<String>,
    flow: Option<RawFlow>,
    output_dir: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    node_count: u32,
    querier_count: u32,
    capacity_per_slot: u32,
    slot_count: u32,
    seed: u64,
    risk: Option<f64>,
    learning_rate: Option<f64>,
    lost_after_slots: Option<u32>,
    e_max: Option<f64>,
    unit_field_count: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScheduler {
    alpha: Option<f64>,
    default_ert: Option<f64>,
    beta: Option<f64>,
    candidate_pool: Option<CandidatePool>,
    candidate_pool_size: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFlow {
    busy_intervals_max: Option<u32>,
    busy_interval_len_max: Option<Tick>,
    ert_observations: Option<u32>,
}

fn or_default<T>(slot: Option<T>, default: T, field: &str, defaulted: &mut Vec<String>) -> T {
    match slot {
        Some(v) => v,
        None => {
            defaulted.push(field.to_string());
            default
        }
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let raw: RawScenario = serde_json::from_str(text)?;
    if raw.version != SCENARIO_VERSION {
        return Err(invalid(
            "version",
            format!("unsupported version {}, this build reads {SCENARIO_VERSION}", raw.version),
        ));
    }
    if raw.name.is_empty() {
        return Err(invalid("name", "must not be empty"));
    }

    let mut defaulted = Vec::new();
    let d = &mut defaulted;

    let sim = SimConfig {
        node_count: raw.sim.node_count,
        querier_count: raw.sim.querier_count,
        capacity_per_slot: raw.sim.capacity_per_slot,
        slot_count: raw.sim.slot_count,
        seed: raw.sim.seed,
        risk: or_default(raw.sim.risk, DEFAULT_RISK, "sim.risk", d),
        learning_rate: or_default(raw.sim.learning_rate, DEFAULT_LEARNING_RATE, "sim.learning_rate", d),
        lost_after_slots: or_default(
            raw.sim.lost_after_slots,
            DEFAULT_LOST_AFTER_SLOTS,
            "sim.lost_after_slots",
            d,
        ),
        e_max: or_default(raw.sim.e_max, DEFAULT_E_MAX, "sim.e_max", d),
        unit_field_count: or_default(
            raw.sim.unit_field_count,
            DEFAULT_UNIT_FIELD_COUNT,
            "sim.unit_field_count",
            d,
        ),
    };
    sim.validate().map_err(|e| match e {
        SimError::InvalidConfig { field, message } => invalid(format!("sim.{field}"), message),
        other => invalid("sim", other.to_string()),
    })?;

    let rs = raw.scheduler.unwrap_or_default();
    let scheduler = SchedulerParams {
        alpha: or_default(rs.alpha, DEFAULT_ALPHA, "scheduler.alpha", d),
        default_ert: or_default(rs.default_ert, DEFAULT_ERT, "scheduler.default_ert", d),
        beta: or_default(rs.beta, DEFAULT_BETA, "scheduler.beta", d),
        candidate_pool: or_default(rs.candidate_pool, CandidatePool::All, "scheduler.candidate_pool", d),
        candidate_pool_size: or_default(
            rs.candidate_pool_size,
            DEFAULT_POOL_SIZE,
            "scheduler.candidate_pool_size",
            d,
        ),
    };
    if !(scheduler.alpha > 0.0 && scheduler.alpha <= 1.0) {
        return Err(invalid("scheduler.alpha", "must be in (0, 1]"));
    }
    if !(scheduler.default_ert.is_finite() && scheduler.default_ert > 0.0) {
        return Err(invalid("scheduler.default_ert", "must be a positive finite number"));
    }
    if !(scheduler.beta > 0.0 && scheduler.beta <= 1.0) {
        return Err(invalid("scheduler.beta", "must be in (0, 1]"));
    }
    if scheduler.candidate_pool_size == 0 {
        return Err(invalid("scheduler.candidate_pool_size", "must be at least 1"));
    }

    let rf = raw.flow.unwrap_or_default();
    let flow = FlowParams {
        busy_intervals_max: or_default(
            rf.busy_intervals_max,
            DEFAULT_BUSY_INTERVALS_MAX,
            "flow.busy_intervals_max",
            d,
        ),
        busy_interval_len_max: or_default(
            rf.busy_interval_len_max,
            DEFAULT_BUSY_INTERVAL_LEN_MAX,
            "flow.busy_interval_len_max",
            d,
        ),
        ert_observations: or_default(
            rf.ert_observations,
            DEFAULT_ERT_OBSERVATIONS,
            "flow.ert_observations",
            d,
        ),
    };
    if flow.busy_interval_len_max == 0 {
        return Err(invalid("flow.busy_interval_len_max", "must be at least 1"));
    }

    if raw.strategies.is_empty() {
        return Err(invalid("strategies", "must list at least one strategy"));
    }
    let mut strategies = Vec::with_capacity(raw.strategies.len());
    for (i, s) in raw.strategies.iter().enumerate() {
        let parsed: Strategy = s
            .parse()
            .map_err(|_| invalid(format!("strategies[{i}]"), format!("unknown strategy {s:?}")))?;
        if strategies.contains(&parsed) {
            return Err(invalid(format!("strategies[{i}]"), format!("{s:?} listed twice")));
        }
        strategies.push(parsed);
    }

    Ok(Scenario {
        name: raw.name,
        sim,
        scheduler,
        strategies,
        flow,
        output_dir: raw.output_dir,
        defaulted,
    })
}

impl Scenario {
    /// Every result-affecting parameter as one JSON value with sorted keys.
    /// Output location and the defaulted-fields record stay out: they do not
    /// change what a run computes.
    pub fn canonical_value(&self) -> serde_json::Value {
        serde_json::json!({
            "version": SCENARIO_VERSION,
            "name": self.name,
            "sim": {
                "node_count": self.sim.node_count,
                "querier_count": self.sim.querier_count,
                "capacity_per_slot": self.sim.capacity_per_slot,
                "slot_count": self.sim.slot_count,
                "seed": self.sim.seed,
                "risk": self.sim.risk,
                "learning_rate": self.sim.learning_rate,
                "lost_after_slots": self.sim.lost_after_slots,
                "e_max": self.sim.e_max,
                "unit_field_count": self.sim.unit_field_count,
            },
            "scheduler": {
                "alpha": self.scheduler.alpha,
                "default_ert": self.scheduler.default_ert,
                "beta": self.scheduler.beta,
                "candidate_pool": self.scheduler.candidate_pool.name(),
                "candidate_pool_size": self.scheduler.candidate_pool_size,
            },
            "strategies": self.strategies.iter().map(|s| s.name()).collect::<Vec<_>>(),
            "flow": {
                "busy_intervals_max": self.flow.busy_intervals_max,
                "busy_interval_len_max": self.flow.busy_interval_len_max,
                "ert_observations": self.flow.ert_observations,
            },
        })
    }

    /// Hex sha-256 over the canonical parameter serialization. Two scenario
    /// files that resolve to the same parameters share a digest, whatever
    /// their formatting.
    pub fn digest(&self) -> String {
        let bytes =
            serde_json::to_vec(&self.canonical_value()).expect("scenario value serializes");
        sha256_hex(&bytes)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_text() -> String {
        r#"{
            "version": 1,
            "name": "demo",
            "sim": {
                "node_count": 50,
                "querier_count": 10,
                "capacity_per_slot": 2,
                "slot_count": 4,
                "seed": 7,
                "risk": 0.2,
                "learning_rate": 0.4,
                "lost_after_slots": 2,
                "e_max": 8.0,
                "unit_field_count": 3
            },
            "scheduler": {
                "alpha": 0.5,
                "default_ert": 2.0,
                "beta": 0.6,
                "candidate_pool": "top-energy",
                "candidate_pool_size": 12
            },
            "strategies": ["random", "conscious"],
            "flow": {
                "busy_intervals_max": 2,
                "busy_interval_len_max": 3,
                "ert_observations": 4
            },
            "output_dir": "out"
        }"#
        .to_string()
    }

    #[test]
    fn full_file_defaults_nothing() {
        let sc = parse_scenario(&full_text()).unwrap();
        assert!(sc.defaulted.is_empty());
        assert_eq!(sc.name, "demo");
        assert_eq!(sc.sim.node_count, 50);
        assert_eq!(sc.scheduler.candidate_pool, CandidatePool::TopEnergy);
        assert_eq!(sc.scheduler.candidate_pool_size, 12);
        assert_eq!(sc.strategies, vec![Strategy::Random, Strategy::Conscious]);
        assert_eq!(sc.flow.busy_interval_len_max, 3);
        assert_eq!(sc.output_dir.as_deref(), Some("out"));
    }

    #[test]
    fn minimal_file_records_every_default() {
        let sc = parse_scenario(
            r#"{
                "version": 1,
                "name": "tiny",
                "sim": {
                    "node_count": 5,
                    "querier_count": 1,
                    "capacity_per_slot": 1,
                    "slot_count": 2,
                    "seed": 1
                },
                "strategies": ["greedy"]
            }"#,
        )
        .unwrap();
        assert_eq!(sc.sim.risk, DEFAULT_RISK);
        assert_eq!(sc.sim.e_max, DEFAULT_E_MAX);
        assert_eq!(sc.scheduler.alpha, DEFAULT_ALPHA);
        assert_eq!(sc.scheduler.candidate_pool, CandidatePool::All);
        assert_eq!(sc.flow.ert_observations, DEFAULT_ERT_OBSERVATIONS);
        assert!(sc.output_dir.is_none());
        let expect = [
            "sim.risk",
            "sim.learning_rate",
            "sim.lost_after_slots",
            "sim.e_max",
            "sim.unit_field_count",
            "scheduler.alpha",
            "scheduler.default_ert",
            "scheduler.beta",
            "scheduler.candidate_pool",
            "scheduler.candidate_pool_size",
            "flow.busy_intervals_max",
            "flow.busy_interval_len_max",
            "flow.ert_observations",
        ];
        assert_eq!(sc.defaulted, expect);
    }

    #[test]
    fn unknown_key_is_malformed() {
        let text = full_text().replace("\"output_dir\"", "\"outptu_dir\"");
        assert!(matches!(parse_scenario(&text), Err(ScenarioError::Malformed(_))));
    }

    #[test]
    fn field_errors_carry_their_path() {
        let bad_version = full_text().replace("\"version\": 1", "\"version\": 2");
        match parse_scenario(&bad_version) {
            Err(ScenarioError::Invalid { field, .. }) => assert_eq!(field, "version"),
            other => panic!("expected version error, got {other:?}"),
        }

        let bad_risk = full_text().replace("\"risk\": 0.2", "\"risk\": 1.5");
        match parse_scenario(&bad_risk) {
            Err(ScenarioError::Invalid { field, .. }) => assert_eq!(field, "sim.risk"),
            other => panic!("expected risk error, got {other:?}"),
        }

        let bad_alpha = full_text().replace("\"alpha\": 0.5", "\"alpha\": 0.0");
        match parse_scenario(&bad_alpha) {
            Err(ScenarioError::Invalid { field, .. }) => assert_eq!(field, "scheduler.alpha"),
            other => panic!("expected alpha error, got {other:?}"),
        }

        let bad_strategy = full_text().replace("\"conscious\"", "\"cunning\"");
        match parse_scenario(&bad_strategy) {
            Err(ScenarioError::Invalid { field, .. }) => assert_eq!(field, "strategies[1]"),
            other => panic!("expected strategy error, got {other:?}"),
        }

        let duplicate = full_text().replace("\"conscious\"", "\"random\"");
        match parse_scenario(&duplicate) {
            Err(ScenarioError::Invalid { field, .. }) => assert_eq!(field, "strategies[1]"),
            other => panic!("expected duplicate error, got {other:?}"),
        }

        let empty = full_text().replace("[\"random\", \"conscious\"]", "[]");
        match parse_scenario(&empty) {
            Err(ScenarioError::Invalid { field, .. }) => assert_eq!(field, "strategies"),
            other => panic!("expected empty-list error, got {other:?}"),
        }
    }

    #[test]
    fn digest_tracks_parameters_not_formatting() {
        let a = parse_scenario(&full_text()).unwrap();
        let compact = full_text().split_whitespace().collect::<String>();
        let b = parse_scenario(&compact).unwrap();
        assert_eq!(a.digest(), b.digest());

        let moved = full_text().replace("\"output_dir\": \"out\"", "\"output_dir\": \"elsewhere\"");
        let c = parse_scenario(&moved).unwrap();
        assert_eq!(a.digest(), c.digest());

        let reseeded = full_text().replace("\"seed\": 7", "\"seed\": 8");
        let d = parse_scenario(&reseeded).unwrap();
        assert_ne!(a.digest(), d.digest());
    }

    #[test]
    fn digest_is_sixty_four_hex_chars() {
        let sc = parse_scenario(&full_text()).unwrap();
        let digest = sc.digest();
        assert_eq!(digest.len(), 64);
        assert!(digest.chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()));
    }
}
