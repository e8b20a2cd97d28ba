//! Simulation and planning library for capacity-limited knowledge-flow
//! networks.
//!
//! Nodes carrying per-field energy levels exchange knowledge over discrete
//! time slots. The crate covers the whole pipeline: peer-selection strategies
//! and their slot-by-slot simulation, deadline-backward flow scheduling over
//! busy calendars, adaptive response-time estimates, canonical control-message
//! bytes, and routing agents that execute a planned flow tick by tick.
//! Everything is deterministic given a scenario file: one seed fixes every
//! random draw, and rendered artifacts reproduce byte for byte.

#![forbid(unsafe_code)]

pub mod codec;
pub mod erta;
pub mod harness;
pub mod model;
pub mod routing;
pub mod scenario;
pub mod scheduler;
pub mod sim;
pub mod strategies;

pub use codec::{decode_control_message, encode_control_message, CodecError};
pub use erta::{ema_update, ErtStore, ErtaError};
pub use harness::{
    render_flow_json, render_per_node_csv, render_summary_json, render_totals_csv, run_flow_demo,
    run_sweep, top_decile_load_share, FlowDemo, FlowDemoParams, HarnessError,
};
pub use model::{
    Calendar, CalendarEntry, EnergyMatrix, EntryKind, ModelError, NodeId, Tick, TimeInterval,
    UnitFieldId,
};
pub use routing::{
    execute_flow, improve_quality, FlowOutcome, KnowledgeItem, RoutingAgent, RoutingEnv,
    RoutingError,
};
pub use scenario::{parse_scenario, CandidatePool, Scenario, ScenarioError};
pub use scheduler::{
    allocate_latest, compact_schedule, filter_candidates, flow_order_principle, ControlMessage,
    FlowEntry, FlowList, FlowScheduler, Hop, ScheduleRequest,
};
pub use sim::{
    interaction_outcome, run_rng, run_simulation, Outcome, SimConfig, SimError, SimulationReport,
};
pub use strategies::{select, SelectionContext, SelectionError, Strategy};
