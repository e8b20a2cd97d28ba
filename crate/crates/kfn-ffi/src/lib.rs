//! C ABI over the knowledge-flow network toolkit. Simulation reports travel
//! as opaque handles, every call returns a status code, and the build script
//! regenerates `include/kfn.h` from these declarations.

use kfn_core::model::NodeId;
use kfn_core::sim::{run_simulation, SimConfig, SimError, SimulationReport};
use kfn_core::strategies::Strategy;
use kfn_core::{decode_control_message, encode_control_message, CodecError};
use std::ffi::CStr;
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KfnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidConfig = 2,
    UnknownStrategy = 3,
    RunFailed = 4,
    IndexOutOfRange = 5,
    MalformedMessage = 6,
    InvalidMessage = 7,
    BufferTooSmall = 8,
}

/// Mirror of the simulation configuration, flattened for C callers.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct KfnSimConfig {
    pub node_count: u32,
    pub querier_count: u32,
    pub capacity_per_slot: u32,
    pub slot_count: u32,
    pub lost_after_slots: u32,
    pub unit_field_count: u32,
    pub risk: f64,
    pub learning_rate: f64,
    pub e_max: f64,
    pub seed: u64,
}

impl KfnSimConfig {
    fn to_core(self) -> SimConfig {
        SimConfig {
            node_count: self.node_count,
            querier_count: self.querier_count,
            capacity_per_slot: self.capacity_per_slot,
            slot_count: self.slot_count,
            risk: self.risk,
            learning_rate: self.learning_rate,
            lost_after_slots: self.lost_after_slots,
            e_max: self.e_max,
            unit_field_count: self.unit_field_count,
            seed: self.seed,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KfnTotals {
    pub created: u64,
    pub success: u64,
    pub failure: u64,
    pub lost: u64,
    pub success_prop: f64,
    pub failure_prop: f64,
    pub lost_prop: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KfnNodeStats {
    pub successes: u64,
    pub accepted_load: u64,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub is_querier: bool,
}

/// Opaque simulation result. Create with `kfn_simulation_run`, read through
/// the accessor functions, release with `kfn_report_free`.
pub struct KfnReport {
    inner: SimulationReport,
}

/// Runs one simulation and hands back a report handle.
///
/// # Safety
/// `config` and `strategy` must point to a valid configuration and a
/// NUL-terminated strategy name; `out_report` must point to writable storage
/// for one pointer.
#[no_mangle]
pub unsafe extern "C" fn kfn_simulation_run(
    config: *const KfnSimConfig,
    strategy: *const c_char,
    out_report: *mut *mut KfnReport,
) -> KfnStatus {
    if config.is_null() || strategy.is_null() || out_report.is_null() {
        return KfnStatus::NullPointer;
    }
    *out_report = std::ptr::null_mut();

    let Ok(name) = CStr::from_ptr(strategy).to_str() else {
        return KfnStatus::UnknownStrategy;
    };
    let Ok(strategy) = name.parse::<Strategy>() else {
        return KfnStatus::UnknownStrategy;
    };
    let cfg = (*config).to_core();

    match catch_unwind(AssertUnwindSafe(|| run_simulation(&cfg, strategy))) {
        Ok(Ok(report)) => {
            *out_report = Box::into_raw(Box::new(KfnReport { inner: report }));
            KfnStatus::Ok
        }
        Ok(Err(SimError::InvalidConfig { .. })) => KfnStatus::InvalidConfig,
        Ok(Err(_)) => KfnStatus::RunFailed,
        Err(_) => KfnStatus::RunFailed,
    }
}

/// Copies run totals out of a report.
///
/// # Safety
/// `report` must be a live handle from `kfn_simulation_run`; `out` must point
/// to writable storage for one `KfnTotals`.
#[no_mangle]
pub unsafe extern "C" fn kfn_report_totals(
    report: *const KfnReport,
    out: *mut KfnTotals,
) -> KfnStatus {
    if report.is_null() || out.is_null() {
        return KfnStatus::NullPointer;
    }
    let t = &(*report).inner.totals;
    *out = KfnTotals {
        created: t.created,
        success: t.success,
        failure: t.failure,
        lost: t.lost,
        success_prop: t.success_prop,
        failure_prop: t.failure_prop,
        lost_prop: t.lost_prop,
    };
    KfnStatus::Ok
}

/// Number of nodes covered by a report.
///
/// # Safety
/// `report` must be a live handle from `kfn_simulation_run` or null; null
/// yields zero.
#[no_mangle]
pub unsafe extern "C" fn kfn_report_node_count(report: *const KfnReport) -> u32 {
    if report.is_null() {
        return 0;
    }
    (*report).inner.per_node_success.len() as u32
}

/// Copies one node's counters and mean energies out of a report.
///
/// # Safety
/// `report` must be a live handle from `kfn_simulation_run`; `out` must point
/// to writable storage for one `KfnNodeStats`.
#[no_mangle]
pub unsafe extern "C" fn kfn_report_node_stats(
    report: *const KfnReport,
    node: u32,
    out: *mut KfnNodeStats,
) -> KfnStatus {
    if report.is_null() || out.is_null() {
        return KfnStatus::NullPointer;
    }
    let inner = &(*report).inner;
    if node as usize >= inner.per_node_success.len() {
        return KfnStatus::IndexOutOfRange;
    }
    let id = NodeId(node);
    *out = KfnNodeStats {
        successes: inner.per_node_success[id.index()],
        accepted_load: inner.per_node_load[id.index()],
        initial_energy: inner.initial_energies.node_mean(id).expect("node within matrix"),
        final_energy: inner.final_energies.node_mean(id).expect("node within matrix"),
        is_querier: inner.queriers.contains(&id),
    };
    KfnStatus::Ok
}

/// Releases a report handle. Null is a no-op.
///
/// # Safety
/// `report` must be null or a handle from `kfn_simulation_run` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kfn_report_free(report: *mut KfnReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Parses control-message bytes and rewrites them in canonical form. Always
/// stores the canonical length in `out_len`; bytes are copied only when
/// `out_buf` has room.
///
/// # Safety
/// `input` must point to `input_len` readable bytes, `out_len` to writable
/// storage for one `size_t`, and `out_buf` to `out_cap` writable bytes unless
/// null.
#[no_mangle]
pub unsafe extern "C" fn kfn_control_message_canonicalize(
    input: *const u8,
    input_len: usize,
    out_buf: *mut u8,
    out_cap: usize,
    out_len: *mut usize,
) -> KfnStatus {
    if input.is_null() || out_len.is_null() {
        return KfnStatus::NullPointer;
    }
    let bytes = std::slice::from_raw_parts(input, input_len);
    let msg = match decode_control_message(bytes) {
        Ok(msg) => msg,
        Err(CodecError::Malformed(_)) => return KfnStatus::MalformedMessage,
        Err(CodecError::Invalid(_)) => return KfnStatus::InvalidMessage,
    };
    let encoded = encode_control_message(&msg);
    *out_len = encoded.len();
    if out_buf.is_null() || out_cap < encoded.len() {
        return KfnStatus::BufferTooSmall;
    }
    std::ptr::copy_nonoverlapping(encoded.as_ptr(), out_buf, encoded.len());
    KfnStatus::Ok
}

/// NUL-terminated library version; the pointer stays valid for the process
/// lifetime.
#[no_mangle]
pub extern "C" fn kfn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
