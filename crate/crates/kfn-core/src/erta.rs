//! Expected-response-time estimation: exponential moving average over
//! observed response durations, one estimate per node.

use crate::model::{NodeId, Tick};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ErtaError {
    #[error("observed response time {0} must be positive")]
    InvalidObservation(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Blend of the newest observation into the running estimate:
/// `alpha * observed + (1 - alpha) * current`, kept within the closed
/// interval spanned by the two inputs (the clamp pins the bound invariant
/// against float rounding at the edges).
pub fn ema_update(current: f64, observed: f64, alpha: f64) -> Result<f64, ErtaError> {
    debug_assert!(alpha > 0.0 && alpha <= 1.0);
    debug_assert!(current > 0.0);
    if !(observed > 0.0) || !observed.is_finite() {
        return Err(ErtaError::InvalidObservation(observed));
    }
    let blended = current + alpha * (observed - current);
    Ok(blended.clamp(current.min(observed), current.max(observed)))
}

/// Per-node response-time estimates. A node starts at `default_ert` until its
/// first observation arrives. Estimates stay as reals; rounding up to whole
/// ticks happens only when a value is consumed as an interval duration.
#[derive(Debug, Clone, PartialEq)]
pub struct ErtStore {
    ert: Vec<f64>,
    alpha: f64,
    default_ert: f64,
}

impl ErtStore {
    pub fn new(node_count: u32, alpha: f64, default_ert: f64) -> Result<Self, ErtaError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(ErtaError::InvalidParameter(format!(
                "alpha {alpha} outside (0, 1]"
            )));
        }
        if !(default_ert > 0.0) || !default_ert.is_finite() {
            return Err(ErtaError::InvalidParameter(format!(
                "default_ert {default_ert} must be positive"
            )));
        }
        Ok(Self { ert: vec![default_ert; node_count as usize], alpha, default_ert })
    }

    pub fn node_count(&self) -> u32 {
        self.ert.len() as u32
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn default_ert(&self) -> f64 {
        self.default_ert
    }

    pub fn record_response(&mut self, node: NodeId, observed: f64) -> Result<(), ErtaError> {
        let slot = self
            .ert
            .get_mut(node.index())
            .unwrap_or_else(|| panic!("node {node} outside store"));
        *slot = ema_update(*slot, observed, self.alpha)?;
        Ok(())
    }

    pub fn ert(&self, node: NodeId) -> f64 {
        self.ert[node.index()]
    }

    /// Estimate as a whole-tick duration, rounded up.
    pub fn duration_ticks(&self, node: NodeId) -> Tick {
        self.ert(node).ceil() as Tick
    }
}
