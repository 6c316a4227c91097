//! Stability region of PID gains for `x1' = x2`, `x2' = f(x1, x2, t) + u`
//! with `|∂f/∂x1| ≤ L1`, `|∂f/∂x2| ≤ L2`, and the Lyapunov certificate that
//! backs it.

mod lyapunov;
mod manifold;

pub use lyapunov::{
    decompose_g, empirical_convergence, error_coordinates, error_nonlinearity, lyapunov_decrease_check, lyapunov_values,
    ConvergenceStats, ConvergenceTrials, GParts, HarnessMode, LyapunovTolerance, LyapunovVerdict, PlantFamily,
    TrialOutcome,
};
pub use manifold::{
    build_certificate, lambda_min_closed_form, manifold_membership, region_margins, Certificate, ManifoldReport,
    RegionMargins, SweepConfig, SweepSummary,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bounds on `|∂f/∂x1|` and `|∂f/∂x2|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzBounds {
    pub l1: f64,
    pub l2: f64,
}

impl LipschitzBounds {
    pub fn new(l1: f64, l2: f64) -> Result<Self> {
        if l1 > 0.0 && l2 > 0.0 && l1.is_finite() && l2.is_finite() {
            Ok(Self { l1, l2 })
        } else {
            Err(Error::InvalidConfig(format!("Lipschitz bounds must be positive, got ({l1}, {l2})")))
        }
    }
}
