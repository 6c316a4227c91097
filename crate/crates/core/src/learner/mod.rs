//! Online reconstruction loop: step test, cost, policy prediction, gain
//! update, repeated until the response meets the targets.

mod report;
pub mod svg;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{analyze_response, compute_cost, CostWeights, MetricConventions, PerfIndicators, PerfTargets};
use crate::policy::{clamp_update, ClampLimits, PolicyModel};
use crate::sim::{closed_loop_step, ControllerParams, Plant, SimConfig, Trajectory};

pub use report::{replay_report, IterationRow, LearningReport, ReplayVerdict, RowStatus, TerminalStatus};

/// How a prediction becomes the next gain triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateRule {
    /// `K(i+1) = K(i) + clamp(α·ζ)`.
    Incremental,
    /// `K(i+1) = K(0) + α·ζ`, clamped relative to `K(i)`.
    FromInitial,
    /// Reads the prediction as `K* - α·K(i)`, recovers the implied expert
    /// gains and moves a fraction `α` of the way towards them.
    #[default]
    ExpertEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    pub max_iterations: usize,
    pub alpha: f64,
    pub weights: CostWeights,
    pub targets: PerfTargets,
    pub limits: ClampLimits,
    pub sim: SimConfig,
    pub conventions: MetricConventions,
    pub setpoint: f64,
    pub update: UpdateRule,
    /// Per-gain multipliers applied to the raw prediction.
    pub output_scale: [f64; 3],
    /// Derivative filter used once the controller has been reconstructed.
    /// `None` keeps the initial controller's filter throughout.
    pub reconstructed_filter: Option<f64>,
    pub seed: u64,
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("need at least one iteration".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if self.setpoint == 0.0 || !self.setpoint.is_finite() {
            return Err(Error::InvalidConfig("setpoint must be nonzero and finite".into()));
        }
        if self.output_scale.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidConfig("output scale must be positive".into()));
        }
        if let Some(n) = self.reconstructed_filter {
            if !(n > 0.0) || !n.is_finite() {
                return Err(Error::InvalidConfig("reconstructed filter must be positive".into()));
            }
        }
        self.weights.validate()?;
        self.targets.validate()?;
        self.limits.validate()?;
        self.sim.validate()
    }
}

/// One step test: the response and, when it can be measured, its cost.
pub struct Trial {
    pub trajectory: Trajectory,
    pub indicators: Option<PerfIndicators>,
    pub cost: Option<f64>,
}

pub fn evaluate(plant: &Plant, params: &ControllerParams, cfg: &LearnConfig) -> Result<Trial> {
    let trajectory = closed_loop_step(plant, params, cfg.setpoint, &cfg.sim)?;
    if trajectory.diverged {
        return Ok(Trial {
            trajectory,
            indicators: None,
            cost: None,
        });
    }
    let indicators = analyze_response(&trajectory, cfg.setpoint, &cfg.conventions)
        .ok()
        .map(|r| r.indicators)
        .filter(|i| i.is_finite());
    let cost = indicators.map(|i| compute_cost(&i, &cfg.targets.indicators, &cfg.weights));
    Ok(Trial {
        trajectory,
        indicators,
        cost,
    })
}

fn proposed_increment(rule: UpdateRule, raw: [f64; 3], scale: [f64; 3], alpha: f64, current: [f64; 3], initial: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|j| {
        let z = scale[j] * raw[j];
        match rule {
            UpdateRule::Incremental => alpha * z,
            UpdateRule::FromInitial => initial[j] + alpha * z - current[j],
            UpdateRule::ExpertEstimate => {
                let expert = z + alpha * current[j];
                alpha * (expert - current[j])
            }
        }
    })
}

/// Runs the reconstruction loop from `init`.
///
/// Trials whose response diverges or cannot be measured are penalized: they
/// are charged ten times the largest finite cost seen so far (or `1e3`
/// before any), the update that produced them is rolled back and retried at
/// half size. A failed initial controller is halved towards zero gain. If
/// no trial in the budget can be measured the run fails.
pub fn run_learning(plant: &Plant, init: &ControllerParams, model: &PolicyModel, cfg: &LearnConfig) -> Result<LearningReport> {
    cfg.validate()?;
    init.validate()?;
    model.validate()?;
    if !cfg.limits.contains(init.gains()) {
        return Err(Error::InvalidConfig(format!("initial gains {:?} lie outside the gain box", init.gains())));
    }
    let initial = init.gains();
    let mut gains = initial;
    let mut filter_n = init.filter_n;
    let mut base = initial;
    let mut pending: Option<[f64; 3]> = None;
    let mut rows: Vec<IterationRow> = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    let mut largest_cost: Option<f64> = None;
    let mut status = TerminalStatus::BudgetExhausted;

    for iter in 1..=cfg.max_iterations {
        let params = ControllerParams {
            theta1: gains[0],
            theta2: gains[1],
            theta3: gains[2],
            filter_n,
        };
        let trial = evaluate(plant, &params, cfg)?;
        let (ind, cost) = match (trial.indicators, trial.cost) {
            (Some(i), Some(c)) => (i, c),
            _ => {
                let penalty = largest_cost.map_or(1e3, |c| 10.0 * c);
                // a failed initial controller is treated as an increment from zero gain
                let delta = pending.unwrap_or(gains);
                if pending.is_none() {
                    base = [0.0; 3];
                }
                let half = delta.map(|d| 0.5 * d);
                warn!("iteration {iter}: trial at {gains:?} failed, penalty {penalty:.3e}, halving the increment");
                rows.push(IterationRow::penalized(iter, params, penalty));
                gains = [0, 1, 2].map(|j| base[j] + half[j]);
                if let Some(b) = cfg.limits.gain_box {
                    gains = [0, 1, 2].map(|j| gains[j].clamp(b[j].0, b[j].1));
                }
                pending = Some(half);
                continue;
            }
        };
        largest_cost = Some(largest_cost.map_or(cost, |c: f64| c.max(cost)));
        if best.is_none_or(|(_, b)| cost < b) {
            best = Some((rows.len(), cost));
        }
        base = gains;
        let gated = cfg.targets.overshoot_gate.is_some_and(|d| ind.overshoot < d);
        if cost < cfg.targets.cost_threshold || gated {
            info!("iteration {iter}: converged with cost {cost:.4e}");
            rows.push(IterationRow::accepted(iter, params, ind, cost, None, None, RowStatus::Converged));
            status = TerminalStatus::Converged;
            break;
        }
        let raw = model.predict(&ind)?;
        let proposal = proposed_increment(cfg.update, raw, cfg.output_scale, cfg.alpha, gains, initial);
        let clamped = clamp_update(proposal, &cfg.limits, gains);
        debug!("iteration {iter}: cost {cost:.4e}, raw {raw:?}, step {:?}", clamped.delta);
        rows.push(IterationRow::accepted(iter, params, ind, cost, Some(raw), Some(clamped.delta), RowStatus::Accepted));
        gains = [0, 1, 2].map(|j| gains[j] + clamped.delta[j]);
        pending = Some(clamped.delta);
        if let Some(n) = cfg.reconstructed_filter {
            filter_n = n;
        }
    }

    let (best_row, best_cost) = best.ok_or(Error::AllDiverged {
        iterations: rows.len(),
    })?;
    let best_params = rows[best_row].params;
    let best_indicators = rows[best_row].indicators.expect("accepted rows carry indicators");
    Ok(LearningReport {
        rows,
        status,
        best_iteration: best_row + 1,
        best_params,
        best_cost,
        best_indicators,
        config: cfg.clone(),
        initial: *init,
    })
}
