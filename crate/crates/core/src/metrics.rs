//! Step-response performance indicators, the weighted performance cost and
//! the increment path norms.
//!
//! Conventions (all configurable through [`MetricConventions`]):
//!
//! * `y(∞)` is the mean of the final 5% of the horizon.
//! * Overshoot is `(peak - y(∞)) / y(∞)`, clamped below at zero. The peak is
//!   compared against the larger of `y(∞)` and the last sample.
//! * Rise time is the 10%–90% crossing interval of `y(∞)`.
//! * Settling time is measured against a ±5% band around `y*`. The default
//!   reports the last time the response leaves the band; the alternative
//!   reports the first time the response reaches the band.
//!
//! Crossing times are linearly interpolated between samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::Trajectory;

/// `[φσ, φe, φtr, φts]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfIndicators {
    pub overshoot: f64,
    pub steady_state_error: f64,
    pub rise_time: f64,
    pub settling_time: f64,
}

impl PerfIndicators {
    pub fn new(overshoot: f64, steady_state_error: f64, rise_time: f64, settling_time: f64) -> Self {
        Self {
            overshoot,
            steady_state_error,
            rise_time,
            settling_time,
        }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [
            self.overshoot,
            self.steady_state_error,
            self.rise_time,
            self.settling_time,
        ]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Weights `(a, b, c, d)` of the quadratic performance cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl CostWeights {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let w = Self { a, b, c, d };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.to_array().iter().all(|&w| w > 0.0 && w.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("cost weights must be positive: {self:?}")))
        }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }
}

/// Target response plus the two stopping thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfTargets {
    pub indicators: PerfIndicators,
    /// Stop once the cost drops below this.
    pub cost_threshold: f64,
    /// Stop once the overshoot drops below this. `None` disables the gate.
    pub overshoot_gate: Option<f64>,
}

impl PerfTargets {
    pub fn validate(&self) -> Result<()> {
        if !(self.cost_threshold > 0.0) {
            return Err(Error::InvalidConfig("cost threshold must be positive".into()));
        }
        if let Some(g) = self.overshoot_gate {
            if !(g > 0.0) {
                return Err(Error::InvalidConfig("overshoot gate must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RiseConvention {
    /// 10% to 90% of `y(∞)`.
    #[default]
    TenNinety,
    /// From `t = 0` to the first crossing of `y(∞)`.
    ZeroToFinal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SettleConvention {
    /// Last time the response leaves the band.
    #[default]
    LastExit,
    /// First time the response reaches the band.
    FirstEntry,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConventions {
    pub rise: RiseConvention,
    pub settle: SettleConvention,
    /// Half-width of the settling band as a fraction of `|y*|`.
    pub band: f64,
    /// Fraction of the horizon averaged for `y(∞)`.
    pub tail_fraction: f64,
}

impl Default for MetricConventions {
    fn default() -> Self {
        Self {
            rise: RiseConvention::TenNinety,
            settle: SettleConvention::LastExit,
            band: 0.05,
            tail_fraction: 0.05,
        }
    }
}

/// Indicators plus the conditions under which they were measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicatorReport {
    pub indicators: PerfIndicators,
    pub final_value: f64,
    /// The response never settled into the band; settling time is the horizon.
    pub never_settled: bool,
    /// The horizon is shorter than five settling times.
    pub horizon_too_short: bool,
}

pub fn compute_indicators(traj: &Trajectory, ystar: f64) -> Result<PerfIndicators> {
    analyze_response(traj, ystar, &MetricConventions::default()).map(|r| r.indicators)
}

pub fn analyze_response(
    traj: &Trajectory,
    ystar: f64,
    conv: &MetricConventions,
) -> Result<IndicatorReport> {
    if traj.diverged {
        return Err(Error::Diverged {
            time: traj.horizon(),
        });
    }
    if ystar == 0.0 {
        return Err(Error::Precondition("indicators need a nonzero setpoint".into()));
    }
    if traj.is_empty() {
        return Err(Error::Precondition("empty trajectory".into()));
    }
    let y = &traj.y;
    let t = &traj.t;
    let n = y.len();
    let tail = ((conv.tail_fraction * n as f64).round() as usize).clamp(1, n);
    let final_value = y[n - tail..].iter().sum::<f64>() / tail as f64;
    if !final_value.is_finite() || final_value == 0.0 {
        return Err(Error::NoRise);
    }
    let sign = final_value.signum();

    let peak = y.iter().map(|v| v * sign).fold(f64::NEG_INFINITY, f64::max) * sign;
    // A response still creeping upward at the horizon has its last sample
    // above the tail mean; that is not overshoot.
    let baseline = sign * (final_value * sign).max(y[n - 1] * sign);
    let overshoot = ((peak - baseline) / final_value).max(0.0);
    let steady_state_error = ystar - final_value;

    let reach = |level: f64| first_reach(t, y, level, sign);
    let rise_time = match conv.rise {
        RiseConvention::TenNinety => {
            let t10 = reach(0.1 * final_value).ok_or(Error::NoRise)?;
            let t90 = reach(0.9 * final_value).ok_or(Error::NoRise)?;
            t90 - t10
        }
        RiseConvention::ZeroToFinal => {
            reach(0.1 * final_value).ok_or(Error::NoRise)?;
            reach(final_value).ok_or(Error::NoRise)?
        }
    };

    let half_width = conv.band * ystar.abs();
    let horizon = traj.horizon();
    let (settling_time, never_settled) = match conv.settle {
        SettleConvention::LastExit => last_exit(t, y, ystar, half_width),
        SettleConvention::FirstEntry => first_entry(t, y, ystar, half_width),
    };
    let horizon_too_short = never_settled || horizon < 5.0 * settling_time;

    Ok(IndicatorReport {
        indicators: PerfIndicators {
            overshoot,
            steady_state_error,
            rise_time,
            settling_time: if never_settled { horizon } else { settling_time },
        },
        final_value,
        never_settled,
        horizon_too_short,
    })
}

fn interpolate_crossing(t0: f64, t1: f64, y0: f64, y1: f64, level: f64) -> f64 {
    if y1 == y0 {
        t1
    } else {
        t0 + (t1 - t0) * ((level - y0) / (y1 - y0)).clamp(0.0, 1.0)
    }
}

/// First time `sign·y` reaches `sign·level`.
fn first_reach(t: &[f64], y: &[f64], level: f64, sign: f64) -> Option<f64> {
    let k = y.iter().position(|&v| v * sign >= level * sign)?;
    if k == 0 {
        Some(t[0])
    } else {
        Some(interpolate_crossing(t[k - 1], t[k], y[k - 1], y[k], level))
    }
}

fn band_edge(prev: f64, ystar: f64, half_width: f64) -> f64 {
    if prev > ystar {
        ystar + half_width
    } else {
        ystar - half_width
    }
}

fn last_exit(t: &[f64], y: &[f64], ystar: f64, half_width: f64) -> (f64, bool) {
    let outside = |v: f64| (v - ystar).abs() > half_width;
    match y.iter().rposition(|&v| outside(v)) {
        None => (0.0, false),
        Some(k) if k + 1 == y.len() => (t[k], true),
        Some(k) => {
            let edge = band_edge(y[k], ystar, half_width);
            (interpolate_crossing(t[k], t[k + 1], y[k], y[k + 1], edge), false)
        }
    }
}

fn first_entry(t: &[f64], y: &[f64], ystar: f64, half_width: f64) -> (f64, bool) {
    match y.iter().position(|&v| (v - ystar).abs() <= half_width) {
        None => (*t.last().unwrap(), true),
        Some(0) => (t[0], false),
        Some(k) => {
            let edge = band_edge(y[k - 1], ystar, half_width);
            (interpolate_crossing(t[k - 1], t[k], y[k - 1], y[k], edge), false)
        }
    }
}

/// Square root of the weighted squared deviation from the targets.
pub fn compute_cost(ind: &PerfIndicators, targets: &PerfIndicators, w: &CostWeights) -> f64 {
    let dev = |target: f64, actual: f64| (target - actual).powi(2);
    let h = w.a * dev(targets.overshoot, ind.overshoot)
        + w.b * dev(targets.steady_state_error, ind.steady_state_error)
        + w.c * dev(targets.rise_time, ind.rise_time)
        + w.d * dev(targets.settling_time, ind.settling_time);
    h.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum PathNorm {
    /// `|Δ1| + |Δ2| + |Δ3|`
    Xi1,
    /// `sqrt(Δ1² + Δ2²) + |Δ3|`
    Xi2,
    /// Euclidean.
    #[default]
    Xi3,
}

pub fn path_norm(delta: [f64; 3], variant: PathNorm) -> f64 {
    let [a, b, c] = delta;
    match variant {
        PathNorm::Xi1 => a.abs() + b.abs() + c.abs(),
        PathNorm::Xi2 => a.hypot(b) + c.abs(),
        PathNorm::Xi3 => (a * a + b * b + c * c).sqrt(),
    }
}
