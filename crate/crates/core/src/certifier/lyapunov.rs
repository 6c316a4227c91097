use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifold::{build_certificate, manifold_membership, SweepConfig};
use super::LipschitzBounds;
use crate::error::{Error, Result};
use crate::sim::{simulate_nonlinear, ControllerParams, NonlinearPlant, Nonlinearity, SimConfig, Trajectory};

/// `g = h·y + l·z` at one point of the error coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GParts {
    pub g: f64,
    pub h: f64,
    pub l: f64,
}

const FD_STEP: f64 = 1e-6;
/// Below this `|y|` or `|z|` the quotients switch to derivatives.
const QUOTIENT_FLOOR: f64 = 1e-9;

/// The nonlinearity seen by the error dynamics, `g(y, z, t) = -f(y*-y, -z, t) + f(y*, 0, t)`.
pub fn error_nonlinearity<F: Fn(f64, f64, f64) -> f64>(f: &F, ystar: f64, y: f64, z: f64, t: f64) -> f64 {
    -f(ystar - y, -z, t) + f(ystar, 0.0, t)
}

/// Splits `g` into its position and rate factors at `(y, z, t)`. With
/// `bounds`, also checks `|h| ≤ L1` and `|l| ≤ L2` up to finite-difference
/// tolerance.
pub fn decompose_g<F: Fn(f64, f64, f64) -> f64>(
    f: &F,
    ystar: f64,
    (y, z, t): (f64, f64, f64),
    bounds: Option<LipschitzBounds>,
) -> Result<GParts> {
    let g = |y: f64, z: f64| error_nonlinearity(f, ystar, y, z, t);
    let value = g(y, z);
    let h = if y.abs() > QUOTIENT_FLOOR {
        g(y, 0.0) / y
    } else {
        (g(FD_STEP, 0.0) - g(-FD_STEP, 0.0)) / (2.0 * FD_STEP)
    };
    let l = if z.abs() > QUOTIENT_FLOOR {
        (value - g(y, 0.0)) / z
    } else {
        (g(y, FD_STEP) - g(y, -FD_STEP)) / (2.0 * FD_STEP)
    };
    if let Some(b) = bounds {
        let tol = 1e-6;
        if h.abs() > b.l1 + tol || l.abs() > b.l2 + tol {
            return Err(Error::LipschitzViolation(format!(
                "at (y, z, t) = ({y}, {z}, {t}): |h| = {}, |l| = {} exceed ({}, {})",
                h.abs(),
                l.abs(),
                b.l1,
                b.l2
            )));
        }
    }
    Ok(GParts { g: value, h, l })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovTolerance {
    /// Allowed rise between samples relative to the current value.
    pub relative_rise: f64,
    /// Final value below which the trajectory counts as settled.
    pub ball: f64,
}

impl Default for LyapunovTolerance {
    fn default() -> Self {
        Self {
            relative_rise: 1e-4,
            ball: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovVerdict {
    pub pass: bool,
    pub non_increasing: bool,
    pub settled: bool,
    pub initial: f64,
    pub final_value: f64,
    /// Largest `(V[k+1] - V[k]) / V[k]` seen.
    pub max_relative_rise: f64,
    pub values: Vec<f64>,
}

/// Error coordinates `(x, y, z)` of a sample of a nonlinear step response
/// with states `[x1, x2, ∫e]`.
pub fn error_coordinates(state: &[f64], ystar: f64, offset: f64) -> [f64; 3] {
    [state[2] + offset, ystar - state[0], -state[1]]
}

/// Lyapunov function along a trajectory from [`simulate_nonlinear`]: the
/// quadratic form in `M` plus `∫_0^y (p(τ) - p0)·τ dτ`, integrated with the
/// trapezoid rule over successive samples of `y`.
pub fn lyapunov_values<F: Fn(f64, f64, f64) -> f64>(
    traj: &Trajectory,
    theta: [f64; 3],
    f: &F,
    ystar: f64,
    bounds: LipschitzBounds,
) -> Result<Vec<f64>> {
    if traj.state_dim() != 3 {
        return Err(Error::InvalidConfig(format!(
            "expected a nonlinear trajectory with 3 states, got {}",
            traj.state_dim()
        )));
    }
    let report = build_certificate(theta, bounds, &SweepConfig { points: 2, p_range: None })?;
    let m = report.certificate.expect("member has a certificate").m;
    let offset = f(ystar, 0.0, 0.0) / theta[1];
    // (p(τ) - p0)·τ = L1·τ - g(τ, 0)
    let integrand = |tau: f64| bounds.l1 * tau - error_nonlinearity(f, ystar, tau, 0.0, 0.0);
    let trapezoid = |a: f64, b: f64| 0.5 * (b - a) * (integrand(a) + integrand(b));

    let mut values = Vec::with_capacity(traj.len());
    let mut integral = 0.0;
    let mut prev_y: Option<f64> = None;
    for k in 0..traj.len() {
        let x = error_coordinates(traj.state(k), ystar, offset);
        let y = x[1];
        match prev_y {
            None => {
                let n = 1000;
                integral = (0..n).map(|i| trapezoid(y * i as f64 / n as f64, y * (i + 1) as f64 / n as f64)).sum();
            }
            Some(py) => integral += trapezoid(py, y),
        }
        prev_y = Some(y);
        let mut quad = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                quad += x[i] * m[i][j] * x[j];
            }
        }
        values.push(quad + integral);
    }
    Ok(values)
}

pub fn lyapunov_decrease_check<F: Fn(f64, f64, f64) -> f64>(
    traj: &Trajectory,
    theta: [f64; 3],
    f: &F,
    ystar: f64,
    bounds: LipschitzBounds,
    tol: &LyapunovTolerance,
) -> Result<LyapunovVerdict> {
    let values = lyapunov_values(traj, theta, f, ystar, bounds)?;
    let initial = values.first().copied().unwrap_or(0.0);
    let final_value = values.last().copied().unwrap_or(0.0);
    let floor = 1e-12 * initial.abs();
    let mut non_increasing = true;
    let mut max_relative_rise: f64 = 0.0;
    for w in values.windows(2) {
        let rise = w[1] - w[0];
        if rise > 0.0 {
            if w[0] > 0.0 {
                max_relative_rise = max_relative_rise.max(rise / w[0]);
            }
            if rise > tol.relative_rise * w[0].abs() + floor {
                non_increasing = false;
            }
        }
    }
    let settled = final_value.abs() < tol.ball;
    Ok(LyapunovVerdict {
        pass: non_increasing && settled,
        non_increasing,
        settled,
        initial,
        final_value,
        max_relative_rise,
        values,
    })
}

/// Which nonlinearities the convergence harness draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlantFamily {
    /// `a1·L1·sin(x1) + a2·L2·tanh(x2)` with `a1, a2 ~ U[-1, 1]`.
    SinTanh,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HarnessMode {
    /// Refuse gains outside the region.
    Assert,
    /// Run anyway and only report; no Lyapunov check.
    Falsify,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrials {
    pub trials: usize,
    pub family: PlantFamily,
    pub x0_range: (f64, f64),
    pub ystar_range: (f64, f64),
    pub horizon: f64,
    pub step: f64,
    /// Required `|x1(T) - y*|` and `|x2(T)|`.
    pub tolerance: f64,
    pub check_lyapunov: bool,
    pub lyapunov: LyapunovTolerance,
    pub seed: u64,
}

impl Default for ConvergenceTrials {
    fn default() -> Self {
        Self {
            trials: 50,
            family: PlantFamily::SinTanh,
            x0_range: (-2.0, 2.0),
            ystar_range: (-1.0, 1.0),
            horizon: 50.0,
            step: 1e-3,
            tolerance: 1e-2,
            check_lyapunov: true,
            lyapunov: LyapunovTolerance::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub f: Nonlinearity,
    pub x0: [f64; 2],
    pub ystar: f64,
    pub position_error: f64,
    pub rate: f64,
    pub diverged: bool,
    pub converged: bool,
    pub lyapunov_pass: Option<bool>,
    pub max_relative_rise: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStats {
    pub member: bool,
    pub trials: usize,
    pub converged: usize,
    pub pass_fraction: f64,
    pub worst_position_error: f64,
    pub worst_rate: f64,
    pub lyapunov_failures: usize,
    pub outcomes: Vec<TrialOutcome>,
}

/// Closes the loop around random plants from `cfg.family` and counts how
/// many reach `y*` at rest within the horizon.
pub fn empirical_convergence(
    bounds: LipschitzBounds,
    theta: [f64; 3],
    cfg: &ConvergenceTrials,
    mode: HarnessMode,
) -> Result<ConvergenceStats> {
    let member = manifold_membership(theta, bounds)?.member;
    if mode == HarnessMode::Assert && !member {
        build_certificate(theta, bounds, &SweepConfig::default())?;
    }
    if cfg.trials == 0 {
        return Err(Error::InvalidConfig("need at least one trial".into()));
    }
    let sim = SimConfig {
        divergence_bound: 1e6,
        ..SimConfig::new(cfg.step, cfg.horizon)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let draws: Vec<(Nonlinearity, [f64; 2], f64)> = (0..cfg.trials)
        .map(|_| {
            let f = match cfg.family {
                PlantFamily::SinTanh => Nonlinearity::SinTanh {
                    a1: rng.gen_range(-1.0..=1.0),
                    a2: rng.gen_range(-1.0..=1.0),
                    l1: bounds.l1,
                    l2: bounds.l2,
                },
                PlantFamily::Zero => Nonlinearity::Zero,
            };
            let x0 = [rng.gen_range(cfg.x0_range.0..=cfg.x0_range.1), rng.gen_range(cfg.x0_range.0..=cfg.x0_range.1)];
            let ystar = rng.gen_range(cfg.ystar_range.0..=cfg.ystar_range.1);
            (f, x0, ystar)
        })
        .collect();
    let gains = ControllerParams {
        theta1: theta[0],
        theta2: theta[1],
        theta3: theta[2],
        filter_n: 1.0,
    };
    let check = cfg.check_lyapunov && member;
    let outcomes = draws
        .par_iter()
        .map(|&(f, x0, ystar)| -> Result<TrialOutcome> {
            let plant = NonlinearPlant::new(f, bounds, 1.0)?;
            let traj = simulate_nonlinear(&plant, &gains, ystar, x0, &sim)?;
            let last = traj.final_state();
            let position_error = (last[0] - ystar).abs();
            let rate = last[1].abs();
            let converged = !traj.diverged && position_error < cfg.tolerance && rate < cfg.tolerance;
            let (lyapunov_pass, max_relative_rise) = if check && !traj.diverged {
                let eval = |a: f64, b: f64, t: f64| f.eval(a, b, t);
                let v = lyapunov_decrease_check(&traj, theta, &eval, ystar, bounds, &cfg.lyapunov)?;
                (Some(v.non_increasing), Some(v.max_relative_rise))
            } else {
                (None, None)
            };
            Ok(TrialOutcome {
                f,
                x0,
                ystar,
                position_error,
                rate,
                diverged: traj.diverged,
                converged,
                lyapunov_pass,
                max_relative_rise,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let converged = outcomes.iter().filter(|o| o.converged).count();
    Ok(ConvergenceStats {
        member,
        trials: outcomes.len(),
        converged,
        pass_fraction: converged as f64 / outcomes.len() as f64,
        worst_position_error: outcomes.iter().map(|o| o.position_error).fold(0.0, f64::max),
        worst_rate: outcomes.iter().map(|o| o.rate).fold(0.0, f64::max),
        lyapunov_failures: outcomes.iter().filter(|o| o.lyapunov_pass == Some(false)).count(),
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit() -> LipschitzBounds {
        LipschitzBounds::new(1.0, 1.0).unwrap()
    }

    #[test]
    fn zero_nonlinearity_decomposes_to_zero() {
        let f = |_: f64, _: f64, _: f64| 0.0;
        for p in [(0.0, 0.0, 0.0), (1.0, -2.0, 3.0), (0.0, 1.0, 0.5)] {
            let g = decompose_g(&f, 0.7, p, Some(unit())).unwrap();
            assert_eq!((g.g, g.h, g.l), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn sine_position_term() {
        let f = |x1: f64, _: f64, _: f64| x1.sin();
        let g = decompose_g(&f, 0.0, (0.8, 0.3, 0.0), Some(unit())).unwrap();
        assert_abs_diff_eq!(g.g, 0.8f64.sin(), epsilon = 1e-12);
        assert_abs_diff_eq!(g.h, 0.8f64.sin() / 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(g.l, 0.0, epsilon = 1e-12);
        let at_zero = decompose_g(&f, 0.0, (0.0, 0.0, 0.0), None).unwrap();
        assert_abs_diff_eq!(at_zero.h, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn tanh_rate_term() {
        let f = |_: f64, x2: f64, _: f64| x2.tanh();
        let g = decompose_g(&f, 0.0, (0.4, 1.0, 0.0), Some(unit())).unwrap();
        assert_abs_diff_eq!(g.l, 1f64.tanh(), epsilon = 1e-12);
        assert_abs_diff_eq!(g.l, 0.7616, epsilon = 1e-4);
    }

    #[test]
    fn steep_nonlinearity_is_flagged() {
        let f = |x1: f64, _: f64, _: f64| 3.0 * x1.sin();
        let e = decompose_g(&f, 0.0, (0.1, 0.0, 0.0), Some(unit())).unwrap_err();
        assert!(matches!(e, Error::LipschitzViolation(_)));
    }

    fn run(f: Nonlinearity, x0: [f64; 2], ystar: f64) -> Trajectory {
        let plant = NonlinearPlant::new(f, unit(), 1.0).unwrap();
        let gains = ControllerParams::new(5.0, 1.0, 5.0, 1.0).unwrap();
        simulate_nonlinear(&plant, &gains, ystar, x0, &SimConfig::new(1e-3, 50.0)).unwrap()
    }

    #[test]
    fn linear_loop_decreases() {
        let traj = run(Nonlinearity::Zero, [0.0, 0.0], 1.0);
        let v = lyapunov_decrease_check(&traj, [5.0, 1.0, 5.0], &|_, _, _| 0.0, 1.0, unit(), &LyapunovTolerance::default()).unwrap();
        assert!(v.pass, "{} -> {}, rise {}", v.initial, v.final_value, v.max_relative_rise);
        assert!(v.final_value < 1e-6);
    }

    #[test]
    fn equilibrium_stays_at_zero() {
        let traj = run(Nonlinearity::Zero, [0.5, 0.0], 0.5);
        let v = lyapunov_decrease_check(&traj, [5.0, 1.0, 5.0], &|_, _, _| 0.0, 0.5, unit(), &LyapunovTolerance::default()).unwrap();
        assert!(v.values.iter().all(|x| *x == 0.0));
        assert!(v.pass);
    }

    #[test]
    fn bounded_nonlinearity_decreases() {
        let f = Nonlinearity::SinTanh {
            a1: 1.0,
            a2: 1.0,
            l1: 1.0,
            l2: 1.0,
        };
        let traj = run(f, [-1.5, 2.0], 0.8);
        let v = lyapunov_decrease_check(&traj, [5.0, 1.0, 5.0], &|a, b, t| f.eval(a, b, t), 0.8, unit(), &LyapunovTolerance::default()).unwrap();
        assert!(v.pass, "{} -> {}, rise {}", v.initial, v.final_value, v.max_relative_rise);
    }

    #[test]
    fn linear_trials_all_converge() {
        let cfg = ConvergenceTrials {
            trials: 5,
            family: PlantFamily::Zero,
            ..Default::default()
        };
        let s = empirical_convergence(unit(), [5.0, 1.0, 5.0], &cfg, HarnessMode::Assert).unwrap();
        assert_eq!(s.pass_fraction, 1.0);
        assert_eq!(s.lyapunov_failures, 0);
    }

    #[test]
    fn non_member_is_refused_unless_falsifying() {
        let cfg = ConvergenceTrials {
            trials: 4,
            horizon: 10.0,
            ..Default::default()
        };
        let theta = [0.1, 1.0, 0.1];
        assert!(matches!(empirical_convergence(unit(), theta, &cfg, HarnessMode::Assert), Err(Error::NotMember(_))));
        let s = empirical_convergence(unit(), theta, &cfg, HarnessMode::Falsify).unwrap();
        assert!(!s.member);
        assert_eq!(s.trials, 4);
        assert!(s.outcomes.iter().all(|o| o.lyapunov_pass.is_none()));
    }
}
