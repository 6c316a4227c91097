//! Fixed-step simulation of step responses under the PID law.

mod integrate;
pub mod lti;
pub mod pid;
pub mod plant;
pub mod plant_file;

use serde::{Deserialize, Serialize};

pub use integrate::Rk4;
pub use lti::{tf_to_state_space, StateSpace, TransferFunction};
pub use pid::{pid_control, ControllerParams, PidState};
pub use plant::{spot_check_lipschitz, LipschitzSpotCheck, NonlinearPlant, Nonlinearity, Plant};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Integration step in seconds.
    pub step: f64,
    /// Simulated horizon in seconds.
    pub horizon: f64,
    /// Divergence threshold as a multiple of `|y*|` (or of 1 when `y* = 0`).
    pub divergence_bound: f64,
    /// Initial plant state; zeros when absent.
    #[serde(default)]
    pub initial_state: Option<Vec<f64>>,
}

impl SimConfig {
    pub fn new(step: f64, horizon: f64) -> Self {
        Self {
            step,
            horizon,
            divergence_bound: 10.0,
            initial_state: None,
        }
    }

    pub fn with_initial_state(mut self, x0: Vec<f64>) -> Self {
        self.initial_state = Some(x0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::InvalidConfig(format!("step must be positive, got {}", self.step)));
        }
        if !(self.horizon >= 10.0 * self.step) || !self.horizon.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "horizon {} must cover at least 10 steps of {}",
                self.horizon, self.step
            )));
        }
        if !(self.divergence_bound > 1.0) {
            return Err(Error::InvalidConfig(format!(
                "divergence bound must exceed 1, got {}",
                self.divergence_bound
            )));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.step).round() as usize
    }

    /// Same horizon at half the step, for Richardson-style checks.
    pub fn halved(&self) -> Self {
        Self {
            step: self.step / 2.0,
            ..self.clone()
        }
    }
}

/// Sampled response on a uniform grid `t_k = k·h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub step: f64,
    pub reference: f64,
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    state_dim: usize,
    states: Vec<f64>,
    pub diverged: bool,
}

impl Trajectory {
    fn with_capacity(step: f64, reference: f64, state_dim: usize, samples: usize) -> Self {
        Self {
            step,
            reference,
            t: Vec::with_capacity(samples),
            y: Vec::with_capacity(samples),
            u: Vec::with_capacity(samples),
            state_dim,
            states: Vec::with_capacity(samples * state_dim),
            diverged: false,
        }
    }

    fn push(&mut self, t: f64, y: f64, u: f64, x: &[f64]) {
        self.t.push(t);
        self.y.push(y);
        self.u.push(u);
        self.states.extend_from_slice(x);
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.state_dim..(k + 1) * self.state_dim]
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn horizon(&self) -> f64 {
        self.t.last().copied().unwrap_or(0.0)
    }

    /// Max-abs difference on `y` against a trajectory sampled at half the
    /// step (every other sample of `fine` lines up with `self`).
    pub fn max_abs_diff_half_step(&self, fine: &Trajectory) -> f64 {
        self.y
            .iter()
            .enumerate()
            .filter_map(|(k, y)| fine.y.get(2 * k).map(|yf| (y - yf).abs()))
            .fold(0.0, f64::max)
    }

    /// CSV with header `t,y,u,x1,x2,...`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header = String::from("t,y,u");
        for i in 1..=self.state_dim {
            header.push_str(&format!(",x{i}"));
        }
        writeln!(out, "{header}")?;
        for k in 0..self.len() {
            write!(out, "{},{},{}", self.t[k], self.y[k], self.u[k])?;
            for x in self.state(k) {
                write!(out, ",{x}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn divergence_limit(cfg: &SimConfig, reference: f64) -> f64 {
    let scale = if reference != 0.0 { reference.abs() } else { 1.0 };
    cfg.divergence_bound * scale
}

fn initial_plant_state(cfg: &SimConfig, n: usize) -> Result<Vec<f64>> {
    match &cfg.initial_state {
        None => Ok(vec![0.0; n]),
        Some(x0) if x0.len() == n => Ok(x0.clone()),
        Some(x0) => Err(Error::InvalidConfig(format!(
            "initial state has {} entries, plant has {} states",
            x0.len(),
            n
        ))),
    }
}

/// Unit-negative-feedback step response of `plant` under the PID law.
///
/// Linear plants carry two controller states after the plant states:
/// `[x.., ∫e, ef]`. Nonlinear plants are delegated to
/// [`simulate_nonlinear`].
pub fn closed_loop_step(
    plant: &Plant,
    gains: &ControllerParams,
    ystar: f64,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    match plant {
        Plant::Linear(ss) => simulate_linear(ss, gains, ystar, cfg),
        Plant::Nonlinear(p) => {
            let x0 = initial_plant_state(cfg, 2)?;
            simulate_nonlinear(p, gains, ystar, [x0[0], x0[1]], cfg)
        }
    }
}

fn simulate_linear(
    ss: &StateSpace,
    gains: &ControllerParams,
    ystar: f64,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    gains.validate()?;
    let n = ss.order();
    let (kp, ki, kd, nf) = (gains.theta1, gains.theta2, gains.theta3, gains.filter_n);
    // u = kp e + ki xi + kd nf (e - ef), y = Cx + D u, e = y* - y
    let direct = kp + kd * nf;
    let denom = 1.0 + direct * ss.d;
    if denom == 0.0 {
        return Err(Error::InvalidModel("algebraic loop is singular".into()));
    }
    let signals = |x: &[f64]| {
        let cx: f64 = ss.c.iter().zip(&x[..n]).map(|(c, x)| c * x).sum();
        let u = (direct * (ystar - cx) + ki * x[n] - kd * nf * x[n + 1]) / denom;
        let y = cx + ss.d * u;
        (y, u)
    };
    let mut rhs = |_t: f64, x: &[f64], dx: &mut [f64]| {
        let (y, u) = signals(x);
        let e = ystar - y;
        ss.derivative(&x[..n], u, &mut dx[..n]);
        dx[n] = e;
        dx[n + 1] = nf * (e - x[n + 1]);
    };

    let mut x = initial_plant_state(cfg, n)?;
    x.extend([0.0, 0.0]);
    let steps = cfg.steps();
    let limit = divergence_limit(cfg, ystar);
    let mut traj = Trajectory::with_capacity(cfg.step, ystar, n + 2, steps + 1);
    let mut rk = Rk4::new(n + 2);
    let (y0, u0) = signals(&x);
    traj.push(0.0, y0, u0, &x);
    for k in 0..steps {
        let t = k as f64 * cfg.step;
        rk.step(&mut rhs, t, &mut x, cfg.step);
        let (y, u) = signals(&x);
        traj.push((k + 1) as f64 * cfg.step, y, u, &x);
        if !y.is_finite() || !u.is_finite() || y.abs() > limit || x.iter().any(|v| !v.is_finite()) {
            traj.diverged = true;
            break;
        }
    }
    Ok(traj)
}

/// Step response of `x1' = x2`, `x2' = f(x1, x2, t) + w·u`.
///
/// The plant exposes `x2 = x1'` directly, so the derivative term uses the
/// exact `ė = -x2` and the filter coefficient is not used. States are
/// `[x1, x2, ∫e]`.
pub fn simulate_nonlinear(
    plant: &NonlinearPlant,
    gains: &ControllerParams,
    ystar: f64,
    x0: [f64; 2],
    cfg: &SimConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    gains.validate()?;
    plant.validate()?;
    let [t1, t2, t3] = gains.gains();
    let control = |x: &[f64]| t1 * (ystar - x[0]) + t2 * x[2] - t3 * x[1];
    let mut rhs = |t: f64, x: &[f64], dx: &mut [f64]| {
        let u = control(x);
        dx[0] = x[1];
        dx[1] = plant.eval(x[0], x[1], t) + plant.w * u;
        dx[2] = ystar - x[0];
    };

    let mut x = vec![x0[0], x0[1], 0.0];
    let steps = cfg.steps();
    let limit = divergence_limit(cfg, ystar);
    let mut traj = Trajectory::with_capacity(cfg.step, ystar, 3, steps + 1);
    let mut rk = Rk4::new(3);
    traj.push(0.0, x[0], control(&x), &x);
    for k in 0..steps {
        let t = k as f64 * cfg.step;
        rk.step(&mut rhs, t, &mut x, cfg.step);
        let u = control(&x);
        traj.push((k + 1) as f64 * cfg.step, x[0], u, &x);
        if x.iter().any(|v| !v.is_finite()) || !u.is_finite() || x[0].abs() > limit {
            traj.diverged = true;
            break;
        }
    }
    Ok(traj)
}

/// Open-loop response to a step of the given amplitude.
pub fn open_loop_step(ss: &StateSpace, amplitude: f64, cfg: &SimConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let n = ss.order();
    let mut x = initial_plant_state(cfg, n)?;
    let steps = cfg.steps();
    let limit = divergence_limit(cfg, amplitude);
    let mut traj = Trajectory::with_capacity(cfg.step, amplitude, n, steps + 1);
    let mut rk = Rk4::new(n);
    let mut rhs = |_t: f64, x: &[f64], dx: &mut [f64]| ss.derivative(x, amplitude, dx);
    traj.push(0.0, ss.output(&x, amplitude), amplitude, &x);
    for k in 0..steps {
        rk.step(&mut rhs, k as f64 * cfg.step, &mut x, cfg.step);
        let y = ss.output(&x, amplitude);
        traj.push((k + 1) as f64 * cfg.step, y, amplitude, &x);
        if !y.is_finite() || y.abs() > limit {
            traj.diverged = true;
            break;
        }
    }
    Ok(traj)
}
