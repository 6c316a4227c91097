//! PID control law `u = θ1·e + θ2·∫e + θ3·ė` with a filtered derivative.
//!
//! The derivative term uses the first-order filter `N·s / (s + N)`. In
//! continuous time this is realized with a low-passed copy of the error,
//! `ef' = N (e - ef)`, and the derivative estimate is `N (e - ef)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gain triple plus derivative-filter coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub filter_n: f64,
}

impl ControllerParams {
    pub fn new(theta1: f64, theta2: f64, theta3: f64, filter_n: f64) -> Result<Self> {
        let p = Self {
            theta1,
            theta2,
            theta3,
            filter_n,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.filter_n > 0.0) || !self.filter_n.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "derivative filter coefficient must be positive and finite, got {}",
                self.filter_n
            )));
        }
        if !self.gains().iter().all(|g| g.is_finite()) {
            return Err(Error::InvalidConfig("controller gains must be finite".into()));
        }
        Ok(())
    }

    pub fn gains(&self) -> [f64; 3] {
        [self.theta1, self.theta2, self.theta3]
    }

    pub fn with_gains(&self, gains: [f64; 3]) -> Self {
        Self {
            theta1: gains[0],
            theta2: gains[1],
            theta3: gains[2],
            filter_n: self.filter_n,
        }
    }
}

/// Internal state of the sampled controller.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PidState {
    pub integral: f64,
    pub filtered_error: f64,
    pub last_error: Option<f64>,
}

/// One sample of the discrete PID law.
///
/// Each call represents one sample spaced `h` after the previous call. The
/// integral advances by the trapezoidal rule between the previous and the
/// current error (the first call contributes nothing). The derivative filter
/// is discretized with backward Euler,
/// `ef[k] = (ef[k-1] + h N e[k]) / (1 + h N)`, which is unconditionally
/// stable for any `h N`.
pub fn pid_control(gains: &ControllerParams, e: f64, state: &PidState, h: f64) -> (f64, PidState) {
    debug_assert!(h > 0.0);
    let n = gains.filter_n;
    let integral = match state.last_error {
        Some(prev) => state.integral + 0.5 * h * (prev + e),
        None => state.integral,
    };
    let filtered_error = (state.filtered_error + h * n * e) / (1.0 + h * n);
    let derivative = n * (e - filtered_error);
    let u = gains.theta1 * e + gains.theta2 * integral + gains.theta3 * derivative;
    (
        u,
        PidState {
            integral,
            filtered_error,
            last_error: Some(e),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(t1: f64, t2: f64, t3: f64, n: f64) -> ControllerParams {
        ControllerParams::new(t1, t2, t3, n).unwrap()
    }

    #[test]
    fn pure_proportional() {
        let (u, _) = pid_control(&params(1.0, 0.0, 0.0, 100.0), 0.5, &PidState::default(), 1e-3);
        assert_eq!(u, 0.5);
    }

    #[test]
    fn unit_integral_of_constant_error() {
        let g = params(0.0, 1.0, 0.0, 100.0);
        let h = 1e-4;
        let mut state = PidState::default();
        let mut u = 0.0;
        for _ in 0..=10_000 {
            let (uk, next) = pid_control(&g, 1.0, &state, h);
            u = uk;
            state = next;
        }
        assert!((u - 1.0).abs() < 1e-9, "u(1) = {u}");
    }

    #[test]
    fn filtered_derivative_of_ramp() {
        // Continuous response of N s/(s+N) to e = t is 1 - exp(-N t).
        let n = 100.0;
        let g = params(0.0, 0.0, 1.0, n);
        let h = 1e-5;
        let mut state = PidState::default();
        let mut worst: f64 = 0.0;
        for k in 0..=10_000 {
            let t = k as f64 * h;
            let (u, next) = pid_control(&g, t, &state, h);
            state = next;
            let exact = 1.0 - (-n * t).exp();
            worst = worst.max((u - exact).abs());
        }
        assert!(worst < 2e-3, "max deviation {worst}");
        let (u_end, _) = pid_control(&g, 0.1 + h, &state, h);
        assert!((u_end - 1.0).abs() < 1e-3);
    }

    #[test]
    fn rejects_nonpositive_filter() {
        assert!(ControllerParams::new(1.0, 1.0, 1.0, 0.0).is_err());
        assert!(ControllerParams::new(1.0, f64::NAN, 1.0, 10.0).is_err());
    }
}
