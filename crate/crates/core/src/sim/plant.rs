//! Plants the closed loop can be wrapped around.
//!
//! Nonlinear plants have the form `x1' = x2`, `x2' = f(x1, x2, t) + w·u`
//! with `f(0, 0, ·) = 0` and partial derivatives bounded by `(L1, L2)`.

use serde::{Deserialize, Serialize};

use super::lti::{StateSpace, TransferFunction};
use crate::certifier::LipschitzBounds;
use crate::error::{Error, Result};

/// The bundled family of nonlinearities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Nonlinearity {
    /// `f ≡ 0`, a double integrator.
    Zero,
    /// `f = a1·L1·sin(x1) + a2·L2·tanh(x2)` with `|a1|, |a2| ≤ 1`.
    SinTanh { a1: f64, a2: f64, l1: f64, l2: f64 },
    /// `f = a1·L1·sin(x1) + L2·tanh(x2)·cos(ω t)`; time-varying in the rate
    /// term only, so `f(y, 0, t) = f(y, 0, 0)`.
    ModulatedDamping { a1: f64, l1: f64, l2: f64, omega: f64 },
    /// `f = k1·x1 + k2·x2`.
    Linear { k1: f64, k2: f64 },
}

impl Nonlinearity {
    pub fn eval(&self, x1: f64, x2: f64, t: f64) -> f64 {
        match *self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::SinTanh { a1, a2, l1, l2 } => a1 * l1 * x1.sin() + a2 * l2 * x2.tanh(),
            Nonlinearity::ModulatedDamping { a1, l1, l2, omega } => {
                a1 * l1 * x1.sin() + l2 * x2.tanh() * (omega * t).cos()
            }
            Nonlinearity::Linear { k1, k2 } => k1 * x1 + k2 * x2,
        }
    }

    /// Tight partial-derivative bounds over all of `R^2 × R+`.
    pub fn intrinsic_bounds(&self) -> (f64, f64) {
        match *self {
            Nonlinearity::Zero => (0.0, 0.0),
            Nonlinearity::SinTanh { a1, a2, l1, l2 } => ((a1 * l1).abs(), (a2 * l2).abs()),
            Nonlinearity::ModulatedDamping { a1, l1, l2, .. } => ((a1 * l1).abs(), l2.abs()),
            Nonlinearity::Linear { k1, k2 } => (k1.abs(), k2.abs()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearPlant {
    pub f: Nonlinearity,
    pub bounds: LipschitzBounds,
    /// Input gain; the certificate only covers `w = 1`.
    pub w: f64,
}

impl NonlinearPlant {
    pub fn new(f: Nonlinearity, bounds: LipschitzBounds, w: f64) -> Result<Self> {
        let plant = Self { f, bounds, w };
        plant.validate()?;
        Ok(plant)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w > 0.0) || !self.w.is_finite() {
            return Err(Error::InvalidModel(format!("input gain w must be positive, got {}", self.w)));
        }
        let at_origin = self.f.eval(0.0, 0.0, 0.0);
        if at_origin != 0.0 {
            return Err(Error::InvalidModel(format!("f(0, 0, 0) = {at_origin}, expected 0")));
        }
        let (l1, l2) = self.f.intrinsic_bounds();
        let tol = 1e-12;
        if l1 > self.bounds.l1 + tol || l2 > self.bounds.l2 + tol {
            return Err(Error::LipschitzViolation(format!(
                "nonlinearity needs ({l1}, {l2}) but declared ({}, {})",
                self.bounds.l1, self.bounds.l2
            )));
        }
        Ok(())
    }

    pub fn eval(&self, x1: f64, x2: f64, t: f64) -> f64 {
        self.f.eval(x1, x2, t)
    }
}

/// Worst finite-difference partials observed on a sampling grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzSpotCheck {
    pub max_df_dx1: f64,
    pub max_df_dx2: f64,
    pub within_bounds: bool,
}

/// Central-difference partials of `f` on an `n1 × n2 × nt` grid over
/// `[-extent, extent]^2 × [0, t_max]`.
pub fn spot_check_lipschitz(
    plant: &NonlinearPlant,
    extent: f64,
    t_max: f64,
    grid: (usize, usize, usize),
) -> LipschitzSpotCheck {
    let (n1, n2, nt) = grid;
    let axis = |i: usize, n: usize, lo: f64, hi: f64| {
        if n <= 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    };
    let eps = 1e-6;
    let mut max1: f64 = 0.0;
    let mut max2: f64 = 0.0;
    for i in 0..n1 {
        let x1 = axis(i, n1, -extent, extent);
        for j in 0..n2 {
            let x2 = axis(j, n2, -extent, extent);
            for k in 0..nt {
                let t = axis(k, nt, 0.0, t_max);
                let d1 = (plant.eval(x1 + eps, x2, t) - plant.eval(x1 - eps, x2, t)) / (2.0 * eps);
                let d2 = (plant.eval(x1, x2 + eps, t) - plant.eval(x1, x2 - eps, t)) / (2.0 * eps);
                max1 = max1.max(d1.abs());
                max2 = max2.max(d2.abs());
            }
        }
    }
    let tol = 1e-6;
    LipschitzSpotCheck {
        max_df_dx1: max1,
        max_df_dx2: max2,
        within_bounds: max1 <= plant.bounds.l1 + tol && max2 <= plant.bounds.l2 + tol,
    }
}

/// Anything the step-response loop can be closed around.
#[derive(Debug, Clone, PartialEq)]
pub enum Plant {
    Linear(StateSpace),
    Nonlinear(NonlinearPlant),
}

impl Plant {
    pub fn from_tf(tf: &TransferFunction) -> Self {
        Plant::Linear(tf.to_state_space())
    }
}

impl From<StateSpace> for Plant {
    fn from(ss: StateSpace) -> Self {
        Plant::Linear(ss)
    }
}

impl From<NonlinearPlant> for Plant {
    fn from(p: NonlinearPlant) -> Self {
        Plant::Nonlinear(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds(l1: f64, l2: f64) -> LipschitzBounds {
        LipschitzBounds::new(l1, l2).unwrap()
    }

    #[test]
    fn bundled_nonlinearities_respect_declared_bounds() {
        let cases = [
            Nonlinearity::Zero,
            Nonlinearity::SinTanh { a1: 1.0, a2: 1.0, l1: 1.0, l2: 1.0 },
            Nonlinearity::SinTanh { a1: -0.7, a2: 0.3, l1: 2.0, l2: 0.5 },
            Nonlinearity::ModulatedDamping { a1: 0.5, l1: 1.0, l2: 1.0, omega: 2.0 },
            Nonlinearity::Linear { k1: -1.0, k2: 0.5 },
        ];
        for f in cases {
            let plant = NonlinearPlant::new(f, bounds(2.0, 1.0), 1.0).unwrap();
            let check = spot_check_lipschitz(&plant, 5.0, 10.0, (50, 50, 5));
            assert!(check.within_bounds, "{f:?}: {check:?}");
        }
    }

    #[test]
    fn understated_bounds_are_rejected() {
        let f = Nonlinearity::SinTanh { a1: 1.0, a2: 1.0, l1: 2.0, l2: 1.0 };
        let err = NonlinearPlant::new(f, bounds(1.0, 1.0), 1.0).unwrap_err();
        assert!(matches!(err, Error::LipschitzViolation(_)));
    }

    #[test]
    fn input_gain_must_be_positive() {
        assert!(NonlinearPlant::new(Nonlinearity::Zero, bounds(1.0, 1.0), 0.0).is_err());
    }
}
