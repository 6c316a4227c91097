use nalgebra::{Matrix2, Matrix3};
use serde::{Deserialize, Serialize};

use super::LipschitzBounds;
use crate::error::{Error, Result};

/// Signed slack of the three region conditions; all must be positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionMargins {
    /// `θ1 - L1`.
    pub proportional: f64,
    /// `θ3 - L2`.
    pub derivative: f64,
    /// `((θ1-L1)(θ3-L2) - θ2) / sqrt(θ2(θ3+L2)) - L2`.
    pub coupling: f64,
}

impl RegionMargins {
    pub fn to_array(&self) -> [f64; 3] {
        [self.proportional, self.derivative, self.coupling]
    }

    pub fn all_positive(&self) -> bool {
        self.to_array().iter().all(|m| *m > 0.0)
    }

    pub fn smallest(&self) -> f64 {
        self.to_array().into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// Resolution and ranges of the `(l, p)` sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub points: usize,
    /// Range of `p(y) = θ1 - h(y)`; the worst case `[θ1-L1, θ1+L1]` when
    /// absent.
    pub p_range: Option<(f64, f64)>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            points: 101,
            p_range: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub points: usize,
    pub l_range: (f64, f64),
    pub p_range: (f64, f64),
    pub positive_definite: bool,
    pub min_lambda: f64,
    /// `(l, p)` where the smallest eigenvalue occurs.
    pub argmin: (f64, f64),
    /// Largest gap between the closed-form and the numerical eigenvalue.
    pub max_closed_form_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub gamma: f64,
    pub p0: f64,
    pub varpi0: f64,
    pub varpi1: f64,
    pub varpi: f64,
    pub m: [[f64; 3]; 3],
    pub m_minors: [f64; 3],
    pub m_eigenvalues: [f64; 3],
    pub m_positive_definite: bool,
    /// `ϖ0 - Γ`, `Γp0 - θ2` and `(Γp0 - θ2)(ϖ0 - Γ) - Γ²L2²/4`.
    pub conditions: [f64; 3],
    /// `4(Γϖ0 - θ2)(ϖ0 - Γ) - Γ²L2²`, an alternative form of the third
    /// condition. Reported only; it is not needed for `P ≻ 0`.
    pub alternative_third: f64,
    pub sweep: SweepSummary,
}

impl Certificate {
    pub fn holds(&self) -> bool {
        self.m_positive_definite && self.conditions.iter().all(|c| *c > 0.0) && self.sweep.positive_definite
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldReport {
    pub theta: [f64; 3],
    pub bounds: LipschitzBounds,
    pub member: bool,
    pub margins: RegionMargins,
    pub certificate: Option<Certificate>,
}

fn check_gains(theta: [f64; 3]) -> Result<()> {
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::Precondition(format!("non-finite gains {theta:?}")));
    }
    if !(theta[1] > 0.0) {
        return Err(Error::Precondition(format!("integral gain must be positive, got {}", theta[1])));
    }
    if !(theta[2] > 0.0) {
        return Err(Error::Precondition(format!("derivative gain must be positive, got {}", theta[2])));
    }
    Ok(())
}

pub fn region_margins(theta: [f64; 3], bounds: LipschitzBounds) -> Result<RegionMargins> {
    check_gains(theta)?;
    let [t1, t2, t3] = theta;
    let LipschitzBounds { l1, l2 } = bounds;
    Ok(RegionMargins {
        proportional: t1 - l1,
        derivative: t3 - l2,
        coupling: ((t1 - l1) * (t3 - l2) - t2) / (t2 * (t3 + l2)).sqrt() - l2,
    })
}

/// Membership of `theta` in the stability region, without the certificate.
pub fn manifold_membership(theta: [f64; 3], bounds: LipschitzBounds) -> Result<ManifoldReport> {
    let margins = region_margins(theta, bounds)?;
    Ok(ManifoldReport {
        theta,
        bounds,
        member: margins.all_positive(),
        margins,
        certificate: None,
    })
}

/// Smaller eigenvalue of `[[a, g], [g, d]]` in closed form.
pub fn lambda_min_closed_form(a: f64, g: f64, d: f64) -> f64 {
    0.5 * (a + d - ((a - d).powi(2) + 4.0 * g * g).sqrt())
}

fn lambda_min_numeric(a: f64, g: f64, d: f64) -> f64 {
    let e = Matrix2::new(a, g, g, d).symmetric_eigenvalues();
    e[0].min(e[1])
}

fn grid(lo: f64, hi: f64, n: usize, k: usize) -> f64 {
    if n <= 1 {
        lo
    } else {
        lo + (hi - lo) * k as f64 / (n - 1) as f64
    }
}

/// Membership plus the full certificate: `Γ`, the matrix `M` and its
/// positive definiteness, the three scalar conditions and the sweep of the
/// decay matrix `P(l, p)` over `l ∈ [-L2, L2]`, `p ∈ [p0, θ1+L1]`.
pub fn build_certificate(theta: [f64; 3], bounds: LipschitzBounds, sweep: &SweepConfig) -> Result<ManifoldReport> {
    let mut report = manifold_membership(theta, bounds)?;
    if !report.member {
        let m = report.margins;
        let failing = [("proportional", m.proportional), ("derivative", m.derivative), ("coupling", m.coupling)]
            .into_iter()
            .filter(|(_, v)| *v <= 0.0)
            .map(|(n, v)| format!("{n} margin {v:.6}"))
            .collect::<Vec<_>>()
            .join(", ");
        return Err(Error::NotMember(failing));
    }
    if sweep.points == 0 {
        return Err(Error::InvalidConfig("sweep needs at least one point".into()));
    }
    let [t1, t2, t3] = theta;
    let LipschitzBounds { l1, l2 } = bounds;
    let p0 = t1 - l1;
    let varpi0 = t3 - l2;
    let varpi1 = t3 + l2;
    let varpi = 0.5 * (varpi0 + varpi1);
    let gamma = (varpi0 * p0 + t2) / (2.0 * p0 + 0.5 * l2 * l2);

    let m = [
        [0.5 * gamma * t2, 0.5 * t2, 0.0],
        [0.5 * t2, 0.5 * (p0 + gamma * varpi), 0.5 * gamma],
        [0.0, 0.5 * gamma, 0.5],
    ];
    let mm = Matrix3::from_fn(|i, j| m[i][j]);
    let minors = [
        m[0][0],
        m[0][0] * m[1][1] - m[0][1] * m[1][0],
        mm.determinant(),
    ];
    let mut eig: Vec<f64> = mm.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    let by_minors = minors.iter().all(|v| *v > 0.0);
    let by_eigen = eig.iter().all(|v| *v > 0.0);
    if by_minors != by_eigen {
        return Err(Error::Precondition(format!(
            "minor and eigenvalue tests disagree for M: minors {minors:?}, eigenvalues {eig:?}"
        )));
    }

    let a = gamma * p0 - t2;
    let d = varpi0 - gamma;
    let conditions = [d, a, a * d - 0.25 * gamma * gamma * l2 * l2];
    let alternative_third = 4.0 * (gamma * varpi0 - t2) * (varpi0 - gamma) - gamma * gamma * l2 * l2;

    let (p_lo, p_hi) = sweep.p_range.unwrap_or((p0, t1 + l1));
    let n = sweep.points;
    let mut min_lambda = f64::INFINITY;
    let mut argmin = (0.0, p_lo);
    let mut max_err: f64 = 0.0;
    for i in 0..n {
        let l = grid(-l2, l2, n, i);
        let g = 0.5 * gamma * (t3 - varpi - l);
        let delta = t3 - gamma - l;
        for k in 0..n {
            let p = grid(p_lo, p_hi, n, k);
            let a = gamma * p - t2;
            let closed = lambda_min_closed_form(a, g, delta);
            let numeric = lambda_min_numeric(a, g, delta);
            max_err = max_err.max((closed - numeric).abs());
            if closed < min_lambda {
                min_lambda = closed;
                argmin = (l, p);
            }
        }
    }

    report.certificate = Some(Certificate {
        gamma,
        p0,
        varpi0,
        varpi1,
        varpi,
        m,
        m_minors: minors,
        m_eigenvalues: [eig[0], eig[1], eig[2]],
        m_positive_definite: by_minors,
        conditions,
        alternative_third,
        sweep: SweepSummary {
            points: n,
            l_range: (-l2, l2),
            p_range: (p_lo, p_hi),
            positive_definite: min_lambda > 0.0,
            min_lambda,
            argmin,
            max_closed_form_error: max_err,
        },
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn unit() -> LipschitzBounds {
        LipschitzBounds::new(1.0, 1.0).unwrap()
    }

    #[test]
    fn reference_member() {
        let r = manifold_membership([5.0, 1.0, 5.0], unit()).unwrap();
        assert!(r.member);
        assert_abs_diff_eq!(r.margins.coupling, 15.0 / 6f64.sqrt() - 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.margins.coupling, 5.124, epsilon = 1e-3);
    }

    #[test]
    fn boundary_and_outside() {
        assert!(!manifold_membership([1.0, 1.0, 5.0], unit()).unwrap().member);
        let r = manifold_membership([2.0, 10.0, 2.0], unit()).unwrap();
        assert!(!r.member);
        assert_abs_diff_eq!(r.margins.coupling + 1.0, -9.0 / 30f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn nonpositive_integral_gain_is_rejected() {
        assert!(matches!(manifold_membership([5.0, 0.0, 5.0], unit()), Err(Error::Precondition(_))));
    }

    #[test]
    fn reference_certificate() {
        let r = build_certificate([5.0, 1.0, 5.0], unit(), &SweepConfig::default()).unwrap();
        let c = r.certificate.unwrap();
        assert_abs_diff_eq!(c.gamma, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.varpi, 5.0, epsilon = 1e-12);
        let expected = [[1.0, 0.5, 0.0], [0.5, 7.0, 1.0], [0.0, 1.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(c.m[i][j], expected[i][j], epsilon = 1e-12);
            }
        }
        // det(½A) = det(A)/8 for 3x3, /4 for the 2x2 minor
        assert_abs_diff_eq!(c.m_minors[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.m_minors[1], 6.75, epsilon = 1e-12);
        assert_abs_diff_eq!(c.m_minors[2], 2.375, epsilon = 1e-12);
        assert_eq!(c.conditions, [2.0, 7.0, 13.0]);
        assert_abs_diff_eq!(c.alternative_third, 52.0, epsilon = 1e-12);
        assert!(c.holds());
    }

    #[test]
    fn decay_matrix_at_worst_corner() {
        // l = 0, p = p0 gives diag(7, 3)
        let gamma = 2.0;
        let a = gamma * 4.0 - 1.0;
        let g = 0.5 * gamma * (5.0 - 5.0 - 0.0);
        let d = 5.0 - gamma - 0.0;
        assert_abs_diff_eq!(lambda_min_closed_form(a, g, d), 3.0, epsilon = 1e-12);
        let s = SweepConfig {
            points: 1,
            p_range: Some((4.0, 4.0)),
        };
        let c = build_certificate([5.0, 1.0, 5.0], unit(), &s).unwrap().certificate.unwrap();
        // a single point lands at l = -L2
        assert!(c.sweep.min_lambda > 0.0);
    }

    #[test]
    fn non_member_is_refused() {
        let e = build_certificate([2.0, 10.0, 2.0], unit(), &SweepConfig::default()).unwrap_err();
        assert!(matches!(e, Error::NotMember(ref m) if m.contains("coupling")));
    }

    proptest! {
        #[test]
        fn closed_form_matches_eigensolve(a in -50.0f64..50.0, g in -50.0f64..50.0, d in -50.0f64..50.0) {
            let c = lambda_min_closed_form(a, g, d);
            let n = lambda_min_numeric(a, g, d);
            prop_assert!((c - n).abs() <= 1e-10 * (1.0 + c.abs()));
        }

        #[test]
        fn members_are_certified(
            l1 in 0.1f64..5.0, l2 in 0.1f64..5.0,
            t1 in 0.0f64..30.0, t2 in 0.01f64..30.0, t3 in 0.0f64..30.0,
        ) {
            let b = LipschitzBounds::new(l1, l2).unwrap();
            let r = manifold_membership([t1, t2, t3], b).unwrap();
            prop_assume!(r.member);
            let c = build_certificate([t1, t2, t3], b, &SweepConfig { points: 21, p_range: None })
                .unwrap()
                .certificate
                .unwrap();
            prop_assert!(c.holds(), "{c:?}");
        }

        #[test]
        fn margins_are_continuous(t1 in 1.0f64..30.0, t2 in 0.1f64..30.0, t3 in 1.0f64..30.0, dir in prop::array::uniform3(-1.0f64..1.0)) {
            let b = unit();
            let r = manifold_membership([t1, t2, t3], b).unwrap();
            prop_assume!(r.margins.smallest() > 1e-6);
            let moved = [t1 + 1e-9 * dir[0], t2 + 1e-9 * dir[1], t3 + 1e-9 * dir[2]];
            prop_assert!(manifold_membership(moved, b).unwrap().member);
        }
    }
}
