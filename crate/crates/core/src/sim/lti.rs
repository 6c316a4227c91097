//! Single-input single-output LTI plant descriptions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rational transfer function in `s`, coefficients in descending powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    numerator: Vec<f64>,
    denominator: Vec<f64>,
}

impl TransferFunction {
    /// Leading zeros of the numerator are stripped; the denominator must
    /// have a nonzero leading coefficient.
    pub fn new(numerator: Vec<f64>, denominator: Vec<f64>) -> Result<Self> {
        if denominator.is_empty() {
            return Err(Error::InvalidTransferFunction(
                "denominator has no coefficients".into(),
            ));
        }
        if denominator[0] == 0.0 {
            return Err(Error::InvalidTransferFunction(
                "denominator leading coefficient is zero".into(),
            ));
        }
        if numerator
            .iter()
            .chain(denominator.iter())
            .any(|c| !c.is_finite())
        {
            return Err(Error::InvalidTransferFunction(
                "non-finite coefficient".into(),
            ));
        }
        let first_nonzero = numerator.iter().position(|&c| c != 0.0);
        let numerator = match first_nonzero {
            Some(i) => numerator[i..].to_vec(),
            None => vec![0.0],
        };
        if numerator.len() > denominator.len() {
            return Err(Error::InvalidTransferFunction(format!(
                "non-proper: numerator degree {} exceeds denominator degree {}",
                numerator.len() - 1,
                denominator.len() - 1
            )));
        }
        Ok(Self {
            numerator,
            denominator,
        })
    }

    pub fn numerator(&self) -> &[f64] {
        &self.numerator
    }

    pub fn denominator(&self) -> &[f64] {
        &self.denominator
    }

    pub fn order(&self) -> usize {
        self.denominator.len() - 1
    }

    /// Value at `s = 0`, `None` for a pole at the origin.
    pub fn dc_gain(&self) -> Option<f64> {
        let den = *self.denominator.last().unwrap();
        if den == 0.0 {
            None
        } else {
            Some(*self.numerator.last().unwrap() / den)
        }
    }

    pub fn to_state_space(&self) -> StateSpace {
        tf_to_state_space(self)
    }
}

/// `x' = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub d: f64,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: DVector<f64>, d: f64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.len() != n || c.len() != n {
            return Err(Error::InvalidModel(format!(
                "inconsistent dimensions: A {}x{}, B {}, C {}",
                a.nrows(),
                a.ncols(),
                b.len(),
                c.len()
            )));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn output(&self, x: &[f64], u: f64) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum::<f64>() + self.d * u
    }

    /// Writes `A x + B u` into `dx`.
    pub fn derivative(&self, x: &[f64], u: f64, dx: &mut [f64]) {
        let n = self.order();
        for (i, dxi) in dx.iter_mut().enumerate().take(n) {
            let mut acc = self.b[i] * u;
            for (j, xj) in x.iter().enumerate().take(n) {
                acc += self.a[(i, j)] * xj;
            }
            *dxi = acc;
        }
    }
}

/// Controllable-canonical realization.
///
/// For `(b0 s^n + ... + bn) / (s^n + a1 s^(n-1) + ... + an)` (after
/// normalizing the denominator to be monic) the companion matrix has last
/// row `[-an, ..., -a1]`, `B = e_n`, `C = [bn - b0 an, ..., b1 - b0 a1]`
/// and `D = b0`. A zero-order denominator yields a pure gain with empty
/// dynamics.
pub fn tf_to_state_space(tf: &TransferFunction) -> StateSpace {
    let lead = tf.denominator[0];
    let den: Vec<f64> = tf.denominator.iter().map(|c| c / lead).collect();
    let n = den.len() - 1;
    let mut num = vec![0.0; n + 1 - tf.numerator.len()];
    num.extend(tf.numerator.iter().map(|c| c / lead));

    let d = num[0];
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        a[(i, i + 1)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    let mut c = DVector::zeros(n);
    if n > 0 {
        for j in 0..n {
            // column j multiplies s^j in the denominator
            a[(n - 1, j)] = -den[n - j];
            c[j] = num[n - j] - d * den[n - j];
        }
        b[n - 1] = 1.0;
    }
    StateSpace { a, b, c, d }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_order_lag_realization() {
        let tf = TransferFunction::new(vec![1.0], vec![1.0, 1.0]).unwrap();
        let ss = tf.to_state_space();
        assert_eq!(ss.a, DMatrix::from_row_slice(1, 1, &[-1.0]));
        assert_eq!(ss.b[0], 1.0);
        assert_eq!(ss.c[0], 1.0);
        assert_eq!(ss.d, 0.0);
    }

    #[test]
    fn circuit_model_companion_form() {
        let tf = TransferFunction::new(vec![8.0], vec![1.0, 0.878, 21.5]).unwrap();
        let ss = tf.to_state_space();
        assert_eq!(ss.a, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -21.5, -0.878]));
        assert_eq!(ss.b.as_slice(), &[0.0, 1.0]);
        assert_eq!(ss.c.as_slice(), &[8.0, 0.0]);
        assert_eq!(ss.d, 0.0);
    }

    #[test]
    fn biproper_cancellation_is_unit_feedthrough() {
        let tf = TransferFunction::new(vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let ss = tf.to_state_space();
        assert_eq!(ss.d, 1.0);
        assert_eq!(ss.c[0], 0.0);
    }

    #[test]
    fn rejects_non_proper() {
        let err = TransferFunction::new(vec![1.0, 0.0, 0.0], vec![1.0, 1.0]).unwrap_err();
        assert!(err.to_string().contains("non-proper"));
    }

    #[test]
    fn rejects_bad_denominator() {
        assert!(TransferFunction::new(vec![1.0], vec![]).is_err());
        assert!(TransferFunction::new(vec![1.0], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn leading_numerator_zeros_are_stripped() {
        let tf = TransferFunction::new(vec![0.0, 0.0, 2.0], vec![1.0, 3.0, 2.0]).unwrap();
        assert_eq!(tf.numerator(), &[2.0]);
        assert_eq!(tf.dc_gain(), Some(1.0));
    }

    #[test]
    fn pure_gain_has_empty_dynamics() {
        let tf = TransferFunction::new(vec![3.0], vec![2.0]).unwrap();
        let ss = tf.to_state_space();
        assert_eq!(ss.order(), 0);
        assert_eq!(ss.d, 1.5);
    }
}
