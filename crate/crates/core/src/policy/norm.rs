//! Per-column standardization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column means and scales. A column with no variation gets scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl NormStats {
    /// Fits population mean and standard deviation per column.
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyDataset)?;
        let width = first.as_ref().len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; width];
        for row in rows {
            let row = row.as_ref();
            if row.len() != width {
                return Err(Error::InvalidConfig("ragged rows".into()));
            }
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; width];
        for row in rows {
            for ((s, v), m) in var.iter_mut().zip(row.as_ref()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 * (1.0 + sd) && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn normalize(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn denormalize(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean.len() != self.scale.len() {
            return Err(Error::InvalidModel("norm stats width mismatch".into()));
        }
        if self.scale.iter().any(|s| !(*s > 0.0) || !s.is_finite()) || self.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidModel("norm scales must be positive and finite".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_column() {
        let stats = NormStats::fit(&[[1.0], [3.0]]).unwrap();
        assert_eq!(stats.mean, vec![2.0]);
        assert_eq!(stats.scale, vec![1.0]);
        assert_eq!(stats.normalize(&[1.0]), vec![-1.0]);
        assert_eq!(stats.normalize(&[3.0]), vec![1.0]);
    }

    #[test]
    fn constant_column_has_unit_scale() {
        let stats = NormStats::fit(&[[4.0, 1.0], [4.0, 2.0], [4.0, 6.0]]).unwrap();
        assert_eq!(stats.scale[0], 1.0);
        assert_eq!(stats.normalize(&[4.0, 3.0])[0], 0.0);
    }

    #[test]
    fn round_trip() {
        let rows = [[0.1, -3.0, 1e4], [0.7, 2.5, 3e4], [0.2, 0.0, -1e3]];
        let stats = NormStats::fit(&rows).unwrap();
        for r in rows {
            let back = stats.denormalize(&stats.normalize(&r));
            for (a, b) in back.iter().zip(r) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn empty_is_an_error() {
        let rows: [[f64; 2]; 0] = [];
        assert!(matches!(NormStats::fit(&rows), Err(Error::EmptyDataset)));
    }
}
