//! Limits on predicted increments and on the gains they produce.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClampLimits {
    /// Largest allowed `|Δθ_j|` per update.
    pub max_increment: [f64; 3],
    /// Optional `(min, max)` box for each resulting gain.
    pub gain_box: Option<[(f64, f64); 3]>,
}

impl ClampLimits {
    pub fn new(max_increment: [f64; 3], gain_box: Option<[(f64, f64); 3]>) -> Result<Self> {
        let limits = Self {
            max_increment,
            gain_box,
        };
        limits.validate()?;
        Ok(limits)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_increment.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::InvalidConfig("increment limits must be positive".into()));
        }
        if let Some(b) = self.gain_box {
            if b.iter().any(|(lo, hi)| !(lo <= hi) || lo.is_nan()) {
                return Err(Error::InvalidConfig("gain box needs min <= max".into()));
            }
        }
        Ok(())
    }

    pub fn contains(&self, gains: [f64; 3]) -> bool {
        match self.gain_box {
            Some(b) => (0..3).all(|j| gains[j] >= b[j].0 - slack(b[j].0) && gains[j] <= b[j].1 + slack(b[j].1)),
            None => true,
        }
    }
}

/// Round-off allowance when comparing a gain against a box edge.
fn slack(edge: f64) -> f64 {
    1e-12 * edge.abs().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClampOutcome {
    pub delta: [f64; 3],
    /// Components cut by the increment limit.
    pub increment_clips: usize,
    /// Components cut by the gain box.
    pub box_clips: usize,
}

/// Clips each component to `±max_increment`, then shrinks it so that
/// `current + delta` stays inside the gain box.
pub fn clamp_update(raw: [f64; 3], limits: &ClampLimits, current: [f64; 3]) -> ClampOutcome {
    let mut delta = [0.0; 3];
    let mut increment_clips = 0;
    let mut box_clips = 0;
    for j in 0..3 {
        let m = limits.max_increment[j];
        let mut d = if raw[j].is_nan() { 0.0 } else { raw[j] };
        if d.abs() > m {
            d = d.clamp(-m, m);
            increment_clips += 1;
        }
        if let Some(b) = limits.gain_box {
            let (lo, hi) = b[j];
            let target = current[j] + d;
            if target < lo - slack(lo) || target > hi + slack(hi) {
                d = target.clamp(lo, hi) - current[j];
                box_clips += 1;
            }
        }
        delta[j] = d;
    }
    ClampOutcome {
        delta,
        increment_clips,
        box_clips,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn saturates_large_increments() {
        let l = ClampLimits::new([10.0; 3], None).unwrap();
        let out = clamp_update([100.0, 0.0, 0.0], &l, [1.0; 3]);
        assert_eq!(out.delta, [10.0, 0.0, 0.0]);
        assert_eq!(out.increment_clips, 1);
    }

    #[test]
    fn small_increments_pass_through() {
        let l = ClampLimits::new([10.0; 3], None).unwrap();
        let out = clamp_update([1.0, -2.0, 3.0], &l, [1.0; 3]);
        assert_eq!(out.delta, [1.0, -2.0, 3.0]);
        assert_eq!(out.increment_clips + out.box_clips, 0);
    }

    #[test]
    fn box_floor_limits_decrease() {
        let l = ClampLimits::new([10.0; 3], Some([(1.0, 100.0); 3])).unwrap();
        let out = clamp_update([-5.0, 0.0, 0.0], &l, [2.0, 5.0, 5.0]);
        assert_eq!(out.delta[0], -1.0);
        assert_eq!(out.box_clips, 1);
    }

    proptest! {
        #[test]
        fn stays_in_box_and_is_idempotent(
            raw in prop::array::uniform3(-1e3f64..1e3),
            frac in prop::array::uniform3(0.0f64..1.0),
            max in prop::array::uniform3(0.1f64..50.0),
        ) {
            let b = [(0.5, 200.0), (0.0, 80.0), (0.1, 60.0)];
            let l = ClampLimits::new(max, Some(b)).unwrap();
            let current = [0, 1, 2].map(|j| b[j].0 + frac[j] * (b[j].1 - b[j].0));
            let out = clamp_update(raw, &l, current);
            let next = [0, 1, 2].map(|j| current[j] + out.delta[j]);
            prop_assert!(l.contains(next));
            for j in 0..3 {
                prop_assert!(out.delta[j].abs() <= max[j] + 1e-12);
            }
            let again = clamp_update(out.delta, &l, current);
            prop_assert_eq!(again.delta, out.delta);
        }
    }
}
