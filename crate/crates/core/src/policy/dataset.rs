//! Synthetic training data: step tests of gains sampled around an expert
//! controller, each labelled with the increment `K* - α·K`.

use std::io::{Read, Write};

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::{analyze_response, MetricConventions, PerfIndicators};
use crate::sim::{closed_loop_step, ControllerParams, Plant, SimConfig};

/// One training row: the measured indicators and the increment label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyRecord {
    pub indicators: PerfIndicators,
    pub label: [f64; 3],
}

impl PolicyRecord {
    pub fn to_array(&self) -> [f64; 7] {
        let i = self.indicators.to_array();
        [i[0], i[1], i[2], i[3], self.label[0], self.label[1], self.label[2]]
    }

    pub fn from_array(v: [f64; 7]) -> Self {
        Self {
            indicators: PerfIndicators::from_array([v[0], v[1], v[2], v[3]]),
            label: [v[4], v[5], v[6]],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// `K* - α·K`.
pub fn increment_label(expert: [f64; 3], gains: [f64; 3], alpha: f64) -> [f64; 3] {
    [0, 1, 2].map(|j| expert[j] - alpha * gains[j])
}

/// Multiplies field `j` of the record by `1 + deltas[j]`.
pub fn augment_record(record: &PolicyRecord, deltas: [f64; 7]) -> PolicyRecord {
    let mut v = record.to_array();
    for (x, d) in v.iter_mut().zip(deltas) {
        *x *= 1.0 + d;
    }
    PolicyRecord::from_array(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    /// Number of gain triples simulated.
    pub samples: usize,
    /// Gains are drawn log-uniformly from `[K*·lo, K*·hi]` per component.
    pub spread: (f64, f64),
    pub alpha: f64,
    /// Noisy copies added per simulated record.
    pub augment_count: usize,
    /// Half-width of the uniform multiplicative noise.
    pub augment_noise: f64,
    /// Fewer valid simulated records than this is an error.
    pub min_valid: usize,
    pub setpoint: f64,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            samples: 5000,
            spread: (0.25, 4.0),
            alpha: 0.1,
            augment_count: 1,
            augment_noise: 0.05,
            min_valid: 100,
            setpoint: 1.0,
            seed: 0,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.spread;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::InvalidConfig(format!("bad sampling spread ({lo}, {hi})")));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.augment_noise) {
            return Err(Error::InvalidConfig("augmentation noise must lie in [0, 1)".into()));
        }
        if self.samples == 0 || self.setpoint == 0.0 || !self.setpoint.is_finite() {
            return Err(Error::InvalidConfig("need at least one sample and a nonzero setpoint".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<PolicyRecord>,
    /// Simulated records before augmentation.
    pub valid: usize,
    pub diverged: usize,
    /// Non-diverged responses whose indicators could not be measured.
    pub unmeasurable: usize,
}

/// Samples gains around `expert`, simulates each closed loop and labels the
/// measured indicators. Every sampled controller keeps the expert's filter
/// coefficient. Simulations run in parallel; the result depends only on the
/// seed.
pub fn generate_dataset(
    expert: &ControllerParams,
    plant: &Plant,
    sim: &SimConfig,
    conventions: &MetricConventions,
    cfg: &SamplingConfig,
) -> Result<Dataset> {
    cfg.validate()?;
    expert.validate()?;
    sim.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi) = (cfg.spread.0.ln(), cfg.spread.1.ln());
    let k = expert.gains();
    let candidates: Vec<[f64; 3]> = (0..cfg.samples)
        .map(|_| {
            [0, 1, 2].map(|j| {
                let f = if hi > lo { rng.gen_range(lo..hi) } else { lo };
                k[j] * f.exp()
            })
        })
        .collect();

    #[derive(Clone, Copy)]
    enum Outcome {
        Ok(PolicyRecord),
        Diverged,
        Unmeasurable,
    }
    let outcomes: Vec<Outcome> = candidates
        .par_iter()
        .map(|gains| {
            let params = expert.with_gains(*gains);
            let traj = match closed_loop_step(plant, &params, cfg.setpoint, sim) {
                Ok(t) => t,
                Err(_) => return Outcome::Unmeasurable,
            };
            if traj.diverged {
                return Outcome::Diverged;
            }
            match analyze_response(&traj, cfg.setpoint, conventions) {
                Ok(r) if r.indicators.is_finite() => Outcome::Ok(PolicyRecord {
                    indicators: r.indicators,
                    label: increment_label(k, *gains, cfg.alpha),
                }),
                _ => Outcome::Unmeasurable,
            }
        })
        .collect();

    let mut base = Vec::with_capacity(outcomes.len());
    let (mut diverged, mut unmeasurable) = (0, 0);
    for (gains, o) in candidates.iter().zip(&outcomes) {
        match o {
            Outcome::Ok(r) => base.push(*r),
            Outcome::Diverged => {
                debug!("discarding diverged sample {gains:?}");
                diverged += 1;
            }
            Outcome::Unmeasurable => {
                debug!("discarding unmeasurable sample {gains:?}");
                unmeasurable += 1;
            }
        }
    }
    info!(
        "dataset: {} valid, {diverged} diverged, {unmeasurable} unmeasurable of {}",
        base.len(),
        cfg.samples
    );
    if base.len() < cfg.min_valid {
        return Err(Error::DatasetTooSmall {
            valid: base.len(),
            required: cfg.min_valid,
            discarded: diverged + unmeasurable,
        });
    }

    let valid = base.len();
    let mut records = Vec::with_capacity(valid * (1 + cfg.augment_count));
    let noise = cfg.augment_noise;
    for r in &base {
        records.push(*r);
        for _ in 0..cfg.augment_count {
            let deltas = [(); 7].map(|_| if noise > 0.0 { rng.gen_range(-noise..=noise) } else { 0.0 });
            records.push(augment_record(r, deltas));
        }
    }
    Ok(Dataset {
        records,
        valid,
        diverged,
        unmeasurable,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    phi_sigma: f64,
    phi_e: f64,
    phi_tr: f64,
    phi_ts: f64,
    dk1: f64,
    dk2: f64,
    dk3: f64,
}

pub fn write_csv<W: Write>(records: &[PolicyRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        let v = r.to_array();
        w.serialize(Row {
            phi_sigma: v[0],
            phi_e: v[1],
            phi_tr: v[2],
            phi_ts: v[3],
            dk1: v[4],
            dk2: v[5],
            dk3: v[6],
        })
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<PolicyRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in rdr.deserialize::<Row>() {
        let r = row.map_err(csv_error)?;
        let rec = PolicyRecord::from_array([r.phi_sigma, r.phi_e, r.phi_tr, r.phi_ts, r.dk1, r.dk2, r.dk3]);
        if !rec.is_finite() {
            return Err(Error::NonFiniteInput);
        }
        out.push(rec);
    }
    Ok(out)
}

fn csv_error(e: csv::Error) -> Error {
    Error::InvalidConfig(format!("dataset csv: {e}"))
}

/// SHA-256 of the dataset's CSV encoding.
pub fn dataset_hash(records: &[PolicyRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(records, &mut buf).expect("writing to memory cannot fail");
    hex::encode(Sha256::digest(&buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::TransferFunction;

    fn first_order() -> Plant {
        Plant::from_tf(&TransferFunction::new(vec![1.0], vec![1.0, 1.0]).unwrap())
    }

    #[test]
    fn label_from_initial_gains() {
        let label = increment_label([32.17, 18.6, 12.36], [90.0, 3.0, 1.0], 0.1);
        let expected = [23.17, 18.3, 12.26];
        for (a, b) in label.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(increment_label([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], 1.0), [0.0; 3]);
    }

    #[test]
    fn augmentation_scales_every_field() {
        let r = PolicyRecord::from_array([0.1, 0.01, 0.03, 0.02, 1.0, 1.0, 1.0]);
        let a = augment_record(&r, [0.05; 7]).to_array();
        let expected = [0.105, 0.0105, 0.0315, 0.021, 1.05, 1.05, 1.05];
        for (x, y) in a.iter().zip(expected) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn labels_match_identity_and_are_seeded() {
        let expert = ControllerParams::new(2.0, 1.0, 0.1, 100.0).unwrap();
        let sim = SimConfig::new(1e-3, 10.0);
        let cfg = SamplingConfig {
            samples: 40,
            augment_count: 0,
            min_valid: 10,
            seed: 5,
            ..Default::default()
        };
        let conv = MetricConventions::default();
        let a = generate_dataset(&expert, &first_order(), &sim, &conv, &cfg).unwrap();
        let b = generate_dataset(&expert, &first_order(), &sim, &conv, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), a.valid);
        for r in &a.records {
            // recover the sampled gains and check they sit inside the box
            for j in 0..3 {
                let gain = (expert.gains()[j] - r.label[j]) / cfg.alpha;
                let ratio = gain / expert.gains()[j];
                assert!(ratio >= 0.25 - 1e-9 && ratio <= 4.0 + 1e-9, "{ratio}");
            }
        }
    }

    #[test]
    fn too_few_valid_records() {
        let expert = ControllerParams::new(2.0, 1.0, 0.1, 100.0).unwrap();
        let cfg = SamplingConfig {
            samples: 5,
            min_valid: 10,
            ..Default::default()
        };
        let err = generate_dataset(
            &expert,
            &first_order(),
            &SimConfig::new(1e-3, 5.0),
            &MetricConventions::default(),
            &cfg,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DatasetTooSmall { valid: 5, required: 10, .. }));
    }

    #[test]
    fn csv_round_trip() {
        let records = vec![
            PolicyRecord::from_array([0.1, 0.01, 0.03, 0.02, 1.0, -2.0, 3.5]),
            PolicyRecord::from_array([0.0, -0.5, 1e-3, 2.0, 0.25, 0.0, 1e4]),
        ];
        let mut buf = Vec::new();
        write_csv(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("phi_sigma,phi_e,phi_tr,phi_ts,dk1,dk2,dk3\n"));
        assert_eq!(read_csv(buf.as_slice()).unwrap(), records);
        assert_eq!(dataset_hash(&records).len(), 64);
    }
}
