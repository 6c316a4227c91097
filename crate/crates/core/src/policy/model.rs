//! The trained policy: indicator vector in, gain increment out.

use std::path::Path;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{dataset_hash, PolicyRecord};
use super::network::{Adam, AdamParams, Mlp};
use super::norm::NormStats;
use crate::error::{Error, Result};
use crate::metrics::PerfIndicators;
use crate::sim::ControllerParams;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamParams,
    pub validation_fraction: f64,
    pub min_records: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            epochs: 200,
            batch_size: 32,
            adam: AdamParams::default(),
            validation_fraction: 0.2,
            min_records: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub seed: u64,
    pub epochs: usize,
    pub train_records: usize,
    pub validation_records: usize,
    /// Mean squared error per output in label units.
    pub train_mse: f64,
    pub validation_mse: f64,
    /// Largest absolute residual over the training split, per output.
    pub train_max_residual: [f64; 3],
    pub dataset_sha256: String,
    /// Expert controller and learning rate the labels were built from.
    pub expert: Option<ControllerParams>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyModel {
    pub format_version: u32,
    pub layer_sizes: Vec<usize>,
    pub network: Mlp,
    pub input_norm: NormStats,
    pub output_norm: NormStats,
    pub metadata: ModelMetadata,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: PolicyModel,
    /// Full-pass training loss (normalized units) after each epoch.
    pub loss_history: Vec<f64>,
}

fn split_rows(records: &[PolicyRecord]) -> (Vec<[f64; 4]>, Vec<[f64; 3]>) {
    records.iter().map(|r| (r.indicators.to_array(), r.label)).unzip()
}

/// Trains a fresh network on `records`. The records are shuffled with the
/// seed, split into training and validation parts, and standardized with
/// statistics of the training part.
pub fn train(records: &[PolicyRecord], cfg: &TrainConfig) -> Result<TrainOutcome> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if records.len() < cfg.min_records {
        return Err(Error::DatasetTooSmall {
            valid: records.len(),
            required: cfg.min_records,
            discarded: 0,
        });
    }
    if records.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    if !(0.0..1.0).contains(&cfg.validation_fraction) || cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(Error::InvalidConfig("bad training configuration".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((records.len() as f64) * cfg.validation_fraction).round() as usize;
    let n_val = n_val.min(records.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let train_set: Vec<PolicyRecord> = train_idx.iter().map(|&i| records[i]).collect();
    let val_set: Vec<PolicyRecord> = val_idx.iter().map(|&i| records[i]).collect();

    let (xs, ys) = split_rows(&train_set);
    let input_norm = NormStats::fit(&xs)?;
    let output_norm = NormStats::fit(&ys)?;
    let xn: Vec<Vec<f64>> = xs.iter().map(|x| input_norm.normalize(x)).collect();
    let yn: Vec<Vec<f64>> = ys.iter().map(|y| output_norm.normalize(y)).collect();

    let mut sizes = vec![4];
    sizes.extend(&cfg.hidden);
    sizes.push(3);
    let mut net = Mlp::random(&sizes, &mut rng)?;
    let mut opt = Adam::new(&net, cfg.adam);
    let all_x: Vec<&[f64]> = xn.iter().map(|v| v.as_slice()).collect();
    let all_y: Vec<&[f64]> = yn.iter().map(|v| v.as_slice()).collect();
    let mut idx: Vec<usize> = (0..xn.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        idx.shuffle(&mut rng);
        for batch in idx.chunks(cfg.batch_size) {
            let bx: Vec<&[f64]> = batch.iter().map(|&i| all_x[i]).collect();
            let by: Vec<&[f64]> = batch.iter().map(|&i| all_y[i]).collect();
            let (loss, grad) = net.loss_and_gradient(&bx, &by);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            opt.step(&mut net, &grad);
        }
        let loss = net.loss(&all_x, &all_y);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        history.push(loss);
    }

    let mut model = PolicyModel {
        format_version: MODEL_FORMAT_VERSION,
        layer_sizes: sizes,
        network: net,
        input_norm,
        output_norm,
        metadata: ModelMetadata {
            seed: cfg.seed,
            epochs: cfg.epochs,
            train_records: train_set.len(),
            validation_records: val_set.len(),
            train_mse: 0.0,
            validation_mse: 0.0,
            train_max_residual: [0.0; 3],
            dataset_sha256: dataset_hash(records),
            expert: None,
            alpha: None,
        },
    };
    let (train_mse, train_max) = model.residuals(&train_set);
    let (val_mse, _) = model.residuals(&val_set);
    model.metadata.train_mse = train_mse;
    model.metadata.validation_mse = if val_set.is_empty() { train_mse } else { val_mse };
    model.metadata.train_max_residual = train_max;
    info!(
        "trained {:?} for {} epochs: train mse {train_mse:.3e}, validation mse {:.3e}",
        model.layer_sizes, cfg.epochs, model.metadata.validation_mse
    );
    Ok(TrainOutcome {
        model,
        loss_history: history,
    })
}

impl PolicyModel {
    /// Raw, unclamped increment estimate.
    pub fn predict(&self, ind: &PerfIndicators) -> Result<[f64; 3]> {
        if !ind.is_finite() {
            return Err(Error::NonFiniteInput);
        }
        let x = self.input_norm.normalize(&ind.to_array());
        let y = self.output_norm.denormalize(&self.network.forward(&x));
        Ok([y[0], y[1], y[2]])
    }

    /// Mean squared error per output and worst absolute residual per output.
    pub fn residuals(&self, records: &[PolicyRecord]) -> (f64, [f64; 3]) {
        let mut sum = 0.0;
        let mut worst = [0.0f64; 3];
        for r in records {
            let p = self.predict(&r.indicators).unwrap_or([f64::NAN; 3]);
            for j in 0..3 {
                let d = p[j] - r.label[j];
                sum += d * d;
                worst[j] = worst[j].max(d.abs());
            }
        }
        (sum / (3 * records.len().max(1)) as f64, worst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidModel(format!(
                "unsupported model format version {}",
                self.format_version
            )));
        }
        self.network.validate()?;
        if self.network.sizes() != self.layer_sizes {
            return Err(Error::InvalidModel("layer sizes do not match the network".into()));
        }
        if self.network.input_dim() != 4 || self.network.output_dim() != 3 {
            return Err(Error::InvalidModel(format!(
                "expected 4 inputs and 3 outputs, got {:?}",
                self.layer_sizes
            )));
        }
        self.input_norm.validate()?;
        self.output_norm.validate()?;
        if self.input_norm.width() != 4 || self.output_norm.width() != 3 {
            return Err(Error::InvalidModel("norm stats width mismatch".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn affine_dataset(n: usize, noise: f64, seed: u64) -> Vec<PolicyRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map = [[1.0, -2.0, 0.5, 0.3], [0.2, 0.1, -1.0, 2.0], [-0.7, 0.4, 0.9, -0.1]];
        let offset = [0.5, -1.0, 2.0];
        (0..n)
            .map(|_| {
                let x: [f64; 4] = [(); 4].map(|_| rng.gen_range(-1.0..1.0));
                let y = [0, 1, 2].map(|j| {
                    let lin: f64 = map[j].iter().zip(x).map(|(a, b)| a * b).sum();
                    lin + offset[j] + if noise > 0.0 { rng.gen_range(-noise..noise) } else { 0.0 }
                });
                PolicyRecord {
                    indicators: PerfIndicators::from_array(x),
                    label: y,
                }
            })
            .collect()
    }

    #[test]
    fn learns_affine_map() {
        let records = affine_dataset(600, 1e-3, 1);
        let cfg = TrainConfig {
            epochs: 150,
            seed: 2,
            ..Default::default()
        };
        let out = train(&records, &cfg).unwrap();
        assert!(out.model.metadata.validation_mse <= 1e-2, "{:?}", out.model.metadata);
    }

    #[test]
    fn loss_is_non_increasing_on_noiseless_affine_data() {
        let records = affine_dataset(400, 0.0, 3);
        let cfg = TrainConfig {
            epochs: 60,
            seed: 4,
            ..Default::default()
        };
        let out = train(&records, &cfg).unwrap();
        for w in out.loss_history.windows(2) {
            assert!(w[1] <= w[0] * 1.01, "loss rose from {} to {}", w[0], w[1]);
        }
        assert!(out.loss_history.last().unwrap() < &out.loss_history[0]);
    }

    #[test]
    fn memorizes_a_duplicated_record() {
        let r = PolicyRecord::from_array([0.05, 0.01, 0.03, 0.2, 3.0, -1.5, 0.7]);
        let records = vec![r; 120];
        let cfg = TrainConfig {
            epochs: 100,
            seed: 9,
            ..Default::default()
        };
        let model = train(&records, &cfg).unwrap().model;
        let p = model.predict(&r.indicators).unwrap();
        for j in 0..3 {
            assert!((p[j] - r.label[j]).abs() < 1e-3, "{p:?}");
        }
    }

    #[test]
    fn same_seed_same_weights() {
        let records = affine_dataset(200, 1e-3, 5);
        let cfg = TrainConfig {
            epochs: 10,
            seed: 6,
            ..Default::default()
        };
        let a = train(&records, &cfg).unwrap().model;
        let b = train(&records, &cfg).unwrap().model;
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let c = train(&records, &TrainConfig { seed: 7, ..cfg }).unwrap().model;
        assert_ne!(a.network, c.network);
    }

    #[test]
    fn predictions_on_training_rows_are_within_reported_residual() {
        let records = affine_dataset(300, 1e-3, 8);
        let model = train(&records, &TrainConfig { epochs: 40, validation_fraction: 0.0, ..Default::default() })
            .unwrap()
            .model;
        for r in &records {
            let p = model.predict(&r.indicators).unwrap();
            for j in 0..3 {
                assert!((p[j] - r.label[j]).abs() <= model.metadata.train_max_residual[j] + 1e-12);
            }
        }
    }

    #[test]
    fn json_round_trip_and_version_check() {
        let records = affine_dataset(150, 1e-3, 10);
        let model = train(&records, &TrainConfig { epochs: 2, ..Default::default() }).unwrap().model;
        let text = model.to_json().unwrap();
        assert_eq!(PolicyModel::from_json(&text).unwrap(), model);
        let bumped = text.replace("\"format_version\": 1", "\"format_version\": 99");
        assert!(PolicyModel::from_json(&bumped).is_err());
    }

    #[test]
    fn rejects_small_and_non_finite_inputs() {
        let records = affine_dataset(50, 0.0, 1);
        assert!(matches!(train(&records, &TrainConfig::default()), Err(Error::DatasetTooSmall { .. })));
        let model = train(&affine_dataset(150, 0.0, 1), &TrainConfig { epochs: 1, ..Default::default() })
            .unwrap()
            .model;
        let bad = PerfIndicators::new(f64::NAN, 0.0, 0.0, 0.0);
        assert!(matches!(model.predict(&bad), Err(Error::NonFiniteInput)));
    }
}
