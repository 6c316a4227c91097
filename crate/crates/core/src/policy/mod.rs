//! Offline part of the pipeline: dataset generation, the policy network and
//! the limits applied to its predictions.

mod clamp;
pub mod dataset;
pub mod network;
mod norm;
mod model;

pub use clamp::{clamp_update, ClampLimits, ClampOutcome};
pub use dataset::{generate_dataset, Dataset, PolicyRecord, SamplingConfig};
pub use model::{train, ModelMetadata, PolicyModel, TrainConfig, TrainOutcome, MODEL_FORMAT_VERSION};
pub use norm::NormStats;

/// Input and label standardization fitted on a record set.
pub fn fit_norm(records: &[PolicyRecord]) -> crate::Result<(NormStats, NormStats)> {
    let inputs: Vec<[f64; 4]> = records.iter().map(|r| r.indicators.to_array()).collect();
    let labels: Vec<[f64; 3]> = records.iter().map(|r| r.label).collect();
    Ok((NormStats::fit(&inputs)?, NormStats::fit(&labels)?))
}
