use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid transfer function: {0}")]
    InvalidTransferFunction(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("trajectory diverged at t = {time:.6} s")]
    Diverged { time: f64 },

    #[error("response never reached 10% of its final value")]
    NoRise,

    #[error("dataset generation failed: {valid} valid records, {required} required ({discarded} discarded)")]
    DatasetTooSmall {
        valid: usize,
        required: usize,
        discarded: usize,
    },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("training failed: non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("non-finite input to policy network")]
    NonFiniteInput,

    #[error("learning failed: all {iterations} iterations diverged")]
    AllDiverged { iterations: usize },

    #[error("controller gains outside the stability manifold: {0}")]
    NotMember(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("declared Lipschitz bounds inconsistent: {0}")]
    LipschitzViolation(String),

    #[error("malformed report: {0}")]
    MalformedReport(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
