use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = SqrlError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SqrlError {
    #[error("invalid action {action} at step {step}: {reason}")]
    InvalidAction {
        step: usize,
        action: String,
        reason: String,
    },

    #[error("replay buffer holds {size} transitions, cannot sample a batch of {batch}")]
    Underfull { size: usize, batch: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("policy row {row} is not a probability distribution (sum {sum})")]
    NonStochastic { row: usize, sum: f64 },

    #[error("non-finite gradient entry at index {index}")]
    NonFiniteGradient { index: usize },

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("unknown baseline `{0}` (expected sqrl, sac or risk-sensitive)")]
    UnknownBaseline(String),

    #[error("missing checkpoint at {}", .0.display())]
    MissingCheckpoint(PathBuf),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SqrlError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SqrlError::Io {
            path: path.into(),
            source,
        }
    }
}
