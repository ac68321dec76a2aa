use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the library and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("transition row (s={state}, a={action}, t={step}) is not a distribution: {reason}")]
    InvalidTransition {
        state: usize,
        action: usize,
        step: usize,
        reason: String,
    },

    #[error("reward (s={state}, a={action}, t={step}) has mean {mean} outside [0, 1]")]
    InvalidReward {
        state: usize,
        action: usize,
        step: usize,
        mean: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("inconsistent visit counters: {0}")]
    InconsistentCounters(String),

    #[error("trajectory index out of range: {0}")]
    OutOfRange(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown bound kind `{0}`")]
    UnknownBound(String),

    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
