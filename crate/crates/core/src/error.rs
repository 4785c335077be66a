use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("duplicate entry at ({row}, {col})")]
    DuplicateEntry { row: usize, col: usize },

    #[error("negative value {value} at ({row}, {col})")]
    NegativeValue { row: usize, col: usize, value: f64 },

    #[error("nothing to normalize")]
    NothingToNormalize,

    #[error("no common tags; cross-domain linking impossible")]
    NoCommonTags,

    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("objective diverged (non-finite value at iteration {iteration})")]
    Diverged { iteration: usize },

    #[error("empty evaluation set")]
    EmptyEvalSet,

    #[error("no derivable relevance: all holdout counts are zero")]
    NoRelevance,

    #[error("too few nonzero differences for signed-rank test: {0} < 5")]
    TooFewDifferences(usize),

    #[error("user pool too small for a 60/20/20 split: {0} users")]
    UserPoolTooSmall(usize),

    #[error("{0}")]
    InvalidInput(String),

    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;
