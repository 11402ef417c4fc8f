use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "flight-time bracket did not close after {doublings} doublings (upper bound {upper} s)"
    )]
    BracketExpansion { doublings: u32, upper: f64 },

    #[error("trajectory integration exceeded {0} steps")]
    StepCapExceeded(usize),

    #[error("unknown builtin dataset {0:?} (expected A, B or C)")]
    UnknownDataset(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("{path}: row {row}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("duplicate experiment id {0:?}")]
    DuplicateId(String),

    #[error("covariance matrix is not positive definite after {0} jitter doublings")]
    NotPositiveDefinite(u32),

    #[error("all {0} optimizer restarts failed")]
    AllRestartsFailed(usize),

    #[error("sample index {index} out of range for {len} posterior draws")]
    SampleIndex { index: usize, len: usize },

    #[error("surrogate is missing its {0} component")]
    MissingComponent(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
