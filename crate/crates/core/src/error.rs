use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: feature id {fid} exceeds declared dimensionality {declared}")]
    FeatureOutOfRange {
        line: usize,
        fid: usize,
        declared: usize,
    },

    #[error("missing data file {0}")]
    MissingFile(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dimensionality mismatch: expected {expected} features, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dataset is empty: {0}")]
    EmptyData(String),

    #[error("feature subset selects no features")]
    EmptySubset,

    #[error("invalid subset size k={k} for n={n} (need 1 <= k <= n-1)")]
    SubsetSize { n: usize, k: usize },

    #[error("invalid subset encoding: {0}")]
    SubsetEncoding(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Csv(#[from] csv::Error),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Configuration problems exit with 1, everything data-related with 2.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::SubsetSize { .. } | Error::SubsetEncoding(_) => 1,
            _ => 2,
        }
    }
}
