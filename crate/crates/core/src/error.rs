use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index out of range: {what} = {index} (limit {limit})")]
    Index {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Domain(String),

    #[error("invalid probability table: {0}")]
    Probability(String),

    #[error("infinite diameter: state {to} is not reachable from state {from}")]
    InfiniteDiameter { from: usize, to: usize },

    #[error("policy enumeration too large ({count} policies); supply the hitting time explicitly")]
    EnumerationTooLarge { count: f64 },

    #[error("model set is not {0}-separable")]
    NotSeparable(f64),

    #[error("distinguishing pair ({state}, {action}) has no samples in this episode")]
    Undersampled { state: usize, action: usize },

    #[error("clustering failed: {0}")]
    Clustering(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    /// Exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::Io { .. } => 2,
            _ => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_index(what: &'static str, index: usize, limit: usize) -> Result<()> {
    if index < limit {
        Ok(())
    } else {
        Err(Error::Index { what, index, limit })
    }
}
