use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("workload line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(
        "unknown mechanism {0:?}; expected one of N&PAA, N&SPAA, CUA&PAA, CUA&SPAA, CUP&PAA, CUP&SPAA (or FCFS-EASY)"
    )]
    UnknownMechanism(String),

    #[error("simulation invariant violated at t={time}: {message}")]
    Invariant { time: i64, message: String },

    #[error("instance exceeds oracle bounds: {0}")]
    OracleBounds(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn invariant(time: i64, message: impl Into<String>) -> Self {
        Error::Invariant { time, message: message.into() }
    }
}
