//! Error type shared by every module.

use thiserror::Error;

/// Everything that can go wrong inside the engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("ingestion error in {source_name} at line {line}: {message}")]
    Ingestion {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("quality is undefined on an empty relation")]
    UndefinedQuality,
    #[error("degenerate distribution: {0}")]
    Degenerate(String),
    #[error("estimation failed for seed {seed}: {reason}")]
    EstimationFailed { seed: u64, reason: String },
    #[error("attribute `{0}` is not covered by any instance")]
    Uncovered(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
