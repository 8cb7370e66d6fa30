use std::path::Path;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("mixture density underflowed to zero at observation {}", index + 1)]
    DegenerateDensity { index: usize },
    #[error("data range is zero; empirical-Bayes hyperparameters are undefined")]
    ZeroRange,
    #[error("penalty `{penalty}` cannot be evaluated on {input}")]
    SelectorMismatch { penalty: String, input: String },
    #[error("current state has zero penalty; the chain must never occupy such a state")]
    InvalidCurrentState,
    #[error("initialization failed: no state with positive penalty after {attempts} attempts")]
    InitFailure { attempts: usize },
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("every grid cell has zero posterior mass")]
    EmptyGrid,
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl Error {
    /// Process exit status: 1 for bad input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidData(_)
            | Error::InvalidParams(_)
            | Error::InvalidConfig(_)
            | Error::Parse(_)
            | Error::ZeroRange
            | Error::SelectorMismatch { .. }
            | Error::UnknownColumn(_) => 1,
            _ => 2,
        }
    }
}
