use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
///
/// Variants split into input problems (bad files, violated preconditions) and
/// numerical failures; the CLI maps them onto distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("insufficient history: need more than {window} observations, got {len}")]
    InsufficientHistory { window: usize, len: usize },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("inadmissible split: {0}")]
    InadmissibleSplit(String),

    #[error("numerical failure at period {period}: {msg}")]
    Numerical { period: usize, msg: String },

    #[error("sampler failed at sweep {sweep}: {source}")]
    Sweep {
        sweep: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn parse(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the numbers rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Numerical { .. } => true,
            Error::Sweep { .. } => true,
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
