//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset has no included observations")]
    EmptyDataset,

    #[error("need at least 2 {factor} levels, found {found}")]
    InsufficientLevels { factor: &'static str, found: usize },

    #[error("invalid observation: {0}")]
    InvalidObservation(String),

    #[error("design is not fully crossed: {0}")]
    NotCrossed(String),

    #[error("genuine replication required: {0}")]
    GenuineReplication(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric precision failure: {0}")]
    Precision(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("inconsistent input: {0}")]
    Inconsistent(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code: 2 design/validation failure, 3 parse error,
    /// 4 internal numeric error.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Parse(_) | Error::Io(_) => 3,
            Error::DegenerateData(_) | Error::Domain(_) | Error::Precision(_) => 4,
            _ => 2,
        }
    }
}
