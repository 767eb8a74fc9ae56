use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Requested table size is outside `[min, cap]`.
    #[error("table limit {limit} outside allowed range [{min}, {cap}]")]
    Size { limit: u64, min: u64, cap: u64 },

    /// An argument exceeds the limit of the table it is looked up in.
    #[error("value {value} exceeds table limit {limit}")]
    Range { value: u64, limit: u64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric non-convergence: {0}")]
    NonConvergence(String),

    #[error("enumeration aborted after visiting {budget} nodes")]
    Budget { budget: u64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
