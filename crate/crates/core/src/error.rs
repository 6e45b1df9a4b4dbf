use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A time argument lies outside `[0, T]` or violates an ordering precondition.
    #[error("time out of range: {0}")]
    Range(String),

    /// Malformed model, scheme, functional or configuration input.
    #[error("invalid input: {0}")]
    Input(String),

    /// A time was requested from a path that was never sampled there.
    #[error("time {0} is not a sampled time of the path")]
    Lookup(f64),

    /// The requested computation is not defined for the given arguments
    /// (missing homogeneity degree, correlated model for an uncorrelated limit, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("replication {replication} at n={n}: {source}")]
    Replication {
        n: u64,
        replication: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
