use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value {value} at abscissa {at}")]
    Numeric { at: f64, value: f64 },

    #[error("integrability: {0}")]
    Integrability(String),

    #[error("no convergence: {reason} (last {last}, previous {previous})")]
    Convergence {
        reason: String,
        last: f64,
        previous: f64,
    },

    #[error("contract violation at index {index}: {reason}")]
    ContractViolation { index: usize, reason: String },

    #[error("work budget exceeded: {work} evaluations requested, limit {limit}; use the Monte Carlo path")]
    Budget { work: f64, limit: f64 },

    #[error("non-finite integrand value {value} on path {path:?}")]
    PathEvaluation { path: Vec<f64>, value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
