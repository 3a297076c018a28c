use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("agent {agent} queried a point outside the decision set at round {round}")]
    QueryOutsideSet { agent: usize, round: usize },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program did not certify optimality: {0}")]
    Uncertified(String),

    #[error("series entry {index} is not positive ({value})")]
    NonPositiveSeries { index: usize, value: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("csv schema mismatch in {path}: {reason}")]
    Schema { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
