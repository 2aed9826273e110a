use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or argument violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The microphysical model is outside the regime where the effective
    /// description holds and the caller did not override the check.
    #[error("feasibility check failed: {0}")]
    Infeasible(String),

    /// A state or weight became non-finite, or all weights underflowed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
