use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("no convergence after {iterations} iterations: {detail}")]
    NoConvergence { iterations: usize, detail: String },
}

impl Error {
    /// Short machine-readable tag, used in CLI error files.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::AssumptionViolated(_) => "AssumptionViolated",
            Error::NumericalFailure(_) => "NumericalFailure",
            Error::NoConvergence { .. } => "NoConvergence",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}

pub(crate) fn violated<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::AssumptionViolated(msg.into()))
}
