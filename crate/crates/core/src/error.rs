use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Arguments violate a documented precondition (shape, sign, finiteness).
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A decomposition failed or produced a result too ill-conditioned to use.
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
