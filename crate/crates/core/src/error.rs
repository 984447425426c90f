use thiserror::Error;

/// Errors raised across the optimization stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Caller supplied inputs that violate a precondition.
    #[error("invalid input: {0}")]
    Input(String),
    /// A linear-algebra step failed despite regularization.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
