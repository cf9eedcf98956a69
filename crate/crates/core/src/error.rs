use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A model or experiment configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),
    /// A numerical routine failed to converge.
    #[error("solver error: {0}")]
    Solver(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }

    /// True for failures of the numerical routines, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Solver(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
