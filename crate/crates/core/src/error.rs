use thiserror::Error;

/// Errors raised by the noise model, the Fock oracle and the fitting layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Parameters outside the region where the perturbative source model holds.
    #[error("model domain error: {0}")]
    ModelDomain(String),

    #[error("signal-to-noise ratio undefined: {0}")]
    UndefinedSnr(String),

    #[error("ratio R undefined: {0}")]
    UndefinedRatio(String),

    #[error("fidelity undefined: {0}")]
    UndefinedFidelity(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
