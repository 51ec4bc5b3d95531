use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("optimizer failure: {0}")]
    Optim(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

impl Error {
    /// Message without the variant prefix.
    pub fn message(&self) -> &str {
        match self {
            Error::Domain(m) | Error::Numerical(m) | Error::Optim(m) | Error::Config(m) | Error::Io(m) => m,
        }
    }

    /// Same variant with `prefix: ` prepended to the message.
    pub fn context(self, prefix: impl std::fmt::Display) -> Error {
        match self {
            Error::Domain(m) => Error::Domain(format!("{prefix}: {m}")),
            Error::Numerical(m) => Error::Numerical(format!("{prefix}: {m}")),
            Error::Optim(m) => Error::Optim(format!("{prefix}: {m}")),
            Error::Config(m) => Error::Config(format!("{prefix}: {m}")),
            Error::Io(m) => Error::Io(format!("{prefix}: {m}")),
        }
    }
}
