use thiserror::Error;

/// Error taxonomy shared by every module in the crate.
///
/// `Format` and `Unsupported` describe problems with external inputs (files,
/// byte streams), `Contract` flags a violated call precondition, and
/// `NonFinite` reports NaN/Inf escaping a numeric routine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),
    #[error("unsupported input: {0}")]
    Unsupported(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code a CLI should use for this error: 2 for user/input problems,
    /// 3 for internal invariant failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Format(_) | Error::Unsupported(_) | Error::Contract(_) | Error::Io(_) => 2,
            Error::NonFinite(_) => 3,
        }
    }
}
