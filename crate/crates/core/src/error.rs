use std::fmt;

/// Errors returned across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("value out of range: {0}")]
    Range(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    /// AEAD tag failure or a record header that fails validation.
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("client {0} is already authorized")]
    AlreadyAuthorized(String),
    #[error("parameter mismatch: {0}")]
    ParamsMismatch(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl fmt::Display) -> Self {
        Error::InvalidInput(msg.to_string())
    }

    pub fn protocol(msg: impl fmt::Display) -> Self {
        Error::Protocol(msg.to_string())
    }
}
