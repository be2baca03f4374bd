//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix or vector dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A configuration file failed to parse or validate.
    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    /// Internal protocol state violation (a selection bug, not a user error).
    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
