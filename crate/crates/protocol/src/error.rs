use thiserror::Error;

use hevf_core::ErrorCategory;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Core(#[from] hevf_core::Error),

    #[error("unknown user {0:?}")]
    UnknownUser(String),

    /// Request built for a different parameter set or matrix than the server's.
    #[error("parameter mismatch: {0}")]
    ParamMismatch(String),

    #[error("malformed message: {0}")]
    Malformed(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Error reported by the other side of a connection.
    #[error("remote error: {0}")]
    Remote(String),
}

/// Exit-code grouping for front ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Param,
    Crypto,
    Io,
    Protocol,
}

impl ProtocolError {
    pub fn category(&self) -> Category {
        match self {
            ProtocolError::Core(e) => match e.category() {
                ErrorCategory::Param => Category::Param,
                ErrorCategory::Crypto => Category::Crypto,
                ErrorCategory::Protocol => Category::Protocol,
            },
            ProtocolError::ParamMismatch(_) => Category::Param,
            ProtocolError::Io(_) => Category::Io,
            ProtocolError::UnknownUser(_) | ProtocolError::Malformed(_) | ProtocolError::Remote(_) => {
                Category::Protocol
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, ProtocolError>;
