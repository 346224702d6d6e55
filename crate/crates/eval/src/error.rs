use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Core(#[from] hevf_core::Error),

    #[error(transparent)]
    Protocol(#[from] hevf_protocol::ProtocolError),

    /// Corpus or scorer configuration that cannot produce trials.
    #[error("invalid specification: {0}")]
    Spec(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("malformed corpus file: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EvalError>;
