use thiserror::Error;

/// Errors raised by the ring, scheme, linear-algebra and scoring layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid or inconsistent parameters (ring degree, modulus chain, presets).
    #[error("parameter error: {0}")]
    Param(String),

    /// Modulus chain exceeds the maximum size allowed for the claimed security level.
    #[error(
        "security error: modulus chain uses {used_bits} bits but N={degree} allows at most {max_bits} bits at {security_bits}-bit security"
    )]
    Security {
        degree: usize,
        security_bits: u32,
        used_bits: u32,
        max_bits: u32,
    },

    /// Polynomials or ciphertexts with incompatible shapes or modulus sets.
    #[error("structural mismatch: {0}")]
    Structure(String),

    /// Operands at different levels or scales.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// No multiplicative budget left.
    #[error("level exhausted: {0}")]
    LevelExhausted(String),

    #[error("no Galois key available for rotation by {0}")]
    MissingGaloisKey(i64),

    #[error("encoding error: {0}")]
    Encoding(String),

    /// Inputs for which the score is undefined (zero norms, empty vectors).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Circuit needs more levels than the ciphertexts carry.
    #[error("plan error: circuit requires {required} levels but only {available} are available")]
    Plan { required: usize, available: usize },

    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed serialized data.
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// Coarse category used by front ends to map errors onto exit codes.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Param(_) | Error::Security { .. } | Error::Plan { .. } | Error::Config(_) => {
                ErrorCategory::Param
            }
            Error::Format(_) => ErrorCategory::Protocol,
            _ => ErrorCategory::Crypto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Param,
    Crypto,
    Protocol,
}

pub type Result<T> = std::result::Result<T, Error>;
