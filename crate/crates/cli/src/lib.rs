//! Support code for the `hevf` binary: configuration, key directories,
//! vector files and the mapping from errors to exit codes.

pub mod config;
pub mod files;

use hevf_core::ErrorCategory;
use hevf_eval::EvalError;
use hevf_protocol::{Category, ProtocolError};
use thiserror::Error;

pub use config::Config;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Param(String),

    #[error("{0}")]
    Io(String),

    #[error("{0}")]
    Protocol(String),

    #[error(transparent)]
    Core(#[from] hevf_core::Error),

    #[error(transparent)]
    Session(#[from] ProtocolError),

    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub const EXIT_PARAM: u8 = 2;
pub const EXIT_CRYPTO: u8 = 3;
pub const EXIT_IO: u8 = 4;
pub const EXIT_PROTOCOL: u8 = 5;

fn core_code(e: &hevf_core::Error) -> u8 {
    match e.category() {
        ErrorCategory::Param => EXIT_PARAM,
        ErrorCategory::Crypto => EXIT_CRYPTO,
        ErrorCategory::Protocol => EXIT_PROTOCOL,
    }
}

fn protocol_code(e: &ProtocolError) -> u8 {
    match e.category() {
        Category::Param => EXIT_PARAM,
        Category::Crypto => EXIT_CRYPTO,
        Category::Io => EXIT_IO,
        Category::Protocol => EXIT_PROTOCOL,
    }
}

fn eval_code(e: &EvalError) -> u8 {
    match e {
        EvalError::Core(c) => core_code(c),
        EvalError::Protocol(p) => protocol_code(p),
        EvalError::Io(_) => EXIT_IO,
        EvalError::Format(_) => EXIT_PROTOCOL,
        EvalError::Spec(_) | EvalError::Empty(_) => EXIT_PARAM,
    }
}

/// Exit code for the first categorizable error in the chain, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return match e {
                CliError::Param(_) => EXIT_PARAM,
                CliError::Io(_) => EXIT_IO,
                CliError::Protocol(_) => EXIT_PROTOCOL,
                CliError::Core(c) => core_code(c),
                CliError::Session(p) => protocol_code(p),
                CliError::Eval(e) => eval_code(e),
            };
        }
        if let Some(e) = cause.downcast_ref::<hevf_core::Error>() {
            return core_code(e);
        }
        if let Some(e) = cause.downcast_ref::<ProtocolError>() {
            return protocol_code(e);
        }
        if let Some(e) = cause.downcast_ref::<EvalError>() {
            return eval_code(e);
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    1
}
