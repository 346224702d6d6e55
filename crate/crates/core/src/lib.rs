//! Leveled RNS-CKKS homomorphic encryption and encrypted cosine-similarity scoring.

pub mod error;
pub mod linalg;
pub mod ckks;
pub mod ring;
pub mod score;
pub mod serial;

pub use error::{Error, ErrorCategory, Result};
