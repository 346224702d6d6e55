//! Client/server protocol for encrypted speaker verification.
//!
//! The client keeps the secret key. The server stores enrollments and
//! evaluates the encrypted score; it never sees a secret key, and nothing in
//! its interface accepts one.

pub mod client;
mod error;
pub mod frame;
pub mod message;
pub mod server;
pub mod store;

pub use client::{client_decide, rotation_steps, Client, Connection, Decision};
pub use error::{Category, ProtocolError, Result};
pub use message::{EnrollAck, EnrollmentRequest, ErrorMessage, Message, MessageKind, VerificationRequest, VerificationResponse};
pub use server::{Server, ServerConfig};
pub use store::EnrollmentStore;
