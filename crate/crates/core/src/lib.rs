//! Business-intelligence engine over a bibliographic document warehouse.
//!
//! The pipeline runs from filtered ingestion ([`warehouse`]) through Boolean
//! and faceted retrieval ([`query`]) to user sessions with pertinence feedback
//! ([`user`]) and read-only data marts ([`mart`]). [`Engine`] ties the pieces
//! together behind one interface.

pub mod engine;
pub mod error;
pub mod fixture;
pub mod mart;
pub mod query;
pub mod user;
pub mod warehouse;

pub use engine::Engine;
pub use error::{Error, ErrorKind, Result};
