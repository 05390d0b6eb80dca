//! Operational shell around the docbi engine: a file-backed store, the
//! `docbi` command line and the HTTP API. No analytical rule lives here.

pub mod api;
pub mod cli;
pub mod error;
pub mod store;

pub use api::{router, serve, AppState, StoreConfig};
pub use error::{ApiError, ApiErrorCode, GatewayError};
pub use store::{Store, StoreError};
