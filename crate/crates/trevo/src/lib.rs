//! HTTP service and command-line front end for `trevo-core`.
//!
//! - [`service`]: request/response types and the logic shared by both fronts.
//! - [`api`]: the axum router.
//! - [`cli`]: the `trevo` command.

pub mod api;
pub mod cli;
pub mod error;
pub mod service;

pub use api::{app, router, AppState};
pub use error::ApiError;
