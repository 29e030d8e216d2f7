//! HTTP service and command-line front end for elicitation sessions.

pub mod api;
pub mod cli;
pub mod error;
pub mod registry;

use std::sync::Arc;

pub use api::router;
pub use error::ApiError;
pub use registry::Registry;

/// Router over the session logs in `dir`.
pub fn app(dir: impl Into<std::path::PathBuf>) -> std::io::Result<axum::Router> {
    Ok(router(Arc::new(Registry::open(dir)?)))
}
