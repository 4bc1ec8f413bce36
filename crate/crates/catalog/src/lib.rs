//! Workflow catalog: a file-backed store of validated documents, their
//! runs, the competency-question API and the HTTP service over them.

pub mod http;
mod query;
mod store;

pub use http::{router, serve};
pub use query::{CompetencyQuery, QueryArgs};
pub use store::{CatalogEntry, EntryMeta, EntrySummary, Imported, Store};

use thiserror::Error;
use tsflow_core::document::ValidationReport;
use tsflow_core::engine::EngineError;

/// Environment variable naming the store root.
pub const STORE_ENV: &str = "TSFLOW_STORE";

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("document rejected with {} error(s)", .0.error_count())]
    Invalid(ValidationReport),
    #[error("`{0}` is already stored with different content")]
    Conflict(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("run failed: {0}")]
    Engine(EngineError),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("storage error at `{path}`: {message}")]
    Storage { path: String, message: String },
}

impl CatalogError {
    /// Variant name, used as the machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            CatalogError::Invalid(_) => "Invalid",
            CatalogError::Conflict(_) => "Conflict",
            CatalogError::NotFound(_) => "NotFound",
            CatalogError::Input(_) => "InputError",
            CatalogError::Engine(_) => "EngineError",
            CatalogError::BadRequest(_) => "BadRequest",
            CatalogError::Storage { .. } => "StorageError",
        }
    }
}
