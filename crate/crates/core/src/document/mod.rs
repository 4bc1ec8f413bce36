//! Workflow documents: the JSON-LD reader, the validator and the canonical
//! writer, all over the typed [`WorkflowDoc`] AST.

mod ast;
mod parse;
mod serialize;
mod validate;

pub use ast::*;
pub use parse::{parse_document, parse_timestamp};
pub use serialize::{serialize, serialize_value};
pub use validate::validate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DocumentError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("structure error at `{path}`: {reason}")]
    Structure { path: String, reason: String },
}

impl DocumentError {
    /// The error as a single-entry report, so callers can treat parse
    /// failures and validation failures uniformly.
    pub fn to_report(&self) -> ValidationReport {
        let (path, code) = match self {
            DocumentError::Syntax { .. } => (String::new(), "SyntaxError"),
            DocumentError::Structure { path, .. } => (path.clone(), "StructureError"),
        };
        ValidationReport::from_diagnostics(vec![Diagnostic::error(&path, code, self.to_string())])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// One finding, located by a JSON pointer into the source document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub path: String,
    pub code: String,
    pub message: String,
}

impl Diagnostic {
    pub fn error(path: &str, code: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            path: path.to_string(),
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn warning(path: &str, code: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            path: path.to_string(),
            code: code.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn from_diagnostics(diagnostics: Vec<Diagnostic>) -> Self {
        ValidationReport {
            valid: !diagnostics.iter().any(|d| d.severity == Severity::Error),
            diagnostics,
        }
    }

    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Warning)
    }

    pub fn error_count(&self) -> usize {
        self.errors().count()
    }
}

/// Resolves a JSON pointer against a JSON value.
pub fn pointer_exists(root: &serde_json::Value, path: &str) -> bool {
    path.is_empty() || root.pointer(path).is_some()
}
