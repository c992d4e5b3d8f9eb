//! Error types shared by every module.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One violated field-level rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Canonical (snake_case) name of the offending field.
    pub field: String,
    pub message: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Validation failure carrying one entry per violated field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    pub violations: Vec<Violation>,
}

impl ValidationError {
    pub fn new(violations: Vec<Violation>) -> Self {
        Self { violations }
    }

    pub fn single(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            violations: vec![Violation::new(field, message)],
        }
    }

    /// True if `field` appears among the violations.
    pub fn mentions(&self, field: &str) -> bool {
        self.violations.iter().any(|v| v.field == field)
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for v in &self.violations {
            if !first {
                write!(f, "; ")?;
            }
            write!(f, "{}: {}", v.field, v.message)?;
            first = false;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation failed: {0}")]
    Validation(ValidationError),

    #[error("unknown user {0:?}")]
    UnknownUser(String),

    #[error("unknown document {0:?}")]
    UnknownDocument(String),

    /// The reference exists with different content; byte-identical
    /// re-registration is idempotent and does not raise this.
    #[error("{kind} {reference:?} already registered with different content")]
    Duplicate {
        kind: &'static str,
        reference: String,
    },

    /// Strict lending rejected the event: its interval intersects a stored
    /// interval on the same document held by a different user.
    #[error("document {doc_ref:?} already in use during that interval (conflicting event {conflicting_event_ref:?})")]
    LendingOverlap {
        doc_ref: String,
        conflicting_event_ref: String,
    },

    #[error("corrupt log line {line}: {message}")]
    CorruptLog { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation(ValidationError::single(field, message))
    }

    /// Stable machine-readable code, used verbatim by the CLI and the
    /// HTTP error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation-error",
            Error::UnknownUser(_) => "unknown-user",
            Error::UnknownDocument(_) => "unknown-document",
            Error::Duplicate { .. } => "duplicate",
            Error::LendingOverlap { .. } => "overlap",
            Error::CorruptLog { .. } => "corrupt-log",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
