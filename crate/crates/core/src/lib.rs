//! Annotation-event store, tracking queries, analytics, and
//! recommendations over (user, document, time) logs.
//!
//! Every use of a document is logged as a consultation event — one user,
//! one document, one timestamp, optional annotation payload — in an
//! append-only JSON-Lines log. Queries constrain any combination of the
//! user, document, and time axes; the eight fixed/free combinations are
//! classified by [`store::classify_selector`]. On top of the log sit usage
//! analytics ([`analytics`]), neighbor-based recommendations
//! ([`recommend`]), and a deterministic fixture generator ([`workload`]).

pub mod analytics;
pub mod error;
pub mod model;
pub mod recommend;
pub mod store;
pub mod workload;

pub use error::{Error, Result, ValidationError, Violation};
pub use model::{
    AnnotationRecord, Approach, ConsultationEvent, ConsultationReason, DocumentRecord,
    QuerySelector, RefConstraint, TimeConstraint, UserRecord,
};
pub use store::{classify_selector, LogRecord, ShapeCode, Store, StoreStats};
