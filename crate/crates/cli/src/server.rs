//! HTTP service over the store. Handlers are thin shells: every data
//! response body is the same compact JSON the CLI and the core library
//! produce.
//!
//! Writes funnel through a single writer lock and are acknowledged only
//! after the durable append; GET handlers take the read side and never
//! mutate.

use std::sync::{Arc, RwLock};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};

use amiedot_core::analytics::StopwordList;
use amiedot_core::error::Error as CoreError;
use amiedot_core::store::Store;

use crate::config::ServiceConfig;
use crate::wire::{self, ReportKind, ReportParams, SelectorParams};

pub struct AppState {
    pub store: RwLock<Store>,
    pub strict_lending: bool,
    pub stopwords: StopwordList,
}

pub type SharedState = Arc<AppState>;

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/stats", get(get_stats))
        .route("/users", post(post_users))
        .route("/documents", post(post_documents))
        .route("/events", post(post_events))
        .route("/query", get(get_query))
        .route("/reports/{name}", get(get_report))
        .route("/recommendations/{user}", get(get_recommendations))
        .with_state(state)
}

/// Opens the configured store and serves until the process ends.
pub async fn serve(config: ServiceConfig) -> Result<(), CoreError> {
    let store = Store::open(&config.log_path)?;
    for warning in store.warnings() {
        eprintln!("warning: {warning}");
    }
    let stopwords = match &config.stopword_path {
        Some(path) => StopwordList::from_file(path)?,
        None => StopwordList::default(),
    };
    let state = Arc::new(AppState {
        store: RwLock::new(store),
        strict_lending: config.strict_lending,
        stopwords,
    });
    let listener = tokio::net::TcpListener::bind(&config.bind_address).await?;
    eprintln!(
        "serving on http://{} (log: {})",
        listener.local_addr()?,
        config.log_path.display()
    );
    axum::serve(listener, router(state)).await?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
    detail: String,
}

pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    detail: String,
}

impl ApiError {
    fn bad_request(detail: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            code: "bad-request",
            detail: detail.into(),
        }
    }

    fn not_found(code: &'static str, detail: impl Into<String>) -> Self {
        Self {
            status: StatusCode::NOT_FOUND,
            code,
            detail: detail.into(),
        }
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        let status = match &e {
            CoreError::Validation(_) => StatusCode::BAD_REQUEST,
            CoreError::UnknownUser(_) | CoreError::UnknownDocument(_) => StatusCode::NOT_FOUND,
            CoreError::Duplicate { .. } | CoreError::LendingOverlap { .. } => {
                StatusCode::CONFLICT
            }
            CoreError::CorruptLog { .. } | CoreError::Io(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        Self {
            status,
            code: e.code(),
            detail: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::to_string(&ErrorBody {
            error: self.code.to_string(),
            detail: self.detail,
        })
        .expect("error body serializes");
        (self.status, json_body(body)).into_response()
    }
}

/// A pre-serialized JSON body, so responses are byte-identical to what the
/// CLI prints.
fn json_body(body: String) -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "application/json")], body)
}

// ---------------------------------------------------------------------------
// Health and stats
// ---------------------------------------------------------------------------

async fn health() -> impl IntoResponse {
    json_body(r#"{"status":"ok"}"#.to_string())
}

async fn get_stats(State(state): State<SharedState>) -> Result<Response, ApiError> {
    let store = state.store.read().expect("store lock");
    let stats = store.stats();
    Ok(json_body(serde_json::to_string(&stats).expect("stats serialize")).into_response())
}

// ---------------------------------------------------------------------------
// Ingestion: single record or JSON-Lines batch per POST body
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct BatchError {
    line: usize,
    error: String,
    detail: String,
}

#[derive(Debug, Serialize)]
struct BatchReport {
    accepted: u64,
    rejected: u64,
    errors: Vec<BatchError>,
}

enum Posted<T> {
    Single(T),
    Batch(Vec<(usize, Result<T, String>)>),
}

/// A body with one line is a single record; more lines are a JSON-Lines
/// batch whose per-line failures do not abort the rest.
fn parse_posted<T: serde::de::DeserializeOwned>(body: &str) -> Result<Posted<T>, ApiError> {
    let trimmed = body.trim();
    if trimmed.is_empty() {
        return Err(ApiError::bad_request("empty body"));
    }
    if !trimmed.contains('\n') {
        let record = serde_json::from_str(trimmed)
            .map_err(|e| ApiError::bad_request(format!("invalid record: {e}")))?;
        return Ok(Posted::Single(record));
    }
    let records = trimmed
        .lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(idx, line)| {
            (
                idx + 1,
                serde_json::from_str::<T>(line).map_err(|e| e.to_string()),
            )
        })
        .collect();
    Ok(Posted::Batch(records))
}

fn ingest_posted<T>(
    posted: Posted<T>,
    reference: impl Fn(&T) -> String,
    verb: &'static str,
    mut apply: impl FnMut(T) -> Result<(), CoreError>,
) -> Result<Response, ApiError> {
    match posted {
        Posted::Single(record) => {
            let r = reference(&record);
            apply(record)?;
            let body = serde_json::to_string(&serde_json::json!({ verb: r }))
                .expect("ack serializes");
            Ok((StatusCode::CREATED, json_body(body)).into_response())
        }
        Posted::Batch(records) => {
            let mut report = BatchReport {
                accepted: 0,
                rejected: 0,
                errors: Vec::new(),
            };
            for (line, parsed) in records {
                let outcome = match parsed {
                    Ok(record) => apply(record).map_err(|e| (e.code().to_string(), e.to_string())),
                    Err(detail) => Err(("validation-error".to_string(), detail)),
                };
                match outcome {
                    Ok(()) => report.accepted += 1,
                    Err((error, detail)) => {
                        report.rejected += 1;
                        report.errors.push(BatchError {
                            line,
                            error,
                            detail,
                        });
                    }
                }
            }
            let body = serde_json::to_string(&report).expect("report serializes");
            Ok(json_body(body).into_response())
        }
    }
}

async fn post_users(
    State(state): State<SharedState>,
    body: String,
) -> Result<Response, ApiError> {
    let posted = parse_posted::<amiedot_core::UserRecord>(&body)?;
    let mut store = state.store.write().expect("store lock");
    ingest_posted(
        posted,
        |u| u.annotator_ref.clone(),
        "registered",
        |u| store.register_user(u),
    )
}

async fn post_documents(
    State(state): State<SharedState>,
    body: String,
) -> Result<Response, ApiError> {
    let posted = parse_posted::<amiedot_core::DocumentRecord>(&body)?;
    let mut store = state.store.write().expect("store lock");
    ingest_posted(
        posted,
        |d| d.doc_ref.clone(),
        "registered",
        |d| store.register_document(d),
    )
}

async fn post_events(
    State(state): State<SharedState>,
    body: String,
) -> Result<Response, ApiError> {
    let posted = parse_posted::<amiedot_core::ConsultationEvent>(&body)?;
    let strict = state.strict_lending;
    let mut store = state.store.write().expect("store lock");
    ingest_posted(
        posted,
        |e| e.event_ref.clone(),
        "ingested",
        |e| store.ingest_event(e, strict),
    )
}

// ---------------------------------------------------------------------------
// Queries, reports, recommendations
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct SelectorQuery {
    user: Option<String>,
    doc: Option<String>,
    at: Option<String>,
    from: Option<String>,
    to: Option<String>,
}

impl SelectorQuery {
    fn params(self) -> SelectorParams {
        SelectorParams {
            user: self.user,
            doc: self.doc,
            at: self.at,
            from: self.from,
            to: self.to,
        }
    }
}

async fn get_query(
    State(state): State<SharedState>,
    Query(query): Query<SelectorQuery>,
) -> Result<Response, ApiError> {
    let store = state.store.read().expect("store lock");
    let response = wire::run_query(&store, &query.params())?;
    Ok(json_body(serde_json::to_string(&response).expect("response serializes"))
        .into_response())
}

#[derive(Debug, Deserialize)]
struct ReportQuery {
    user: Option<String>,
    doc: Option<String>,
    at: Option<String>,
    from: Option<String>,
    to: Option<String>,
    top: Option<usize>,
    by: Option<String>,
    bucket: Option<i64>,
    keyword: Option<String>,
}

async fn get_report(
    State(state): State<SharedState>,
    Path(name): Path<String>,
    Query(query): Query<ReportQuery>,
) -> Result<Response, ApiError> {
    let kind = ReportKind::parse(&name).ok_or_else(|| {
        ApiError::not_found(
            "unknown-report",
            format!(
                "unknown report {name:?}; expected one of: {}",
                ReportKind::NAMES.join(", ")
            ),
        )
    })?;
    let params = ReportParams {
        selector: SelectorParams {
            user: query.user,
            doc: query.doc,
            at: query.at,
            from: query.from,
            to: query.to,
        },
        top: query.top.unwrap_or(10),
        by: query.by,
        bucket: query.bucket,
        keyword: query.keyword,
    };
    let store = state.store.read().expect("store lock");
    let output = wire::run_report(&store, kind, &params, &state.stopwords)?;
    Ok(json_body(output.to_json()).into_response())
}

#[derive(Debug, Deserialize)]
struct RecommendQuery {
    top: Option<usize>,
    interest: Option<bool>,
}

async fn get_recommendations(
    State(state): State<SharedState>,
    Path(user): Path<String>,
    Query(query): Query<RecommendQuery>,
) -> Result<Response, ApiError> {
    let top = query.top.unwrap_or(10);
    let store = state.store.read().expect("store lock");
    let recs = if query.interest.unwrap_or(false) {
        amiedot_core::recommend::recommend_by_interest(&store, &user, top)?
    } else {
        amiedot_core::recommend::recommend(&store, &user, top)?
    };
    Ok(json_body(serde_json::to_string(&recs).expect("recs serialize")).into_response())
}
