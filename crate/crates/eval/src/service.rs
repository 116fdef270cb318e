//! HTTP grading service.
//!
//! Submissions arrive as a reference to a directory of estimated MIDI
//! files; grading runs synchronously and the result is appended to the
//! store before the response returns. The store writer is serialized
//! behind one lock, so concurrent submissions interleave at whole-
//! submission granularity and readers always see a consistent snapshot.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Mutex;

use amt_eval_core::matching::Tolerances;
use amt_eval_core::metrics::{AggregateMetrics, MetricsReport};

use crate::manifest::ReferenceSet;
use crate::store::{submission_records, Store, StoreError};
use crate::submission::{grade_submission, Submission};

pub struct ServiceState {
    pub references: ReferenceSet,
    pub tolerances: Tolerances,
    pub store: Mutex<Store>,
}

impl ServiceState {
    pub fn new(references: ReferenceSet, tolerances: Tolerances, store: Store) -> Arc<Self> {
        Arc::new(Self {
            references,
            tolerances,
            store: Mutex::new(store),
        })
    }
}

#[derive(Debug, Deserialize)]
pub struct SubmitRequest {
    pub model_name: String,
    /// Directory containing `<piece_id>.mid` estimates.
    pub dir: PathBuf,
}

#[derive(Debug, Serialize)]
pub struct SubmitResponse {
    pub submission_id: String,
    pub model_name: String,
    pub aggregate: AggregateMetrics,
    pub warnings: Vec<String>,
}

enum ApiError {
    BadRequest(String),
    NotFound(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, message) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(json!({ "error": message }))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownSubmission(id) => ApiError::NotFound(format!("no submission {id}")),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

pub fn app(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/leaderboard", get(get_leaderboard))
        .route("/submissions", post(post_submission))
        .route("/submissions/{id}", get(get_submission))
        .with_state(state)
}

async fn healthz() -> &'static str {
    "ok"
}

async fn get_leaderboard(State(state): State<Arc<ServiceState>>) -> Response {
    let store = state.store.lock().await;
    Json(store.leaderboard()).into_response()
}

async fn get_submission(
    State(state): State<Arc<ServiceState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<Vec<MetricsReport>>, ApiError> {
    let store = state.store.lock().await;
    let reports = store.reports(&id)?;
    Ok(Json(reports.into_iter().cloned().collect()))
}

async fn post_submission(
    State(state): State<Arc<ServiceState>>,
    body: Result<Json<SubmitRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<SubmitResponse>), ApiError> {
    let Json(request) = body.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    if request.model_name.trim().is_empty() {
        return Err(ApiError::BadRequest("model_name must be non-empty".into()));
    }

    let submission = Submission::from_dir(&request.model_name, &request.dir)
        .map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let references = state.clone();
    let graded = tokio::task::spawn_blocking(move || {
        grade_submission(&submission, &references.references, &references.tolerances)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))?
    .map_err(|e| ApiError::BadRequest(e.to_string()))?;

    let received_at_ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0);

    let mut store = state.store.lock().await;
    let submission_id = store.next_submission_id();
    let records = submission_records(
        &submission_id,
        &graded.model_name,
        received_at_ms,
        &graded.reports,
    );
    store.append_submission(records)?;

    Ok((
        StatusCode::CREATED,
        Json(SubmitResponse {
            submission_id,
            model_name: graded.model_name,
            aggregate: graded.aggregate,
            warnings: graded.warnings,
        }),
    ))
}
