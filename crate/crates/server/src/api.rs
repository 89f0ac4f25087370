//! Curation endpoints.
//!
//! | method | path                    | success                      |
//! |--------|-------------------------|------------------------------|
//! | GET    | `/tasks`                | 200 `TaskPage`               |
//! | GET    | `/tasks/{id}`           | 200 `{"task", "decision"}`   |
//! | POST   | `/tasks/{id}/decision`  | 201 `Decision`               |
//! | GET    | `/stats`                | 200 `StoreStats`             |
//!
//! `GET /tasks` takes `status` (`pending` or `decided`), `page` (1-based) and
//! `page_size` (1 to 100, default 20). A decision body is
//! `{"verdict": {"accept": {"cluster_id": 2}}}`, `{"verdict": "reject_all"}`
//! or `{"verdict": {"amend": {"value": <Value>}}}`; the curator is named by
//! the `x-curator-id` header.
//!
//! Errors are `{"error": {"code": ..., "message": ...}}` with codes
//! `bad_request` (400), `missing_curator` (400), `not_found` (404),
//! `conflict` (409, plus the winning `"decision"`), `invalid_decision` (422),
//! `invalid_query` (422) and `internal` (500).

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use odke_core::clock::Clock;
use odke_core::curation::{CurationTask, DecideError, Decision, TaskStatus, TaskStore, Verdict};
use odke_core::KnowledgeGraph;

pub const CURATOR_HEADER: &str = "x-curator-id";
const DEFAULT_PAGE_SIZE: usize = 20;

#[derive(Clone)]
pub struct ApiState {
    pub store: Arc<TaskStore>,
    /// Used to type-check amendments.
    pub kg: Arc<KnowledgeGraph>,
    pub clock: Arc<dyn Clock>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskDetail {
    pub task: CurationTask,
    pub decision: Option<Decision>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionRequest {
    pub verdict: Verdict,
}

struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    decision: Option<Decision>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            decision: None,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({"error": {"code": self.code, "message": self.message}});
        if let Some(d) = self.decision {
            body["decision"] = serde_json::to_value(d).expect("decision serializes");
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<DecideError> for ApiError {
    fn from(e: DecideError) -> Self {
        let message = e.to_string();
        match e {
            DecideError::NotFound(_) => ApiError::new(StatusCode::NOT_FOUND, "not_found", message),
            DecideError::Conflict(winner) => ApiError {
                decision: Some(*winner),
                ..ApiError::new(StatusCode::CONFLICT, "conflict", message)
            },
            DecideError::Invalid(_) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_decision", message)
            }
            DecideError::Store(_) => {
                tracing::error!("{message}");
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
            }
        }
    }
}

pub fn router(state: ApiState) -> Router {
    Router::new()
        .route("/tasks", get(list_tasks))
        .route("/tasks/{id}", get(get_task))
        .route("/tasks/{id}/decision", post(decide))
        .route("/stats", get(stats))
        .with_state(state)
}

fn parse_usize(q: &HashMap<String, String>, name: &str, default: usize) -> Result<usize, ApiError> {
    match q.get(name) {
        None => Ok(default),
        Some(v) => v.parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
            ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid_query",
                format!("{name} must be a positive integer, got {v:?}"),
            )
        }),
    }
}

async fn list_tasks(
    State(s): State<ApiState>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<impl IntoResponse, ApiError> {
    let status = match q.get("status").map(String::as_str) {
        None | Some("") | Some("all") => None,
        Some("pending") => Some(TaskStatus::Pending),
        Some("decided") => Some(TaskStatus::Decided),
        Some(other) => {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid_query",
                format!("unknown status {other:?}"),
            ))
        }
    };
    let page = parse_usize(&q, "page", 1)?;
    let page_size = parse_usize(&q, "page_size", DEFAULT_PAGE_SIZE)?;
    Ok(Json(s.store.list(status, page, page_size)))
}

async fn get_task(State(s): State<ApiState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let (task, decision) = s
        .store
        .get(&id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no task {id}")))?;
    Ok(Json(TaskDetail { task, decision }))
}

async fn decide(
    State(s): State<ApiState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let curator = headers
        .get(CURATOR_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .ok_or_else(|| {
            ApiError::new(
                StatusCode::BAD_REQUEST,
                "missing_curator",
                format!("the {CURATOR_HEADER} header is required"),
            )
        })?
        .to_string();
    let req: DecisionRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.to_string()))?;
    // The journal write syncs to disk; keep it off the async workers.
    let decision = tokio::task::spawn_blocking(move || {
        let at = s.clock.now();
        s.store.decide(&id, req.verdict, &curator, at, &s.kg)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok((StatusCode::CREATED, Json(decision)))
}

async fn stats(State(s): State<ApiState>) -> impl IntoResponse {
    Json(s.store.stats())
}
