//! `POST /qa` in front of any [`ModelExtractorClient`]; with a [`QaScript`]
//! this is the in-repo mock model server.
//!
//! Script file (`odke.qa_script` v1), one JSON document:
//!
//! ```json
//! {"schema": "odke.qa_script", "version": 1, "answers": [
//!   {"question": "When was Ada born?", "passage_id": "p0",
//!    "answers": [{"text": "August 4, 1961", "start": 17, "end": 31, "score": 0.9}]}]}
//! ```
//!
//! Unscripted (question, passage) pairs get an empty answer list.

use std::path::Path;
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use odke_core::extractors::{Answer, MockModelClient, ModelError, ModelExtractorClient, QaRequest};

pub const QA_SCRIPT_SCHEMA: &str = "odke.qa_script";

#[derive(Debug, Clone, Deserialize)]
struct ScriptEntry {
    question: String,
    passage_id: String,
    answers: Vec<Answer>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct QaScript {
    schema: String,
    version: u32,
    answers: Vec<ScriptEntry>,
}

impl QaScript {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let script: QaScript =
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        if script.schema != QA_SCRIPT_SCHEMA || script.version != odke_core::schema::VERSION {
            return Err(format!(
                "{}: expected {QA_SCRIPT_SCHEMA} v{}",
                path.display(),
                odke_core::schema::VERSION
            ));
        }
        Ok(script)
    }

    pub fn into_client(self) -> MockModelClient {
        self.answers
            .into_iter()
            .fold(MockModelClient::new(), |c, e| c.script(&e.question, &e.passage_id, e.answers))
    }
}

pub fn qa_router(client: Arc<dyn ModelExtractorClient>) -> Router {
    Router::new().route("/qa", post(answer)).with_state(client)
}

async fn answer(State(client): State<Arc<dyn ModelExtractorClient>>, Json(req): Json<QaRequest>) -> Response {
    match client.answer(&req) {
        Ok(resp) => Json(resp).into_response(),
        Err(e) => {
            let code = match e {
                ModelError::Unavailable(_) => "unavailable",
                ModelError::Protocol(_) => "protocol",
            };
            (
                StatusCode::SERVICE_UNAVAILABLE,
                Json(json!({"error": {"code": code, "message": e.to_string()}})),
            )
                .into_response()
        }
    }
}
