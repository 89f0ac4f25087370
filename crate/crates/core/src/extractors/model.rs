//! Question-answering model client. The model itself is external; this
//! module formats questions, calls the client per passage and turns answer
//! spans into candidates.
//!
//! HTTP protocol: `POST {endpoint}/qa` with body
//! `{"question": str, "context": str, "passage_id": str}`; the response is
//! `{"answers": [{"text": str, "start": int, "end": int, "score": float}]}`
//! with char offsets into `context`.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::{char_slice, Document};
use crate::kg_store::{Entity, Span, Value};
use crate::schema;

use super::{CandidateFact, ExtractContext, ExtractorKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaRequest {
    pub question: String,
    pub context: String,
    pub passage_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QaResponse {
    pub answers: Vec<Answer>,
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("model endpoint unavailable: {0}")]
    Unavailable(String),
    #[error("malformed model response: {0}")]
    Protocol(String),
}

pub trait ModelExtractorClient: Send + Sync {
    /// Extractor id recorded in provenance.
    fn id(&self) -> &str;
    fn answer(&self, request: &QaRequest) -> Result<QaResponse, ModelError>;
}

/// Scripted client: answers are looked up by (question, passage id).
#[derive(Debug, Clone, Default)]
pub struct MockModelClient {
    script: HashMap<(String, String), Vec<Answer>>,
    down: bool,
}

impl MockModelClient {
    pub fn new() -> Self {
        Self::default()
    }

    /// A client whose every call fails as if the endpoint were unreachable.
    pub fn unavailable() -> Self {
        MockModelClient {
            script: HashMap::new(),
            down: true,
        }
    }

    pub fn script(mut self, question: &str, passage_id: &str, answers: Vec<Answer>) -> Self {
        self.script
            .insert((question.to_string(), passage_id.to_string()), answers);
        self
    }
}

impl ModelExtractorClient for MockModelClient {
    fn id(&self) -> &str {
        "model/mock"
    }

    fn answer(&self, request: &QaRequest) -> Result<QaResponse, ModelError> {
        if self.down {
            return Err(ModelError::Unavailable("mock client is down".into()));
        }
        let answers = self
            .script
            .get(&(request.question.clone(), request.passage_id.clone()))
            .cloned()
            .unwrap_or_default();
        Ok(QaResponse { answers })
    }
}

pub struct HttpModelClient {
    endpoint: String,
    agent: ureq::Agent,
}

impl HttpModelClient {
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpModelClient {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            agent,
        }
    }
}

impl ModelExtractorClient for HttpModelClient {
    fn id(&self) -> &str {
        "model/http"
    }

    fn answer(&self, request: &QaRequest) -> Result<QaResponse, ModelError> {
        let mut resp = self
            .agent
            .post(&format!("{}/qa", self.endpoint))
            .send_json(request)
            .map_err(|e| ModelError::Unavailable(e.to_string()))?;
        resp.body_mut()
            .read_json::<QaResponse>()
            .map_err(|e| ModelError::Protocol(e.to_string()))
    }
}

/// Question templates by language and predicate; `{subject}` is replaced by
/// the subject's name.
///
/// File format (`odke.question_templates` v1):
/// `{"schema": ..., "version": 1, "templates": {"en": {"P569": "When was {subject} born?"}}}`
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QuestionTemplates {
    pub templates: BTreeMap<String, BTreeMap<String, String>>,
}

#[derive(Deserialize)]
struct QuestionFile {
    schema: String,
    version: u32,
    templates: BTreeMap<String, BTreeMap<String, String>>,
}

impl QuestionTemplates {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let f: QuestionFile =
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        if f.schema != schema::QUESTIONS || f.version != schema::VERSION {
            return Err(format!(
                "{}: expected {} v{}",
                path.display(),
                schema::QUESTIONS,
                schema::VERSION
            ));
        }
        Ok(QuestionTemplates {
            templates: f.templates,
        })
    }

    pub fn question(&self, language: &str, predicate: &str, subject_name: &str) -> Option<String> {
        let t = self.templates.get(language)?.get(predicate)?;
        Some(t.replace("{subject}", subject_name))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelOutcome {
    pub candidates: Vec<CandidateFact>,
    /// The client failed; the task should be retried in a later run.
    pub deferred: bool,
    pub error: Option<String>,
}

/// Asks the model for `predicate` of `subject` over every passage of `doc`.
/// Answers whose offsets do not reproduce their text are discarded.
pub fn model_extract(
    client: &dyn ModelExtractorClient,
    templates: &QuestionTemplates,
    subject: &Entity,
    predicate: &str,
    doc: &Document,
    ctx: &ExtractContext<'_>,
) -> ModelOutcome {
    let mut outcome = ModelOutcome::default();
    let Some(question) = templates.question(&doc.language, predicate, &subject.canonical_name)
    else {
        return outcome;
    };
    for passage in &doc.passages {
        let request = QaRequest {
            question: question.clone(),
            context: passage.text.clone(),
            passage_id: passage.id.clone(),
        };
        let response = match client.answer(&request) {
            Ok(r) => r,
            Err(e) => {
                tracing::warn!(url = %doc.url, error = %e, "model extraction deferred");
                return ModelOutcome {
                    candidates: Vec::new(),
                    deferred: true,
                    error: Some(e.to_string()),
                };
            }
        };
        for answer in response.answers {
            if char_slice(&passage.text, answer.start, answer.end) != Some(answer.text.as_str())
                || answer.text.trim().is_empty()
            {
                continue;
            }
            let score = answer.score.clamp(0.0, 1.0);
            outcome.candidates.push(CandidateFact {
                subject: subject.id.clone(),
                predicate: predicate.to_string(),
                raw_span: ctx.provenance(
                    doc,
                    Span::Passage {
                        passage_id: passage.id.clone(),
                        start: answer.start,
                        end: answer.end,
                    },
                    client.id(),
                ),
                value: Value::text(answer.text.trim(), &doc.language),
                raw_text: answer.text,
                extractor_id: client.id().to_string(),
                extractor_kind: ExtractorKind::Model,
                extractor_score: score,
                language: doc.language.clone(),
                source_unit: None,
                unresolved_url: None,
            });
        }
    }
    outcome
}
