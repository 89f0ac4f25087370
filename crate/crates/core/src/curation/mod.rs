//! Curation tasks for facts that need a human verdict, the decision journal,
//! and the path from decisions back into the fact log.
//!
//! Verdict wire shapes: `{"accept":{"cluster_id":2}}`, `"reject_all"`,
//! `{"amend":{"value":<Value>}}`.

mod apply;
mod store;

pub use apply::{apply_decisions, applied_decision_ids, ApplyReport, CURATION_EXTRACTOR};
pub use store::{DecideError, StoreError, StoreStats, TaskPage, TaskStore};

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::{char_slice, Corpus, Document};
use crate::corroborator::{Route, ScoredFact};
use crate::kg_store::{EntityId, FactStatus, KnowledgeGraph, LatestView, Provenance, Span, Value};

/// Context window on each side of a provenance span, in chars.
pub const SNIPPET_RADIUS: usize = 80;
/// Existing KG facts shown with a task.
pub const CONTEXT_FACTS: usize = 5;
const SNIPPETS_PER_CLUSTER: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Pending,
    Decided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextFact {
    pub predicate: String,
    pub value: Value,
    pub display: String,
    pub confidence: f64,
    pub status: FactStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectSummary {
    pub id: EntityId,
    pub name: String,
    pub aliases: Vec<String>,
    pub types: Vec<EntityId>,
    pub facts: Vec<ContextFact>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snippet {
    pub source_url: String,
    pub revision_id: String,
    pub text: String,
    /// Char offsets of the extracted span inside `text`.
    pub highlight_start: usize,
    pub highlight_end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterOption {
    /// 1-based; equals the corroborator rank unless an ambiguous mention was
    /// expanded into one option per candidate entity.
    pub cluster_id: usize,
    pub value: Value,
    pub display: String,
    pub score: f64,
    pub support: usize,
    pub distinct_sources: usize,
    pub language: String,
    pub provenance: Vec<Provenance>,
    pub snippets: Vec<Snippet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationTask {
    pub task_id: String,
    pub subject: SubjectSummary,
    pub predicate: String,
    pub predicate_name: String,
    pub sensitive: bool,
    pub clusters: Vec<ClusterOption>,
    pub status: TaskStatus,
    pub created_at: DateTime<Utc>,
}

impl CurationTask {
    pub fn cluster(&self, cluster_id: usize) -> Option<&ClusterOption> {
        self.clusters.iter().find(|c| c.cluster_id == cluster_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accept { cluster_id: usize },
    RejectAll,
    Amend { value: Value },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub decision_id: String,
    pub task_id: String,
    pub verdict: Verdict,
    pub curator_id: String,
    pub decided_at: DateTime<Utc>,
}

pub fn decision_id(task_id: &str) -> String {
    format!("d-{task_id}")
}

fn task_id(subject: &EntityId, predicate: &str, clusters: &[ClusterOption]) -> String {
    let mut h = crc32fast::Hasher::new();
    h.update(subject.as_str().as_bytes());
    h.update(b"|");
    h.update(predicate.as_bytes());
    for c in clusters {
        h.update(b"|");
        h.update(c.value.canonical_key().as_bytes());
    }
    format!("ct-{:08x}", h.finalize())
}

/// Text around `span` in `doc`, with the span's position inside it.
pub fn snippet(doc: &Document, span: &Span) -> Option<Snippet> {
    let (text, start, end) = match span {
        Span::Passage {
            passage_id,
            start,
            end,
        } => (&doc.passage(passage_id)?.text, *start, *end),
        Span::Infobox { key, start, end } => (&doc.row(key)?.raw_value, *start, *end),
        Span::Derived { .. } => return None,
    };
    char_slice(text, start, end)?;
    let from = start.saturating_sub(SNIPPET_RADIUS);
    let len = text.chars().count();
    let to = (end + SNIPPET_RADIUS).min(len);
    Some(Snippet {
        source_url: doc.url.clone(),
        revision_id: doc.revision_id.clone(),
        text: char_slice(text, from, to)?.to_string(),
        highlight_start: start - from,
        highlight_end: end - from,
    })
}

fn subject_summary(subject: &EntityId, kg: &KnowledgeGraph, view: &LatestView) -> SubjectSummary {
    let entity = kg.entity(subject);
    SubjectSummary {
        id: subject.clone(),
        name: entity.map(|e| e.canonical_name.clone()).unwrap_or_else(|| subject.to_string()),
        aliases: entity
            .map(|e| e.aliases.iter().map(|a| a.name.clone()).collect())
            .unwrap_or_default(),
        types: entity.map(|e| e.types.iter().cloned().collect()).unwrap_or_default(),
        facts: view
            .by_subject(subject)
            .take(CONTEXT_FACTS)
            .map(|r| ContextFact {
                predicate: r.fact.predicate.clone(),
                value: r.fact.object.clone(),
                display: r.fact.object.to_string(),
                confidence: r.fact.confidence,
                status: r.fact.status,
            })
            .collect(),
    }
}

fn options_for(f: &ScoredFact, corpus: Option<&Corpus>) -> Vec<(Value, Vec<Snippet>)> {
    let snippets: Vec<Snippet> = corpus
        .map(|c| {
            f.fact
                .provenance
                .iter()
                .filter_map(|p| snippet(c.revision(&p.source_url, &p.revision_id)?, &p.span))
                .take(SNIPPETS_PER_CLUSTER)
                .collect()
        })
        .unwrap_or_default();
    if f.mention_options.is_empty() {
        vec![(f.fact.object.clone(), snippets)]
    } else {
        f.mention_options
            .iter()
            .map(|id| (Value::entity(id.clone()), snippets.clone()))
            .collect()
    }
}

/// One task per (subject, predicate) over the facts routed to curation,
/// listing every competing cluster in rank order. An ambiguous mention
/// becomes one option per candidate entity.
pub fn generate_tasks(
    scored: &[ScoredFact],
    kg: &KnowledgeGraph,
    view: &LatestView,
    corpus: Option<&Corpus>,
    at: DateTime<Utc>,
) -> Vec<CurationTask> {
    let mut groups: BTreeMap<(EntityId, String), Vec<&ScoredFact>> = BTreeMap::new();
    for f in scored.iter().filter(|f| f.route == Route::Curation) {
        groups
            .entry((f.fact.subject.clone(), f.fact.predicate.clone()))
            .or_default()
            .push(f);
    }
    groups
        .into_iter()
        .map(|((subject, predicate), mut facts)| {
            facts.sort_by(|a, b| a.rank.cmp(&b.rank));
            let mut clusters: Vec<ClusterOption> = Vec::new();
            for f in facts {
                for (value, snippets) in options_for(f, corpus) {
                    if clusters.iter().any(|c| c.value == value) {
                        continue;
                    }
                    clusters.push(ClusterOption {
                        cluster_id: clusters.len() + 1,
                        display: value.to_string(),
                        value,
                        score: f.score,
                        support: f.support,
                        distinct_sources: f.distinct_sources,
                        language: f.fact.language.clone(),
                        provenance: f.fact.provenance.clone(),
                        snippets,
                    });
                }
            }
            let p = kg.ontology().get(&predicate);
            CurationTask {
                task_id: task_id(&subject, &predicate, &clusters),
                subject: subject_summary(&subject, kg, view),
                predicate_name: p.map(|p| p.name.clone()).unwrap_or_else(|| predicate.clone()),
                sensitive: p.is_some_and(|p| p.sensitive),
                predicate,
                clusters,
                status: TaskStatus::Pending,
                created_at: at,
            }
        })
        .collect()
}
