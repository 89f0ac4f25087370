//! What to extract next: coverage gaps, stale facts, escalations and
//! change-feed events, all expressed as [`ExtractionTask`]s.
//!
//! Task files (`odke.tasks` v1) hold one task per line; escalation files use
//! the same schema with reason `escalation`.

use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::{ChangeEvent, Corpus, Document};
use crate::kg_store::{Entity, EntityId, KnowledgeGraph, LatestView, Value};
use crate::schema;

/// Predicate slot of a task meaning "every predicate the rules support".
pub const ALL_PREDICATES: &str = "*";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskReason {
    Missing,
    Stale,
    Escalation,
    ChangeEvent,
    FullScan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionTask {
    pub subject: EntityId,
    pub name: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_type: Option<EntityId>,
    pub predicate: String,
    /// Empty means the retriever has to search for evidence.
    #[serde(default)]
    pub urls: Vec<String>,
    pub reason: TaskReason,
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin_event_time: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_id: Option<String>,
}

impl ExtractionTask {
    pub fn for_entity(entity: &Entity, predicate: &str, reason: TaskReason, at: DateTime<Utc>) -> Self {
        ExtractionTask {
            subject: entity.id.clone(),
            name: entity.canonical_name.clone(),
            aliases: entity.aliases.iter().map(|a| a.name.clone()).collect(),
            subject_type: entity.types.iter().next().cloned(),
            predicate: predicate.to_string(),
            urls: Vec::new(),
            reason,
            created_at: at,
            origin_event_time: None,
            event_id: None,
        }
    }

    pub fn is_search(&self) -> bool {
        self.urls.is_empty()
    }

    pub fn is_wildcard(&self) -> bool {
        self.predicate == ALL_PREDICATES
    }
}

#[derive(Debug, thiserror::Error)]
pub enum InitiatorError {
    #[error("unknown predicate {0}")]
    UnknownPredicate(String),
    #[error("{path}: {message}")]
    File { path: String, message: String },
}

/// (entity type, predicate) pairs to profile.
pub type Target = (EntityId, String);

fn check_targets(kg: &KnowledgeGraph, targets: &[Target]) -> Result<(), InitiatorError> {
    for (_, p) in targets {
        if kg.ontology().get(p).is_none() {
            return Err(InitiatorError::UnknownPredicate(p.clone()));
        }
    }
    Ok(())
}

/// One `missing` task per entity of a target type that has no latest value
/// for the target predicate.
pub fn profile_gaps(
    kg: &KnowledgeGraph,
    view: &LatestView,
    targets: &[Target],
    at: DateTime<Utc>,
) -> Result<Vec<ExtractionTask>, InitiatorError> {
    check_targets(kg, targets)?;
    let mut tasks = Vec::new();
    for (ty, predicate) in targets {
        for e in kg.entities_of_type(ty) {
            if view.by_subject_predicate(&e.id, predicate).next().is_none() {
                tasks.push(ExtractionTask::for_entity(e, predicate, TaskReason::Missing, at));
            }
        }
    }
    Ok(tasks)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetStaleness {
    pub entity_type: EntityId,
    pub predicate: String,
    pub missing: usize,
    pub stale: usize,
    /// Whole days between the KG fact being appended and the newer source
    /// revision, one entry per stale fact.
    pub lags_days: Vec<i64>,
    pub mean_lag_days: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StalenessReport {
    pub targets: Vec<TargetStaleness>,
}

/// Flags KG facts contradicted by a newer revision of the subject's page.
///
/// `doc_values` returns the normalized (predicate, value) pairs a document
/// states about a subject. A fact is stale when the subject's newest
/// document states at least one value for the predicate, none of them equal
/// to the fact's value, and that revision is newer than the fact.
pub fn detect_stale(
    kg: &KnowledgeGraph,
    view: &LatestView,
    corpus: &Corpus,
    targets: &[Target],
    doc_values: &dyn Fn(&Document, &EntityId) -> Vec<(String, Value)>,
    at: DateTime<Utc>,
) -> Result<(Vec<ExtractionTask>, StalenessReport), InitiatorError> {
    check_targets(kg, targets)?;
    let mut tasks = Vec::new();
    let mut report = StalenessReport::default();
    let mut cache: BTreeMap<(String, String, EntityId), Vec<(String, Value)>> = BTreeMap::new();
    for (ty, predicate) in targets {
        let mut entry = TargetStaleness {
            entity_type: ty.clone(),
            predicate: predicate.clone(),
            missing: 0,
            stale: 0,
            lags_days: Vec::new(),
            mean_lag_days: None,
        };
        for e in kg.entities_of_type(ty) {
            let rows: Vec<_> = view.by_subject_predicate(&e.id, predicate).collect();
            if rows.is_empty() {
                entry.missing += 1;
                continue;
            }
            let Some(doc) = corpus
                .latest_for_subject(&e.id)
                .into_iter()
                .max_by(|a, b| a.revision_time.cmp(&b.revision_time).then_with(|| b.url.cmp(&a.url)))
            else {
                continue;
            };
            let values = cache
                .entry((doc.url.clone(), doc.revision_id.clone(), e.id.clone()))
                .or_insert_with(|| doc_values(doc, &e.id));
            let stated: Vec<String> = values
                .iter()
                .filter(|(p, _)| p == predicate)
                .map(|(_, v)| v.canonical_key())
                .collect();
            if stated.is_empty() {
                continue;
            }
            let mut flagged = false;
            for row in rows {
                let differs = !stated.contains(&row.fact.object.canonical_key());
                if differs && doc.revision_time > row.appended_at {
                    entry.stale += 1;
                    entry.lags_days.push((doc.revision_time - row.appended_at).num_days());
                    flagged = true;
                }
            }
            if flagged {
                let mut task = ExtractionTask::for_entity(e, predicate, TaskReason::Stale, at);
                task.urls = vec![doc.url.clone()];
                tasks.push(task);
            }
        }
        if !entry.lags_days.is_empty() {
            entry.mean_lag_days =
                Some(entry.lags_days.iter().sum::<i64>() as f64 / entry.lags_days.len() as f64);
        }
        report.targets.push(entry);
    }
    Ok((tasks, report))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventTasks {
    pub tasks: Vec<ExtractionTask>,
    /// Events whose url has no document or no known subject.
    pub skipped: usize,
}

pub fn event_id(event: &ChangeEvent) -> String {
    format!("{}@{}", event.url, event.revision_id)
}

/// One wildcard task per (already vandalism-filtered) event, in event order.
pub fn tasks_from_events(
    events: &[ChangeEvent],
    corpus: &Corpus,
    kg: &KnowledgeGraph,
    at: DateTime<Utc>,
) -> EventTasks {
    let mut out = EventTasks::default();
    for ev in events {
        let subject = corpus
            .revision(&ev.url, &ev.revision_id)
            .and_then(|d| d.subject_hint.as_ref())
            .or_else(|| corpus.subject_of(&ev.url));
        let Some(entity) = subject.and_then(|s| kg.entity(s)) else {
            out.skipped += 1;
            continue;
        };
        let mut task = ExtractionTask::for_entity(entity, ALL_PREDICATES, TaskReason::ChangeEvent, at);
        task.urls = vec![ev.url.clone()];
        task.origin_event_time = Some(ev.event_time);
        task.event_id = Some(event_id(ev));
        out.tasks.push(task);
    }
    out
}

pub fn load_tasks(path: &Path) -> Result<Vec<ExtractionTask>, InitiatorError> {
    let err = |message: String| InitiatorError::File {
        path: path.display().to_string(),
        message,
    };
    let file = std::fs::File::open(path).map_err(|e| err(e.to_string()))?;
    let records =
        schema::read_records(BufReader::new(file), schema::TASKS).map_err(|e| err(e.to_string()))?;
    records
        .into_iter()
        .map(|(line, text)| {
            serde_json::from_str(&text).map_err(|e| err(format!("line {line}: {e}")))
        })
        .collect()
}

pub fn write_tasks(path: &Path, tasks: &[ExtractionTask]) -> std::io::Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    schema::write_header(&mut out, schema::TASKS)?;
    for t in tasks {
        writeln!(out, "{}", serde_json::to_string(t).expect("task serializes"))?;
    }
    out.flush()
}
