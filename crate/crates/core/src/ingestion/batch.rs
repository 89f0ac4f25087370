//! Entity resolution, validation and append of routed facts.

use serde::{Deserialize, Serialize};

use crate::extractors::validate_fact;
use crate::kg_store::{
    EntityId, Fact, FactStatus, FactStore, KgError, KnowledgeGraph, LatestView, LogError,
    Resolution, Value, ValueKind, VersionedFactRow,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub appended: usize,
    /// Ambiguous entity mentions sent to curation.
    pub diverted: usize,
    pub rejected: usize,
    /// Already current in the view, or superseded by a curator decision.
    pub unchanged: usize,
    pub created_entities: usize,
}

impl IngestSummary {
    pub fn total(&self) -> usize {
        self.appended + self.diverted + self.rejected + self.unchanged
    }

    pub fn add(&mut self, other: &IngestSummary) {
        self.appended += other.appended;
        self.diverted += other.diverted;
        self.rejected += other.rejected;
        self.unchanged += other.unchanged;
        self.created_entities += other.created_entities;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diverted {
    pub fact: Fact,
    pub options: Vec<EntityId>,
}

#[derive(Debug, Default)]
pub struct IngestReport {
    pub summary: IngestSummary,
    pub rows: Vec<VersionedFactRow>,
    pub diverted: Vec<Diverted>,
    pub rejected: Vec<(Fact, String)>,
}

pub(crate) enum Prepared {
    Ready(Fact),
    Diverted(Diverted),
    Rejected(Fact, String),
    Unchanged,
}

/// Resolves a textual object in an entity slot, minting an entity typed with
/// the predicate's first allowed object type when nothing matches.
fn resolve_object(fact: &mut Fact, kg: &mut KnowledgeGraph) -> Result<Option<Vec<EntityId>>, String> {
    let Some(predicate) = kg.ontology().get(&fact.predicate) else {
        return Err(format!("unknown predicate {}", fact.predicate));
    };
    if predicate.value_kind != ValueKind::EntityRef {
        return Ok(None);
    }
    let Value::Text { text, .. } = &fact.object else {
        return Ok(None);
    };
    let hint = predicate.allowed_object_types.iter().next().cloned();
    match kg.resolve_entity(text, &[], hint.as_ref(), None) {
        Ok(Resolution::Existing(id)) | Ok(Resolution::Created(id)) => {
            fact.object = Value::entity(id);
            Ok(None)
        }
        Ok(Resolution::Ambiguous(options)) => Ok(Some(options)),
        Err(e @ KgError::Untyped(_)) | Err(e @ KgError::EmptyName) => Err(e.to_string()),
        Err(e) => Err(e.to_string()),
    }
}

fn is_automatic(status: FactStatus) -> bool {
    matches!(status, FactStatus::AutoIngested | FactStatus::Inferred)
}

pub(crate) fn prepare(mut fact: Fact, kg: &mut KnowledgeGraph, view: &LatestView) -> Prepared {
    match resolve_object(&mut fact, kg) {
        Ok(None) => {}
        Ok(Some(options)) => return Prepared::Diverted(Diverted { fact, options }),
        Err(reason) => return Prepared::Rejected(fact, reason),
    }
    if let Err(v) = validate_fact(&fact, kg) {
        return Prepared::Rejected(fact, v.to_string());
    }
    let key = kg.ontology().key_for(&fact).expect("validated predicate");
    let value_key = fact.object.canonical_key();
    if is_automatic(fact.status) && view.is_rejected_value(&key, &value_key) {
        return Prepared::Unchanged;
    }
    if let Some(current) = view.fact(&key) {
        let same_value = current.object.canonical_key() == value_key;
        if same_value && (current.status == fact.status || is_automatic(fact.status)) {
            return Prepared::Unchanged;
        }
        if current.status == FactStatus::CuratedAccepted && is_automatic(fact.status) {
            return Prepared::Unchanged;
        }
    }
    Prepared::Ready(fact)
}

/// Appends facts routed for ingestion (auto-ingested, curator-accepted or
/// inferred). Every input fact lands in exactly one summary bucket.
pub fn ingest_batch(
    facts: Vec<Fact>,
    kg: &mut KnowledgeGraph,
    store: &mut FactStore,
    run_id: &str,
    at: chrono::DateTime<chrono::Utc>,
) -> Result<IngestReport, LogError> {
    let mut report = IngestReport::default();
    let before = kg.len();
    let mut ready = Vec::new();
    let mut staged = std::collections::HashMap::new();
    for fact in facts {
        match prepare(fact, kg, store.view()) {
            Prepared::Ready(f) => {
                // A repeat of a value staged earlier in this batch is a no-op.
                let key = (kg.ontology().key_for(&f).expect("validated predicate"), f.status);
                let vk = f.object.canonical_key();
                if staged.get(&key) == Some(&vk) {
                    report.summary.unchanged += 1;
                } else {
                    staged.insert(key, vk);
                    ready.push(f);
                }
            }
            Prepared::Diverted(d) => report.diverted.push(d),
            Prepared::Rejected(f, why) => report.rejected.push((f, why)),
            Prepared::Unchanged => report.summary.unchanged += 1,
        }
    }
    let outcome = store.append(&ready, run_id, at, kg)?;
    for (i, v) in outcome.rejected {
        report.rejected.push((ready[i].clone(), v.to_string()));
    }
    report.summary.appended = outcome.rows.len();
    report.summary.diverted = report.diverted.len();
    report.summary.rejected = report.rejected.len();
    report.summary.created_entities = kg.len() - before;
    report.rows = outcome.rows;
    Ok(report)
}
