//! Feeding decisions back into the fact log.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::ingestion::{ingest_batch, IngestSummary};
use crate::kg_store::{
    Fact, FactLog, FactStatus, FactStore, KnowledgeGraph, LogError, Provenance, Span, Value,
};
use crate::units;

use super::{CurationTask, Decision, TaskStore, Verdict};

pub const CURATION_EXTRACTOR: &str = "curation";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ApplyReport {
    pub summary: IngestSummary,
    pub applied: Vec<String>,
    /// Decisions whose rows are already in the log.
    pub already_applied: Vec<String>,
    /// (decision id, reason) for decisions that could not be applied.
    pub errors: Vec<(String, String)>,
}

/// Decision ids that already have rows in the log.
pub fn applied_decision_ids(log: &FactLog) -> Result<BTreeSet<String>, LogError> {
    let mut ids = BTreeSet::new();
    log.for_each_row(|row| {
        for p in &row.fact.provenance {
            if let (CURATION_EXTRACTOR, Span::Derived { from }) = (p.extractor_id.as_str(), &p.span) {
                ids.insert(from.clone());
            }
        }
    })?;
    Ok(ids)
}

fn curator_provenance(d: &Decision, run_id: &str) -> Provenance {
    Provenance {
        source_url: format!("curator:{}", d.curator_id),
        revision_id: String::new(),
        span: Span::Derived {
            from: d.decision_id.clone(),
        },
        extractor_id: CURATION_EXTRACTOR.to_string(),
        extracted_at: d.decided_at,
        pipeline_run_id: run_id.to_string(),
    }
}

/// Quantities typed by a curator may use any unit of the right dimension.
fn canonicalize(value: Value, kg: &KnowledgeGraph, predicate: &str) -> Value {
    let dim = kg.ontology().get(predicate).and_then(|p| p.unit_dimension);
    match &value {
        Value::Quantity { magnitude, unit } => match units::to_canonical(*magnitude, unit, dim) {
            Ok(v) => Value::quantity(units::round1(v), units::canonical_unit(dim)),
            Err(_) => value,
        },
        _ => value,
    }
}

fn facts_for(
    d: &Decision,
    task: &CurationTask,
    kg: &KnowledgeGraph,
    store: &FactStore,
    run_id: &str,
) -> Result<Vec<Fact>, String> {
    let curator = curator_provenance(d, run_id);
    let fact = |value: Value, status: FactStatus, mut provenance: Vec<Provenance>, language: &str| {
        provenance.push(curator.clone());
        Fact {
            subject: task.subject.id.clone(),
            predicate: task.predicate.clone(),
            object: value,
            confidence: 1.0,
            provenance,
            language: language.to_string(),
            status,
        }
    };
    match &d.verdict {
        Verdict::Accept { cluster_id } => {
            let c = task
                .cluster(*cluster_id)
                .ok_or_else(|| format!("task {} has no cluster {cluster_id}", task.task_id))?;
            Ok(vec![fact(
                c.value.clone(),
                FactStatus::CuratedAccepted,
                c.provenance.clone(),
                &c.language,
            )])
        }
        Verdict::Amend { value } => {
            let first = task.clusters.first();
            Ok(vec![fact(
                canonicalize(value.clone(), kg, &task.predicate),
                FactStatus::CuratedAccepted,
                first.map(|c| c.provenance.clone()).unwrap_or_default(),
                first.map_or("und", |c| c.language.as_str()),
            )])
        }
        Verdict::RejectAll => {
            let mut out = Vec::new();
            let mut tombstones = Vec::new();
            for c in &task.clusters {
                let rejected = fact(
                    c.value.clone(),
                    FactStatus::CuratedRejected,
                    c.provenance.clone(),
                    &c.language,
                );
                // Retract the key too when its live value is being rejected.
                if let Some(key) = kg.ontology().key_for(&rejected) {
                    if store.view().fact(&key).is_some_and(|cur| cur.object == c.value) {
                        tombstones.push(Fact {
                            status: FactStatus::Retracted,
                            ..rejected.clone()
                        });
                    }
                }
                out.push(rejected);
            }
            out.extend(tombstones);
            Ok(out)
        }
    }
}

/// Appends the rows implied by each decision: the accepted or amended value
/// with confidence 1.0, or rejection rows plus a tombstone for a rejected
/// live value. A decision whose rows are already in the log is skipped, so
/// re-applying is a no-op.
pub fn apply_decisions(
    decisions: &[Decision],
    tasks: &TaskStore,
    kg: &mut KnowledgeGraph,
    store: &mut FactStore,
    run_id: &str,
    at: DateTime<Utc>,
) -> Result<ApplyReport, LogError> {
    let mut report = ApplyReport::default();
    let mut done = applied_decision_ids(store.log())?;
    for d in decisions {
        if done.contains(&d.decision_id) {
            report.already_applied.push(d.decision_id.clone());
            continue;
        }
        let Some((task, _)) = tasks.get(&d.task_id) else {
            report
                .errors
                .push((d.decision_id.clone(), format!("dangling task {}", d.task_id)));
            continue;
        };
        let facts = match facts_for(d, &task, kg, store, run_id) {
            Ok(f) => f,
            Err(e) => {
                report.errors.push((d.decision_id.clone(), e));
                continue;
            }
        };
        let r = ingest_batch(facts, kg, store, run_id, at)?;
        report.summary.add(&r.summary);
        if let Some((_, why)) = r.rejected.first() {
            report.errors.push((d.decision_id.clone(), why.clone()));
        } else if !r.diverted.is_empty() {
            report
                .errors
                .push((d.decision_id.clone(), "amended name is ambiguous".into()));
        } else {
            report.applied.push(d.decision_id.clone());
        }
        done.insert(d.decision_id.clone());
    }
    Ok(report)
}
