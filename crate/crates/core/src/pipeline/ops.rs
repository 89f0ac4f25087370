//! Maintenance operations over an opened state.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::curation::{apply_decisions, ApplyReport, StoreStats};
use crate::ingestion::IngestSummary;
use crate::kg_store::{FactStatus, LatestView};
use crate::link_inference::{apply_inferred, infer_completeness, infer_correctness, LinkRules};

use super::state::{run_id, write_json, PipelineState, VIEW_FILE};
use super::PipelineError;

/// Applies every journaled decision not yet reflected in the log.
pub fn apply_pending_decisions(
    state: &mut PipelineState,
    run_id: &str,
    at: DateTime<Utc>,
) -> Result<ApplyReport, PipelineError> {
    let decisions = state.tasks.decisions();
    let report = apply_decisions(&decisions, &state.tasks, &mut state.kg, &mut state.store, run_id, at)
        .map_err(|e| PipelineError::stage("curation", e))?;
    for (id, why) in &report.errors {
        tracing::warn!(decision = %id, reason = %why, "decision not applied");
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub run_id: String,
    pub rules: usize,
    pub inferred: usize,
    pub corrections: usize,
    pub missing_condition: usize,
    pub type_violations: usize,
    /// Completeness and correction appends together.
    pub appended: usize,
    pub summary: IngestSummary,
    pub by_rule: BTreeMap<String, usize>,
}

/// Completeness pass, then correctness pass on the updated view.
pub fn run_link_inference(state: &mut PipelineState, at: DateTime<Utc>) -> Result<InferenceReport, PipelineError> {
    let path = state
        .config
        .paths
        .link_rules
        .clone()
        .ok_or_else(|| PipelineError::Validation("paths.link_rules is not set".into()))?;
    let rules = LinkRules::load(&path, &state.kg).map_err(|e| PipelineError::Validation(e.to_string()))?;
    let run_id = run_id(&state.config, "infer", at);

    let complete = infer_completeness(state.store.view(), &state.kg, &rules, &run_id, at);
    let mut by_rule = BTreeMap::new();
    for f in &complete.inferred {
        *by_rule.entry(f.rule_id.clone()).or_insert(0) += 1;
    }
    let facts = complete.inferred.iter().map(|f| f.fact.clone()).collect();
    let mut summary = apply_inferred(facts, &mut state.kg, &mut state.store, &run_id, at)
        .map_err(|e| PipelineError::stage("link inference", e))?
        .summary;

    let corrections = infer_correctness(
        state.store.view(),
        &state.kg,
        &rules,
        state.config.inference.high_confidence,
        &run_id,
        at,
    );
    let facts = corrections.iter().map(|c| c.inferred.fact.clone()).collect();
    let fixed = apply_inferred(facts, &mut state.kg, &mut state.store, &run_id, at)
        .map_err(|e| PipelineError::stage("link inference", e))?;
    summary.add(&fixed.summary);

    let report = InferenceReport {
        run_id: run_id.clone(),
        rules: rules.rules().len(),
        inferred: complete.inferred.len(),
        corrections: corrections.len(),
        missing_condition: complete.missing_condition,
        type_violations: complete.type_violations,
        appended: summary.appended,
        summary,
        by_rule,
    };
    write_json(&state.run_dir(&run_id).join("inference.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterializeReport {
    pub path: String,
    pub facts: usize,
}

/// Rebuilds the view from a full log scan and writes it as an artifact.
pub fn materialize(state: &mut PipelineState) -> Result<MaterializeReport, PipelineError> {
    let path = state.state_dir().join(VIEW_FILE);
    let view = state
        .store
        .rematerialize()
        .map_err(|e| PipelineError::stage("materialize", e))?;
    view.write_artifact(&path)
        .map_err(|e| PipelineError::stage("materialize", e))?;
    Ok(MaterializeReport {
        path: path.display().to_string(),
        facts: view.len(),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub entities: usize,
    pub minted_entities: usize,
    pub log_rows: usize,
    pub view_facts: usize,
    pub by_status: BTreeMap<String, usize>,
    pub by_predicate: BTreeMap<String, usize>,
    pub curation: StoreStats,
    pub runs: Vec<String>,
}

fn status_name(s: FactStatus) -> String {
    serde_json::to_value(s)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn view_counts(view: &LatestView, stats: &mut Stats) {
    stats.view_facts = view.len();
    for r in view.rows() {
        *stats.by_status.entry(status_name(r.fact.status)).or_insert(0) += 1;
        *stats.by_predicate.entry(r.fact.predicate.clone()).or_insert(0) += 1;
    }
}

pub fn stats(state: &PipelineState) -> Result<Stats, PipelineError> {
    let mut s = Stats {
        entities: state.kg.len(),
        minted_entities: state.kg.entities().filter(|e| e.id.is_internal()).count(),
        curation: state.tasks.stats(),
        ..Stats::default()
    };
    state
        .store
        .log()
        .for_each_row(|_| s.log_rows += 1)
        .map_err(|e| PipelineError::stage("stats", e))?;
    view_counts(state.store.view(), &mut s);
    if let Ok(entries) = std::fs::read_dir(state.state_dir().join("runs")) {
        s.runs = entries
            .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
            .collect();
        s.runs.sort();
    }
    Ok(s)
}
