//! Batch mode: initiator → retriever → extractors → corroborator →
//! ingestion / curation, over the whole corpus in one pass.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::corroborator::{corroborate, normalize, CorroborationStats, HeuristicScorer, Route, ScoredFact};
use crate::curation::{generate_tasks, ApplyReport};
use crate::extractors::{
    extract_infobox, extract_links, model_extract, CandidateFact, ExtractContext,
    ModelExtractorClient, QuestionTemplates, RuleSet,
};
use crate::ingestion::{ingest_batch, Diverted, IngestSummary};
use crate::initiator::{
    detect_stale, load_tasks, profile_gaps, ExtractionTask, StalenessReport, Target, TaskReason,
    ALL_PREDICATES,
};
use crate::kg_store::{EntityId, FactStatus, KnowledgeGraph, Value};
use crate::retriever::{retrieve_crawl, retrieve_search, QueryTemplates, SearchIndex};

use super::golden::{compare_golden, load_golden, GoldenRecord, GoldenReport};
use super::ops::apply_pending_decisions;
use super::state::{run_id, write_json, PipelineState, INDEX_FILE};
use super::{Mode, PipelineError};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskCounts {
    pub missing: usize,
    pub stale: usize,
    pub escalation: usize,
    pub full_scan: usize,
    pub crawl: usize,
    pub search: usize,
    /// Search tasks with no usable query template.
    pub unsearchable: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteCounts {
    pub auto: usize,
    pub curation: usize,
    pub drop: usize,
}

impl RouteCounts {
    pub(crate) fn count(scored: &[ScoredFact]) -> Self {
        let mut c = RouteCounts::default();
        for s in scored {
            match s.route {
                Route::Auto => c.auto += 1,
                Route::Curation => c.curation += 1,
                Route::Drop => c.drop += 1,
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: String,
    pub mode: Mode,
    pub at: DateTime<Utc>,
    pub workers: usize,
    pub decisions: ApplyReport,
    pub tasks: TaskCounts,
    pub documents: usize,
    pub missing_documents: usize,
    pub extraction_errors: usize,
    pub candidates: usize,
    pub model_candidates: usize,
    pub model_deferred: usize,
    pub corroboration: CorroborationStats,
    pub routed: RouteCounts,
    pub ingest: IngestSummary,
    pub curation_tasks_added: usize,
    pub staleness: StalenessReport,
    pub golden: Option<GoldenReport>,
    pub extraction_seconds: f64,
    pub facts_per_minute: f64,
    pub elapsed_seconds: f64,
}

#[derive(Default)]
struct Plan<'c> {
    all_predicates: bool,
    predicates: BTreeSet<String>,
    /// Subject pages: pattern and link extraction.
    docs: BTreeMap<(String, String), &'c Document>,
    /// Predicates that may fall back to the model extractor.
    model_predicates: BTreeSet<String>,
    /// Pages with no known subject: model extraction only.
    model_docs: BTreeMap<(String, String), &'c Document>,
}

impl<'c> Plan<'c> {
    fn want(&mut self, task: &ExtractionTask) {
        if task.is_wildcard() {
            self.all_predicates = true;
        } else {
            self.predicates.insert(task.predicate.clone());
        }
    }

    fn wants(&self, predicate: &str) -> bool {
        self.all_predicates || self.predicates.contains(predicate)
    }
}

fn doc_key(d: &Document) -> (String, String) {
    (d.url.clone(), d.revision_id.clone())
}

/// Pattern and link candidates for `subject` from one page.
pub(crate) fn extract_page(
    doc: &Document,
    subject: &EntityId,
    rules: &RuleSet,
    ctx: &ExtractContext<'_>,
) -> Result<Vec<CandidateFact>, crate::extractors::ExtractError> {
    let mut out = extract_infobox(doc, rules, subject, ctx)?;
    out.extend(extract_links(doc, rules, subject, ctx)?);
    Ok(out)
}

fn full_scan_tasks(corpus: &Corpus, kg: &KnowledgeGraph, at: DateTime<Utc>) -> Vec<ExtractionTask> {
    let mut by_subject: BTreeMap<&EntityId, Vec<String>> = BTreeMap::new();
    for d in corpus.latest_documents() {
        if let Some(s) = d.subject_hint.as_ref().filter(|s| kg.contains(s)) {
            by_subject.entry(s).or_default().push(d.url.clone());
        }
    }
    by_subject
        .into_iter()
        .map(|(s, urls)| {
            let entity = kg.entity(s).expect("checked above");
            let mut t = ExtractionTask::for_entity(entity, ALL_PREDICATES, TaskReason::FullScan, at);
            t.urls = urls;
            t
        })
        .collect()
}

pub(crate) fn diverted_as_scored(d: Diverted) -> ScoredFact {
    ScoredFact {
        score: d.fact.confidence,
        fact: d.fact,
        rank: 1,
        route: Route::Curation,
        support: 1,
        distinct_sources: 1,
        mention_options: d.options,
    }
}

fn targets(state: &PipelineState) -> Result<Vec<Target>, PipelineError> {
    state
        .config
        .targets
        .iter()
        .map(|t| {
            EntityId::new(t.entity_type.clone())
                .map(|ty| (ty, t.predicate.clone()))
                .map_err(|_| PipelineError::Validation("empty target type".into()))
        })
        .collect()
}

/// Runs one batch pass. `model` is consulted for search tasks whose
/// predicate no pattern rule covered in the retrieved pages.
pub fn run_batch(
    state: &mut PipelineState,
    at: DateTime<Utc>,
    model: Option<&dyn ModelExtractorClient>,
) -> Result<RunReport, PipelineError> {
    let started = Instant::now();
    let cfg = state.config.clone();
    let run_id = run_id(&cfg, "batch", at);
    let decisions = apply_pending_decisions(state, &run_id, at)?;

    let targets = targets(state)?;
    let PipelineState {
        kg,
        store,
        corpus,
        rules,
        locales,
        tasks: task_store,
        ..
    } = state;
    let (corpus, rules, locales): (&Corpus, &RuleSet, &_) = (corpus, rules, locales);
    let ctx = ExtractContext {
        ontology: kg.ontology(),
        locales,
        run_id: &run_id,
        extracted_at: at,
    };

    // Initiator.
    let mut counts = TaskCounts::default();
    let mut tasks = profile_gaps(kg, store.view(), &targets, at)
        .map_err(|e| PipelineError::Validation(e.to_string()))?;
    counts.missing = tasks.len();
    let doc_values = |doc: &Document, subject: &EntityId| -> Vec<(String, Value)> {
        extract_page(doc, subject, rules, &ctx)
            .unwrap_or_default()
            .iter()
            .filter_map(|c| normalize(c, kg.ontology(), locales).ok())
            .map(|n| (n.candidate.predicate.clone(), n.value))
            .collect()
    };
    let (stale, staleness) = detect_stale(kg, store.view(), corpus, &targets, &doc_values, at)
        .map_err(|e| PipelineError::Validation(e.to_string()))?;
    counts.stale = stale.len();
    tasks.extend(stale);
    if let Some(path) = &cfg.paths.escalations {
        let esc = load_tasks(path).map_err(|e| PipelineError::Validation(e.to_string()))?;
        counts.escalation = esc.len();
        tasks.extend(esc);
    }
    if cfg.full_scan {
        let scan = full_scan_tasks(corpus, kg, at);
        counts.full_scan = scan.len();
        tasks.extend(scan);
    }

    // Retriever.
    let templates = cfg
        .paths
        .query_templates
        .as_ref()
        .map(|p| QueryTemplates::load(p))
        .transpose()
        .map_err(|e| PipelineError::Validation(e.to_string()))?;
    let index = SearchIndex::build(corpus);
    index
        .save(&cfg.paths.state_dir.join(INDEX_FILE))
        .map_err(|e| PipelineError::stage("retriever", e))?;
    let mut plans: BTreeMap<EntityId, Plan<'_>> = BTreeMap::new();
    let mut missing_documents = 0;
    for task in &tasks {
        if !kg.contains(&task.subject) {
            tracing::warn!(subject = %task.subject, "task for unknown subject skipped");
            continue;
        }
        let plan = plans.entry(task.subject.clone()).or_default();
        plan.want(task);
        if !task.is_search() {
            counts.crawl += 1;
            let crawl = retrieve_crawl(task, corpus);
            missing_documents += crawl.missing.len();
            for d in crawl.documents {
                plan.docs.insert(doc_key(d), d);
            }
            continue;
        }
        counts.search += 1;
        let Some(templates) = &templates else {
            counts.unsearchable += 1;
            continue;
        };
        match retrieve_search(task, templates, &cfg.languages, &index, corpus, cfg.search_k) {
            Ok(docs) => {
                if !task.is_wildcard() {
                    plan.model_predicates.insert(task.predicate.clone());
                }
                for d in docs {
                    match &d.subject_hint {
                        Some(s) if s == &task.subject => {
                            plan.docs.insert(doc_key(d), d);
                        }
                        None => {
                            plan.model_docs.insert(doc_key(d), d);
                        }
                        Some(_) => {}
                    }
                }
            }
            Err(e) => {
                tracing::debug!(subject = %task.subject, error = %e, "no search query");
                counts.unsearchable += 1;
            }
        }
    }
    let documents: BTreeSet<&(String, String)> = plans
        .values()
        .flat_map(|p| p.docs.keys().chain(p.model_docs.keys()))
        .collect();
    let documents = documents.len();

    // Pattern and link extraction, one subject per work item.
    let extraction_started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| PipelineError::stage("extractors", e))?;
    let work: Vec<(&EntityId, &Plan<'_>)> = plans.iter().collect();
    let results: Vec<(Vec<CandidateFact>, usize)> = pool.install(|| {
        work.par_iter()
            .map(|(subject, plan)| {
                let mut out = Vec::new();
                let mut errors = 0;
                for doc in plan.docs.values() {
                    match extract_page(doc, subject, rules, &ctx) {
                        Ok(c) => out.extend(c.into_iter().filter(|c| plan.wants(&c.predicate))),
                        Err(e) => {
                            tracing::warn!(url = %e.url, reason = %e.reason, "extraction failed");
                            errors += 1;
                        }
                    }
                }
                (out, errors)
            })
            .collect()
    });
    let extraction_seconds = extraction_started.elapsed().as_secs_f64();
    let mut candidates = Vec::new();
    let mut extraction_errors = 0;
    for (c, e) in results {
        candidates.extend(c);
        extraction_errors += e;
    }
    let pattern_candidates = candidates.len();

    // Model fallback for predicates the patterns did not cover.
    let mut model_candidates = 0;
    let mut model_deferred = 0;
    let questions = match (&model, &cfg.paths.questions) {
        (Some(_), Some(p)) => Some(QuestionTemplates::load(p).map_err(PipelineError::Validation)?),
        _ => None,
    };
    if let (Some(client), Some(questions)) = (model, &questions) {
        let covered: BTreeSet<(EntityId, String)> = candidates
            .iter()
            .map(|c| (c.subject.clone(), c.predicate.clone()))
            .collect();
        for (subject, plan) in &plans {
            let entity = kg.entity(subject).expect("planned subjects exist");
            for predicate in &plan.model_predicates {
                if covered.contains(&(subject.clone(), predicate.clone())) {
                    continue;
                }
                for doc in plan.model_docs.values().chain(plan.docs.values()) {
                    let out = model_extract(client, questions, entity, predicate, doc, &ctx);
                    if out.deferred {
                        model_deferred += 1;
                        break;
                    }
                    model_candidates += out.candidates.len();
                    candidates.extend(out.candidates);
                }
            }
        }
    }

    // Corroborate and route.
    let scorer = HeuristicScorer {
        weights: cfg.scoring.weights.clone(),
    };
    let (scored, corroboration) = corroborate(&candidates, kg, locales, &cfg.scoring, &scorer);
    let routed = RouteCounts::count(&scored);
    let auto: Vec<_> = scored
        .iter()
        .filter(|s| s.route == Route::Auto)
        .map(|s| {
            let mut f = s.fact.clone();
            f.status = FactStatus::AutoIngested;
            f
        })
        .collect();
    let report = ingest_batch(auto, kg, store, &run_id, at).map_err(|e| PipelineError::stage("ingestion", e))?;
    let mut to_curate: Vec<ScoredFact> =
        scored.iter().filter(|s| s.route == Route::Curation).cloned().collect();
    to_curate.extend(report.diverted.iter().cloned().map(diverted_as_scored));
    let curation = generate_tasks(&to_curate, kg, store.view(), Some(corpus), at);
    let curation_tasks_added = task_store
        .add_tasks(curation)
        .map_err(|e| PipelineError::stage("curation", e))?;

    let golden = match &cfg.paths.golden {
        Some(p) => {
            let expected = load_golden(p)?;
            let produced: Vec<GoldenRecord> = scored
                .iter()
                .filter(|s| s.route != Route::Drop)
                .map(GoldenRecord::from_scored)
                .collect();
            Some(compare_golden(&expected, &produced))
        }
        None => None,
    };

    let facts_per_minute = if extraction_seconds > 0.0 {
        pattern_candidates as f64 / extraction_seconds * 60.0
    } else {
        0.0
    };
    let out = RunReport {
        run_id: run_id.clone(),
        mode: Mode::Batch,
        at,
        workers: cfg.workers,
        decisions,
        tasks: counts,
        documents,
        missing_documents,
        extraction_errors,
        candidates: candidates.len(),
        model_candidates,
        model_deferred,
        corroboration,
        routed,
        ingest: report.summary,
        curation_tasks_added,
        staleness,
        golden,
        extraction_seconds,
        facts_per_minute,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    };
    state.save_graph()?;
    write_json(&state.run_dir(&run_id).join("report.json"), &out)?;
    Ok(out)
}
