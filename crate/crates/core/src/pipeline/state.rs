//! Everything a run needs, loaded from the config and the state directory:
//! `entities.jsonl` (graph incl. minted entities), `facts.log`, `curation/`,
//! `search.idx`, `view.jsonl` and `runs/<run_id>/`.

use std::path::PathBuf;
use std::sync::Arc;

use chrono::{DateTime, Utc};

use crate::corpus::Corpus;
use crate::curation::TaskStore;
use crate::extractors::{compile_rules, load_rule_file, ExtractContext, RuleSet};
use crate::ingestion::ingest_batch;
use crate::kg_store::{Fact, FactStore, KnowledgeGraph, Ontology};
use crate::locale::LocaleSet;
use crate::schema;

use super::{PipelineConfig, PipelineError};

pub const ENTITIES_FILE: &str = "entities.jsonl";
pub const FACT_LOG_FILE: &str = "facts.log";
pub const INDEX_FILE: &str = "search.idx";
pub const VIEW_FILE: &str = "view.jsonl";
const CURATION_DIR: &str = "curation";
const SEED_RUN: &str = "seed";

pub struct PipelineState {
    pub config: PipelineConfig,
    pub kg: KnowledgeGraph,
    pub store: FactStore,
    pub corpus: Corpus,
    pub rules: RuleSet,
    pub locales: LocaleSet,
    pub tasks: TaskStore,
}

fn load_seed_facts(path: &std::path::Path) -> Result<Vec<Fact>, PipelineError> {
    let file = std::fs::File::open(path).map_err(|e| PipelineError::stage("seed", e))?;
    let records = schema::read_records(std::io::BufReader::new(file), schema::FACTS)
        .map_err(|e| PipelineError::stage("seed", format!("{}: {e}", path.display())))?;
    records
        .into_iter()
        .map(|(line, text)| {
            serde_json::from_str(&text).map_err(|e| {
                PipelineError::stage("seed", format!("{} line {line}: {e}", path.display()))
            })
        })
        .collect()
}

impl PipelineState {
    /// Validates the config and loads inputs. A fresh state directory gets
    /// the seed graph and, if configured, the seed facts.
    pub fn open(config: PipelineConfig, at: DateTime<Utc>) -> Result<Self, PipelineError> {
        config.validate()?;
        let p = &config.paths;
        let ontology =
            Arc::new(Ontology::load(&p.ontology).map_err(|e| PipelineError::Validation(e.to_string()))?);
        let files = p
            .rules
            .iter()
            .map(|r| load_rule_file(r))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| PipelineError::Validation(e.to_string()))?;
        let rules =
            compile_rules(&files, &ontology).map_err(|e| PipelineError::Validation(e.to_string()))?;
        for w in rules.warnings() {
            tracing::warn!("{w}");
        }
        let locales = match &p.locales {
            Some(dir) => LocaleSet::load_dir(dir).map_err(|e| PipelineError::Validation(e.to_string()))?,
            None => LocaleSet::builtin(),
        };
        let corpus = Corpus::load(&p.corpus).map_err(|e| PipelineError::Validation(e.to_string()))?;

        std::fs::create_dir_all(&p.state_dir).map_err(|e| PipelineError::stage("state", e))?;
        let entities = p.state_dir.join(ENTITIES_FILE);
        let kg_source = if entities.exists() { &entities } else { &p.kg };
        let mut kg = KnowledgeGraph::load(ontology, kg_source)
            .map_err(|e| PipelineError::Validation(e.to_string()))?;
        let mut store = FactStore::open(&p.state_dir.join(FACT_LOG_FILE))
            .map_err(|e| PipelineError::stage("fact log", e))?;
        if let (Some(seed), true) = (&p.seed_facts, store.log().scan().map(|r| r.is_empty()).unwrap_or(false)) {
            let facts = load_seed_facts(seed)?;
            let report = ingest_batch(facts, &mut kg, &mut store, SEED_RUN, at)
                .map_err(|e| PipelineError::stage("seed", e))?;
            if !report.rejected.is_empty() {
                return Err(PipelineError::Validation(format!(
                    "seed fact rejected: {}",
                    report.rejected[0].1
                )));
            }
        }
        let tasks = TaskStore::open(&p.state_dir.join(CURATION_DIR))
            .map_err(|e| PipelineError::stage("curation", e))?;
        Ok(PipelineState {
            config,
            kg,
            store,
            corpus,
            rules,
            locales,
            tasks,
        })
    }

    pub fn state_dir(&self) -> &std::path::Path {
        &self.config.paths.state_dir
    }

    pub fn run_dir(&self, run_id: &str) -> PathBuf {
        self.state_dir().join("runs").join(run_id)
    }

    pub fn save_graph(&self) -> Result<(), PipelineError> {
        self.kg
            .save(&self.state_dir().join(ENTITIES_FILE))
            .map_err(|e| PipelineError::stage("state", e))
    }

    pub fn extract_context<'a>(&'a self, run_id: &'a str, at: DateTime<Utc>) -> ExtractContext<'a> {
        ExtractContext {
            ontology: self.kg.ontology(),
            locales: &self.locales,
            run_id,
            extracted_at: at,
        }
    }
}

/// `config.run_id`, or `<mode>-<timestamp>`.
pub(crate) fn run_id(config: &PipelineConfig, prefix: &str, at: DateTime<Utc>) -> String {
    config
        .run_id
        .clone()
        .unwrap_or_else(|| format!("{prefix}-{}", at.format("%Y%m%dT%H%M%SZ")))
}

pub(crate) fn write_json<T: serde::Serialize>(path: &std::path::Path, value: &T) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::stage("report", e))?;
    }
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    std::fs::write(path, text + "\n").map_err(|e| PipelineError::stage("report", e))
}
