//! Pipeline configuration (TOML). Relative paths resolve against the
//! directory of the config file.
//!
//! ```toml
//! mode = "batch"
//! workers = 1
//! now = "2024-06-01T00:00:00Z"
//! languages = ["en", "es"]
//!
//! [paths]
//! ontology = "ontology.json"
//! kg = "kg_seed.jsonl"
//! corpus = "corpus.jsonl"
//! rules = ["rules/en.json", "rules/es.json"]
//! state_dir = "state"
//!
//! [scoring]
//! auto_threshold = 0.8
//! ```

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::corroborator::ScoringConfig;

use super::PipelineError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Batch,
    Stream,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub ontology: PathBuf,
    pub kg: PathBuf,
    pub corpus: PathBuf,
    #[serde(default)]
    pub rules: Vec<PathBuf>,
    pub state_dir: PathBuf,
    #[serde(default)]
    pub feed: Option<PathBuf>,
    /// Facts loaded into an empty log before the first run.
    #[serde(default)]
    pub seed_facts: Option<PathBuf>,
    #[serde(default)]
    pub link_rules: Option<PathBuf>,
    #[serde(default)]
    pub query_templates: Option<PathBuf>,
    #[serde(default)]
    pub questions: Option<PathBuf>,
    #[serde(default)]
    pub escalations: Option<PathBuf>,
    #[serde(default)]
    pub golden: Option<PathBuf>,
    /// Directory of extra locale tables; the built-in ones are always loaded.
    #[serde(default)]
    pub locales: Option<PathBuf>,
}

/// (entity type, predicate) pair profiled for gaps and staleness.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    #[serde(rename = "type")]
    pub entity_type: String,
    pub predicate: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectDelay {
    /// `url@revision_id` of the event whose processing is held back.
    pub event: String,
    pub minutes: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamConfig {
    pub sla_minutes: f64,
    pub poll_interval_minutes: i64,
    /// Simulated time from a poll to its facts being ready for ingestion.
    pub processing_minutes: i64,
    pub queue_capacity: usize,
    /// Facts of these predicates are enqueued ahead of the rest of a poll.
    pub priority_predicates: Vec<String>,
    /// First poll time; defaults to the first event's time.
    pub start: Option<DateTime<Utc>>,
    pub inject_delay: Vec<InjectDelay>,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            sla_minutes: 240.0,
            poll_interval_minutes: 60,
            processing_minutes: 30,
            queue_capacity: 256,
            priority_predicates: Vec::new(),
            start: None,
            inject_delay: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceConfig {
    /// Source confidence needed before a rule may correct existing facts.
    pub high_confidence: f64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig { high_confidence: 0.9 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Base URL of a question-answering service; unset disables the model
    /// extractor.
    pub endpoint: Option<String>,
    pub timeout_ms: Option<u64>,
}

fn default_workers() -> usize {
    1
}

fn default_search_k() -> usize {
    5
}

fn default_languages() -> Vec<String> {
    vec!["en".into()]
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_search_k")]
    pub search_k: usize,
    #[serde(default = "default_languages")]
    pub languages: Vec<String>,
    /// Timestamp for batch runs; the wall clock is used when unset.
    #[serde(default)]
    pub now: Option<DateTime<Utc>>,
    #[serde(default)]
    pub run_id: Option<String>,
    /// Crawl every subject that has documents, not only the gaps.
    #[serde(default = "default_true")]
    pub full_scan: bool,
    #[serde(default)]
    pub targets: Vec<TargetSpec>,
    pub paths: Paths,
    #[serde(default)]
    pub scoring: ScoringConfig,
    #[serde(default)]
    pub stream: StreamConfig,
    #[serde(default)]
    pub inference: InferenceConfig,
    #[serde(default)]
    pub model: ModelConfig,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let mut cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| PipelineError::Validation(e.to_string()))?;
        let p = &mut cfg.paths;
        for path in [&mut p.ontology, &mut p.kg, &mut p.corpus, &mut p.state_dir] {
            resolve(base, path);
        }
        for path in p.rules.iter_mut() {
            resolve(base, path);
        }
        for path in [
            &mut p.feed,
            &mut p.seed_facts,
            &mut p.link_rules,
            &mut p.query_templates,
            &mut p.questions,
            &mut p.escalations,
            &mut p.golden,
            &mut p.locales,
        ]
        .into_iter()
        .flatten()
        {
            resolve(base, path);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Validation(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    /// Checks everything that can be checked without doing work.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Validation(m));
        let p = &self.paths;
        let mut required: Vec<(&str, &Path)> = vec![
            ("ontology", &p.ontology),
            ("kg", &p.kg),
            ("corpus", &p.corpus),
        ];
        required.extend(p.rules.iter().map(|r| ("rules", r.as_path())));
        for (name, opt) in [
            ("feed", &p.feed),
            ("seed_facts", &p.seed_facts),
            ("link_rules", &p.link_rules),
            ("query_templates", &p.query_templates),
            ("questions", &p.questions),
            ("escalations", &p.escalations),
            ("golden", &p.golden),
            ("locales", &p.locales),
        ] {
            if let Some(path) = opt {
                required.push((name, path));
            }
        }
        for (name, path) in required {
            if !path.exists() {
                return bad(format!("{name} path {} does not exist", path.display()));
            }
        }
        if p.rules.is_empty() {
            return bad("at least one rules file is required".into());
        }
        if self.mode == Mode::Stream && p.feed.is_none() {
            return bad("stream mode needs paths.feed".into());
        }
        let s = &self.scoring;
        if !(0.0 <= s.curation_floor && s.curation_floor < s.auto_threshold && s.auto_threshold <= 1.0) {
            return bad(format!(
                "thresholds must satisfy 0 <= curation_floor ({}) < auto_threshold ({}) <= 1",
                s.curation_floor, s.auto_threshold
            ));
        }
        if !(0.0..1.0).contains(&s.merge_threshold) {
            return bad(format!("merge_threshold {} outside [0, 1)", s.merge_threshold));
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.languages.is_empty() {
            return bad("languages must not be empty".into());
        }
        let st = &self.stream;
        if st.poll_interval_minutes <= 0 || st.processing_minutes < 0 || st.queue_capacity == 0 {
            return bad("stream intervals must be positive and queue_capacity non-zero".into());
        }
        if st.sla_minutes <= 0.0 {
            return bad("sla_minutes must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.inference.high_confidence) {
            return bad("inference.high_confidence outside [0, 1]".into());
        }
        Ok(())
    }
}
