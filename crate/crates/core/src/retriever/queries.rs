//! Search queries from templates.
//!
//! Template file (`odke.query_templates` v1): a JSON document
//! `{"schema": ..., "version": 1, "templates": [{"predicate": "P19",
//! "language": "en", "pattern": "{subject} {predicate_phrase}",
//! "phrase": "birthplace"}]}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::initiator::ExtractionTask;
use crate::schema;

const MAX_NAMES: usize = 3;
const MAX_TEMPLATES: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryTemplate {
    pub predicate: String,
    pub language: String,
    pub pattern: String,
    /// Substituted for `{predicate_phrase}`.
    #[serde(default)]
    pub phrase: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryTemplates {
    pub templates: Vec<QueryTemplate>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum QueryError {
    #[error("no query template for predicate {0}")]
    NoTemplate(String),
    #[error("template for {0} lacks a {{subject}} placeholder")]
    NoSubject(String),
    #[error("{path}: {message}")]
    File { path: String, message: String },
}

#[derive(Deserialize)]
struct TemplateFile {
    schema: String,
    version: u32,
    templates: Vec<QueryTemplate>,
}

impl QueryTemplates {
    pub fn new(templates: Vec<QueryTemplate>) -> Result<Self, QueryError> {
        if let Some(t) = templates.iter().find(|t| !t.pattern.contains("{subject}")) {
            return Err(QueryError::NoSubject(t.predicate.clone()));
        }
        Ok(QueryTemplates { templates })
    }

    pub fn load(path: &Path) -> Result<Self, QueryError> {
        let err = |message: String| QueryError::File {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let f: TemplateFile = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        if f.schema != schema::TEMPLATES || f.version != schema::VERSION {
            return Err(err(format!("expected {} v{}", schema::TEMPLATES, schema::VERSION)));
        }
        Self::new(f.templates)
    }
}

/// Queries for a task: the canonical name then aliases (at most three names)
/// crossed with the first two templates matching the predicate in any of
/// `languages`; duplicates removed, first occurrence kept.
pub fn generate_queries(
    task: &ExtractionTask,
    templates: &QueryTemplates,
    languages: &[String],
) -> Result<Vec<String>, QueryError> {
    let matching: Vec<&QueryTemplate> = templates
        .templates
        .iter()
        .filter(|t| t.predicate == task.predicate && languages.iter().any(|l| *l == t.language))
        .take(MAX_TEMPLATES)
        .collect();
    if matching.is_empty() {
        return Err(QueryError::NoTemplate(task.predicate.clone()));
    }
    let mut names: Vec<&str> = Vec::new();
    for n in std::iter::once(task.name.as_str()).chain(task.aliases.iter().map(String::as_str)) {
        if !n.trim().is_empty() && !names.contains(&n) {
            names.push(n);
        }
    }
    names.truncate(MAX_NAMES);
    let mut out: Vec<String> = Vec::new();
    for name in names {
        for t in &matching {
            let q = t
                .pattern
                .replace("{subject}", name)
                .replace("{predicate_phrase}", &t.phrase);
            let q = q.split_whitespace().collect::<Vec<_>>().join(" ");
            if !out.contains(&q) {
                out.push(q);
            }
        }
    }
    Ok(out)
}
