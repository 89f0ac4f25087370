//! Candidate-fact extraction: declarative infobox rules, hyperlink rules,
//! ontology validation and the question-answering model client.

mod infobox;
mod links;
mod model;
mod rules;
mod validate;

use serde::{Deserialize, Serialize};

use crate::kg_store::{EntityId, Provenance, Value};

pub use infobox::{aggregate_row, extract_infobox};
pub use links::extract_links;
pub use model::{
    model_extract, Answer, HttpModelClient, MockModelClient, ModelError, ModelExtractorClient,
    ModelOutcome, QaRequest, QaResponse, QuestionTemplates,
};
pub use rules::{
    compile_rules, load_rule_file, AggregatorPolicy, BuildSpec, CompiledExtractor, CompiledRule, LinkRule,
    LinkRuleSpec, QuantityComponent, RuleError, RuleFile, RuleSet, RuleSpec, ValueExtractorSpec,
};
pub use validate::{validate_fact, validate_triple, validate_types, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorKind {
    Pattern,
    Link,
    Model,
}

impl ExtractorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExtractorKind::Pattern => "pattern",
            ExtractorKind::Link => "link",
            ExtractorKind::Model => "model",
        }
    }
}

/// A value read from one span of one document revision, before
/// normalization and corroboration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFact {
    pub subject: EntityId,
    pub predicate: String,
    pub raw_span: Provenance,
    /// Document text at `raw_span`.
    pub raw_text: String,
    pub value: Value,
    pub extractor_id: String,
    pub extractor_kind: ExtractorKind,
    pub extractor_score: f64,
    pub language: String,
    /// Unit symbol the value was written in, for quantities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_unit: Option<String>,
    /// Hyperlink to a page with no known entity; needs entity resolution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unresolved_url: Option<String>,
}

impl CandidateFact {
    /// Whether the value was written in a metric unit.
    pub fn is_metric(&self) -> bool {
        self.source_unit
            .as_deref()
            .and_then(crate::units::lookup)
            .is_some_and(|u| u.metric)
    }
}

/// Run-level inputs shared by every extractor call.
#[derive(Clone, Copy)]
pub struct ExtractContext<'a> {
    pub ontology: &'a crate::Ontology,
    pub locales: &'a crate::locale::LocaleSet,
    pub run_id: &'a str,
    pub extracted_at: chrono::DateTime<chrono::Utc>,
}

impl ExtractContext<'_> {
    pub(crate) fn provenance(
        &self,
        doc: &crate::corpus::Document,
        span: crate::Span,
        extractor_id: &str,
    ) -> Provenance {
        Provenance {
            source_url: doc.url.clone(),
            revision_id: doc.revision_id.clone(),
            span,
            extractor_id: extractor_id.to_string(),
            extracted_at: self.extracted_at,
            pipeline_run_id: self.run_id.to_string(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("malformed document {url}@{revision}: {reason}")]
pub struct ExtractError {
    pub url: String,
    pub revision: String,
    pub reason: String,
}
