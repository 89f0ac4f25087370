//! Rule-driven edge inference over the latest view.
//!
//! Rule file (`odke.link_rules` v1), one JSON document:
//!
//! ```json
//! {"schema": "odke.link_rules", "version": 1, "rules": [
//!   {"rule_id": "spouse", "kind": "symmetric", "source": "P26"},
//!   {"rule_id": "contains", "kind": "inverse", "source": "P150", "target": "P131",
//!    "correction": true},
//!   {"rule_id": "parent", "kind": "conditional_inverse", "source": "P40",
//!    "condition": {"predicate": "P21", "map": {"Q6581097": "P22", "Q6581072": "P25"}}}
//! ]}
//! ```
//!
//! Every rule maps ⟨a, source, b⟩ to ⟨b, target, a⟩. Symmetric rules use the
//! source predicate as target; conditional rules pick the target from the
//! value of `condition.predicate` on `a`. Inferred confidence is the source
//! confidence times `confidence_factor` (defaults 1.0, 0.99, 0.98).

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::extractors::validate_fact;
use crate::ingestion::{ingest_batch, IngestReport};
use crate::kg_store::{
    EntityId, Fact, FactKey, FactStatus, FactStore, KnowledgeGraph, LatestView, LogError,
    Provenance, Span, Value, ValueKind, LINK_INFERENCE_EXTRACTOR,
};
use crate::schema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Symmetric,
    Inverse,
    ConditionalInverse,
}

impl RuleKind {
    fn default_factor(self) -> f64 {
        match self {
            RuleKind::Symmetric => 1.0,
            RuleKind::Inverse => 0.99,
            RuleKind::ConditionalInverse => 0.98,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub predicate: String,
    /// Condition value (entity id or display form) → target predicate.
    pub map: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkInferenceRule {
    pub rule_id: String,
    pub kind: RuleKind,
    pub source: String,
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default)]
    pub condition: Option<Condition>,
    #[serde(default)]
    pub confidence_factor: Option<f64>,
    /// Also used by the correctness pass.
    #[serde(default)]
    pub correction: bool,
}

impl LinkInferenceRule {
    pub fn factor(&self) -> f64 {
        self.confidence_factor.unwrap_or_else(|| self.kind.default_factor())
    }

    fn targets(&self) -> Vec<&str> {
        match self.kind {
            RuleKind::Symmetric => vec![self.source.as_str()],
            RuleKind::Inverse => self.target.as_deref().into_iter().collect(),
            RuleKind::ConditionalInverse => self
                .condition
                .iter()
                .flat_map(|c| c.map.values().map(String::as_str))
                .collect(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RuleFileError {
    #[error("{path}: {message}")]
    File { path: String, message: String },
    #[error("rule {rule_id}: {message}")]
    Invalid { rule_id: String, message: String },
}

#[derive(Deserialize)]
struct RuleFile {
    schema: String,
    version: u32,
    rules: Vec<LinkInferenceRule>,
}

/// Validated rule list.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkRules {
    rules: Vec<LinkInferenceRule>,
}

impl LinkRules {
    pub fn new(rules: Vec<LinkInferenceRule>, kg: &KnowledgeGraph) -> Result<Self, RuleFileError> {
        for r in &rules {
            let invalid = |message: String| RuleFileError::Invalid {
                rule_id: r.rule_id.clone(),
                message,
            };
            let factor = r.factor();
            if !(factor > 0.0 && factor <= 1.0) {
                return Err(invalid(format!("confidence_factor {factor} outside (0, 1]")));
            }
            match r.kind {
                RuleKind::Symmetric if r.target.as_deref().is_some_and(|t| t != r.source) => {
                    return Err(invalid("symmetric rule must target its source".into()))
                }
                RuleKind::Inverse if r.target.is_none() => {
                    return Err(invalid("inverse rule needs a target".into()))
                }
                RuleKind::ConditionalInverse
                    if r.condition.as_ref().is_none_or(|c| c.map.is_empty()) =>
                {
                    return Err(invalid("conditional rule needs a non-empty condition".into()))
                }
                _ => {}
            }
            let mut preds = vec![r.source.as_str()];
            preds.extend(r.targets());
            preds.extend(r.condition.iter().map(|c| c.predicate.as_str()));
            for p in preds {
                if kg.ontology().get(p).is_none() {
                    return Err(invalid(format!("unknown predicate {p}")));
                }
            }
            for p in std::iter::once(r.source.as_str()).chain(r.targets()) {
                if kg.ontology().get(p).map(|x| x.value_kind) != Some(ValueKind::EntityRef) {
                    return Err(invalid(format!("{p} is not an entity_ref predicate")));
                }
            }
        }
        Ok(LinkRules { rules })
    }

    pub fn load(path: &Path, kg: &KnowledgeGraph) -> Result<Self, RuleFileError> {
        let err = |message: String| RuleFileError::File {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let f: RuleFile = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        if f.schema != schema::LINK_RULES || f.version != schema::VERSION {
            return Err(err(format!("expected {} v{}", schema::LINK_RULES, schema::VERSION)));
        }
        Self::new(f.rules, kg)
    }

    pub fn rules(&self) -> &[LinkInferenceRule] {
        &self.rules
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferredFact {
    pub fact: Fact,
    pub derived_from: FactKey,
    pub rule_id: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CompletenessResult {
    pub inferred: Vec<InferredFact>,
    /// (source key, rule) pairs skipped because the condition value is absent.
    pub missing_condition: usize,
    /// Candidate edges that would violate the ontology.
    pub type_violations: usize,
}

/// Working copy of the view's facts that inference can extend.
struct FactSet {
    facts: BTreeMap<FactKey, Fact>,
}

impl FactSet {
    fn from_view(view: &LatestView) -> Self {
        FactSet {
            facts: view.iter().map(|(k, r)| (k.clone(), r.fact.clone())).collect(),
        }
    }

    fn first_value(&self, subject: &EntityId, predicate: &str) -> Option<&Value> {
        let start = FactKey::new(subject.clone(), predicate, None);
        self.facts
            .range(start..)
            .take_while(|(k, _)| &k.subject == subject && k.predicate == predicate)
            .map(|(_, f)| &f.object)
            .next()
    }
}

fn condition_key(v: &Value) -> String {
    v.to_string()
}

pub(crate) fn inference_provenance(
    source: &Fact,
    source_key: &FactKey,
    run_id: &str,
    at: DateTime<Utc>,
) -> Provenance {
    let origin = source.provenance.first();
    Provenance {
        source_url: origin.map(|p| p.source_url.clone()).unwrap_or_default(),
        revision_id: origin.map(|p| p.revision_id.clone()).unwrap_or_default(),
        span: Span::Derived {
            from: source_key.to_string(),
        },
        extractor_id: LINK_INFERENCE_EXTRACTOR.to_string(),
        extracted_at: at,
        pipeline_run_id: run_id.to_string(),
    }
}

/// Target predicate of `rule` for a source fact, `Err(())` when the
/// condition value is missing or unmapped.
fn target_for<'r>(
    rule: &'r LinkInferenceRule,
    subject: &EntityId,
    set: &FactSet,
) -> Result<&'r str, ()> {
    match rule.kind {
        RuleKind::Symmetric => Ok(rule.source.as_str()),
        RuleKind::Inverse => Ok(rule.target.as_deref().expect("validated")),
        RuleKind::ConditionalInverse => {
            let cond = rule.condition.as_ref().expect("validated");
            let value = set.first_value(subject, &cond.predicate).ok_or(())?;
            cond.map.get(&condition_key(value)).map(String::as_str).ok_or(())
        }
    }
}

fn reverse(source: &Fact, target: &str, confidence: f64, prov: Provenance) -> Option<Fact> {
    let object = source.object.as_entity()?;
    Some(Fact {
        subject: object.clone(),
        predicate: target.to_string(),
        object: Value::entity(source.subject.clone()),
        confidence,
        provenance: vec![prov],
        language: source.language.clone(),
        status: FactStatus::Inferred,
    })
}

/// Adds every rule consequence whose key is absent, repeating until nothing
/// new appears so that consequences of inferred edges are included.
pub fn infer_completeness(
    view: &LatestView,
    kg: &KnowledgeGraph,
    rules: &LinkRules,
    run_id: &str,
    at: DateTime<Utc>,
) -> CompletenessResult {
    let mut set = FactSet::from_view(view);
    let mut result = CompletenessResult::default();
    let mut skipped: BTreeSet<(FactKey, String)> = BTreeSet::new();
    let mut violations: BTreeSet<FactKey> = BTreeSet::new();
    loop {
        let mut new: BTreeMap<FactKey, InferredFact> = BTreeMap::new();
        for (key, source) in &set.facts {
            for rule in rules.rules.iter().filter(|r| r.source == key.predicate) {
                let target = match target_for(rule, &source.subject, &set) {
                    Ok(t) => t,
                    Err(()) => {
                        skipped.insert((key.clone(), rule.rule_id.clone()));
                        continue;
                    }
                };
                let prov = inference_provenance(source, key, run_id, at);
                let Some(fact) = reverse(source, target, source.confidence * rule.factor(), prov)
                else {
                    continue;
                };
                let tkey = kg.ontology().key_for(&fact).expect("validated predicate");
                if set.facts.contains_key(&tkey) || new.contains_key(&tkey) {
                    continue;
                }
                if validate_fact(&fact, kg).is_err() {
                    violations.insert(tkey);
                    continue;
                }
                new.insert(
                    tkey,
                    InferredFact {
                        fact,
                        derived_from: key.clone(),
                        rule_id: rule.rule_id.clone(),
                    },
                );
            }
        }
        if new.is_empty() {
            break;
        }
        for (k, inf) in new {
            set.facts.insert(k, inf.fact.clone());
            result.inferred.push(inf);
        }
    }
    result.missing_condition = skipped.len();
    result.type_violations = violations.len();
    result
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correction {
    pub inferred: InferredFact,
    pub replaced: FactKey,
    pub replaced_value: Value,
    pub replaced_confidence: f64,
}

/// Proposes replacements for functional facts contradicted by a
/// high-confidence source fact under a correction rule. A replacement is
/// only proposed when its confidence exceeds the existing fact's; among
/// several proposals for one key the most confident wins (ties: smaller
/// value key).
pub fn infer_correctness(
    view: &LatestView,
    kg: &KnowledgeGraph,
    rules: &LinkRules,
    high_confidence: f64,
    run_id: &str,
    at: DateTime<Utc>,
) -> Vec<Correction> {
    let set = FactSet::from_view(view);
    let mut best: BTreeMap<FactKey, Correction> = BTreeMap::new();
    for (key, source) in &set.facts {
        if source.confidence < high_confidence {
            continue;
        }
        for rule in rules.rules.iter().filter(|r| r.correction && r.source == key.predicate) {
            let Ok(target) = target_for(rule, &source.subject, &set) else {
                continue;
            };
            if !kg.ontology().is_functional(target) {
                continue;
            }
            let prov = inference_provenance(source, key, run_id, at);
            let Some(fact) = reverse(source, target, source.confidence * rule.factor(), prov) else {
                continue;
            };
            let tkey = kg.ontology().key_for(&fact).expect("validated predicate");
            let Some(existing) = set.facts.get(&tkey) else {
                continue;
            };
            if existing.object == fact.object
                || fact.confidence <= existing.confidence
                || validate_fact(&fact, kg).is_err()
            {
                continue;
            }
            let candidate = Correction {
                inferred: InferredFact {
                    fact,
                    derived_from: key.clone(),
                    rule_id: rule.rule_id.clone(),
                },
                replaced: tkey.clone(),
                replaced_value: existing.object.clone(),
                replaced_confidence: existing.confidence,
            };
            let better = match best.get(&tkey) {
                None => true,
                Some(cur) => {
                    let (a, b) = (&candidate.inferred.fact, &cur.inferred.fact);
                    a.confidence > b.confidence
                        || (a.confidence == b.confidence
                            && a.object.canonical_key() < b.object.canonical_key())
                }
            };
            if better {
                best.insert(tkey, candidate);
            }
        }
    }
    best.into_values().collect()
}

/// Appends inferred facts through the regular ingestion path.
pub fn apply_inferred(
    facts: Vec<Fact>,
    kg: &mut KnowledgeGraph,
    store: &mut FactStore,
    run_id: &str,
    at: DateTime<Utc>,
) -> Result<IngestReport, LogError> {
    ingest_batch(facts, kg, store, run_id, at)
}
