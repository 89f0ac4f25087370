//! Declarative extraction rules and their compilation against the ontology.
//!
//! A rule file is one JSON document:
//!
//! ```json
//! {"schema": "odke.rules", "version": 1, "language": "en",
//!  "rules": [{"rule_id": "en.height", "keys": ["Height"], "predicate": "P2048",
//!             "aggregator": "metric_preference",
//!             "value_extractors": [{"id": "metric",
//!                                   "pattern": "(?P<value>\\d+(?:\\.\\d+)?\\s*(?:cm|m))\\b",
//!                                   "build": {"kind": "quantity"}}]}],
//!  "link_rules": [{"rule_id": "en.born.link", "keys": ["Born"], "predicate": "P19"}]}
//! ```
//!
//! Rules take the file's language unless they set `"language"` themselves
//! (`"*"` applies to every language). Keys match case-insensitively; a
//! `key_pattern` regex may be given instead of or in addition to `keys`.
//! A value extractor's raw span is its named group `value`, or the whole
//! match when the pattern has none.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::kg_store::{Ontology, ValueKind};
use crate::schema;
use crate::units;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregatorPolicy {
    #[default]
    Single,
    MetricPreference,
    AllValues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityComponent {
    pub group: String,
    pub unit: String,
}

/// How a matched span becomes a typed value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BuildSpec {
    /// With `components`, each named group is a number in its unit and the
    /// parts are summed. With `unit`, the span is a bare number in that unit.
    /// Otherwise the unit is read from the span.
    Quantity {
        #[serde(default)]
        unit: Option<String>,
        #[serde(default)]
        components: Vec<QuantityComponent>,
    },
    Date,
    Money,
    Text,
    ExternalId { scheme: String },
}

impl BuildSpec {
    fn kind(&self) -> ValueKind {
        match self {
            BuildSpec::Quantity { .. } => ValueKind::Quantity,
            BuildSpec::Date => ValueKind::Date,
            BuildSpec::Money => ValueKind::Money,
            BuildSpec::Text => ValueKind::String,
            BuildSpec::ExternalId { .. } => ValueKind::ExternalId,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueExtractorSpec {
    pub id: String,
    pub pattern: String,
    pub build: BuildSpec,
}

fn default_score() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSpec {
    pub rule_id: String,
    #[serde(default)]
    pub language: Option<String>,
    #[serde(default)]
    pub keys: Vec<String>,
    #[serde(default)]
    pub key_pattern: Option<String>,
    pub predicate: String,
    #[serde(default)]
    pub aggregator: AggregatorPolicy,
    #[serde(default = "default_score")]
    pub extractor_score: f64,
    #[serde(default)]
    pub value_extractors: Vec<ValueExtractorSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkRuleSpec {
    pub rule_id: String,
    #[serde(default)]
    pub language: Option<String>,
    #[serde(default)]
    pub keys: Vec<String>,
    #[serde(default)]
    pub key_pattern: Option<String>,
    pub predicate: String,
    #[serde(default = "default_score")]
    pub extractor_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleFile {
    pub schema: String,
    pub version: u32,
    pub language: String,
    #[serde(default)]
    pub rules: Vec<RuleSpec>,
    #[serde(default)]
    pub link_rules: Vec<LinkRuleSpec>,
}

#[derive(Debug, thiserror::Error)]
pub enum RuleError {
    #[error("{path}: {message}")]
    File { path: String, message: String },
    #[error("invalid rules: {}", format_failures(.0))]
    Invalid(Vec<(String, String)>),
}

fn format_failures(failures: &[(String, String)]) -> String {
    failures
        .iter()
        .map(|(id, why)| format!("{id}: {why}"))
        .collect::<Vec<_>>()
        .join("; ")
}

pub fn load_rule_file(path: &Path) -> Result<RuleFile, RuleError> {
    let err = |message: String| RuleError::File {
        path: path.display().to_string(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let file: RuleFile = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
    if file.schema != schema::RULES || file.version != schema::VERSION {
        return Err(err(format!(
            "expected {} v{}, found {} v{}",
            schema::RULES,
            schema::VERSION,
            file.schema,
            file.version
        )));
    }
    Ok(file)
}

#[derive(Debug, Clone)]
pub(crate) struct KeyMatcher {
    keys: HashSet<String>,
    pattern: Option<Regex>,
}

impl KeyMatcher {
    fn new(keys: &[String], pattern: Option<&str>) -> Result<Self, String> {
        let pattern = pattern
            .map(|p| Regex::new(&format!("(?i)^(?:{p})$")).map_err(|e| e.to_string()))
            .transpose()?;
        if keys.is_empty() && pattern.is_none() {
            return Err("rule matches no keys".into());
        }
        Ok(KeyMatcher {
            keys: keys.iter().map(|k| k.trim().to_lowercase()).collect(),
            pattern,
        })
    }

    pub(crate) fn matches(&self, key: &str) -> bool {
        let k = key.trim().to_lowercase();
        self.keys.contains(&k) || self.pattern.as_ref().is_some_and(|p| p.is_match(key.trim()))
    }
}

#[derive(Debug, Clone)]
pub struct CompiledExtractor {
    pub id: String,
    pub(crate) regex: Regex,
    pub build: BuildSpec,
}

#[derive(Debug, Clone)]
pub struct CompiledRule {
    pub rule_id: String,
    pub language: String,
    pub predicate: String,
    pub aggregator: AggregatorPolicy,
    pub extractor_score: f64,
    pub extractors: Vec<CompiledExtractor>,
    pub(crate) keys: KeyMatcher,
}

#[derive(Debug, Clone)]
pub struct LinkRule {
    pub rule_id: String,
    pub language: String,
    pub predicate: String,
    pub extractor_score: f64,
    pub(crate) keys: KeyMatcher,
}

/// Immutable compiled rules. Rule order is file order, then position in
/// the file; lookups return rules in that order.
#[derive(Debug, Clone, Default)]
pub struct RuleSet {
    rules: Vec<CompiledRule>,
    link_rules: Vec<LinkRule>,
    by_language: BTreeMap<String, Vec<usize>>,
    links_by_language: BTreeMap<String, Vec<usize>>,
    warnings: Vec<String>,
}

fn applies(rule_language: &str, doc_language: &str) -> bool {
    rule_language == "*" || rule_language == doc_language
}

impl RuleSet {
    pub fn rules(&self) -> &[CompiledRule] {
        &self.rules
    }

    pub fn link_rules(&self) -> &[LinkRule] {
        &self.link_rules
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty() && self.link_rules.is_empty()
    }

    /// Value rules for an infobox key in a document language.
    pub fn rules_for<'a>(&'a self, language: &'a str, key: &'a str) -> impl Iterator<Item = &'a CompiledRule> + 'a {
        let mut idx: Vec<usize> = [language, "*"]
            .iter()
            .filter_map(|l| self.by_language.get(*l))
            .flatten()
            .copied()
            .collect();
        idx.sort_unstable();
        idx.dedup();
        idx.into_iter()
            .map(|i| &self.rules[i])
            .filter(move |r| applies(&r.language, language) && r.keys.matches(key))
    }

    pub fn link_rules_for<'a>(&'a self, language: &'a str, key: &'a str) -> impl Iterator<Item = &'a LinkRule> + 'a {
        let mut idx: Vec<usize> = [language, "*"]
            .iter()
            .filter_map(|l| self.links_by_language.get(*l))
            .flatten()
            .copied()
            .collect();
        idx.sort_unstable();
        idx.dedup();
        idx.into_iter()
            .map(|i| &self.link_rules[i])
            .filter(move |r| applies(&r.language, language) && r.keys.matches(key))
    }

    /// Predicates any value rule can produce.
    pub fn predicates(&self) -> std::collections::BTreeSet<&str> {
        self.rules
            .iter()
            .map(|r| r.predicate.as_str())
            .chain(self.link_rules.iter().map(|r| r.predicate.as_str()))
            .collect()
    }
}

fn compile_value_rule(
    spec: &RuleSpec,
    language: String,
    ontology: &Ontology,
) -> Result<CompiledRule, String> {
    let predicate = ontology
        .get(&spec.predicate)
        .ok_or_else(|| format!("unknown predicate {}", spec.predicate))?;
    if !(0.0..=1.0).contains(&spec.extractor_score) {
        return Err(format!("extractor_score {} outside [0, 1]", spec.extractor_score));
    }
    if spec.value_extractors.is_empty() {
        return Err("no value extractors".into());
    }
    let keys = KeyMatcher::new(&spec.keys, spec.key_pattern.as_deref())?;
    let mut extractors = Vec::with_capacity(spec.value_extractors.len());
    for ve in &spec.value_extractors {
        let kind = ve.build.kind();
        if kind != predicate.value_kind {
            return Err(format!(
                "extractor {} builds {kind} values but {} expects {}",
                ve.id, predicate.id, predicate.value_kind
            ));
        }
        let regex = Regex::new(&ve.pattern)
            .map_err(|e| format!("extractor {}: invalid regex: {e}", ve.id))?;
        if let BuildSpec::Quantity { unit, components } = &ve.build {
            let fixed = unit.iter().chain(components.iter().map(|c| &c.unit));
            for u in fixed {
                match units::lookup(u) {
                    Some(found) if found.dimension == predicate.unit_dimension => {}
                    _ => {
                        return Err(format!(
                            "extractor {}: unit {u:?} does not measure {}",
                            ve.id, predicate.id
                        ))
                    }
                }
            }
            let names: HashSet<&str> = regex.capture_names().flatten().collect();
            for c in components {
                if !names.contains(c.group.as_str()) {
                    return Err(format!(
                        "extractor {}: pattern has no group {:?}",
                        ve.id, c.group
                    ));
                }
            }
        }
        extractors.push(CompiledExtractor {
            id: ve.id.clone(),
            regex,
            build: ve.build.clone(),
        });
    }
    Ok(CompiledRule {
        rule_id: spec.rule_id.clone(),
        language,
        predicate: spec.predicate.clone(),
        aggregator: spec.aggregator,
        extractor_score: spec.extractor_score,
        extractors,
        keys,
    })
}

fn compile_link_rule(
    spec: &LinkRuleSpec,
    language: String,
    ontology: &Ontology,
) -> Result<LinkRule, String> {
    let predicate = ontology
        .get(&spec.predicate)
        .ok_or_else(|| format!("unknown predicate {}", spec.predicate))?;
    if predicate.value_kind != ValueKind::EntityRef {
        return Err(format!(
            "link rules need an entity_ref predicate, {} is {}",
            predicate.id, predicate.value_kind
        ));
    }
    if !(0.0..=1.0).contains(&spec.extractor_score) {
        return Err(format!("extractor_score {} outside [0, 1]", spec.extractor_score));
    }
    Ok(LinkRule {
        rule_id: spec.rule_id.clone(),
        language,
        predicate: spec.predicate.clone(),
        extractor_score: spec.extractor_score,
        keys: KeyMatcher::new(&spec.keys, spec.key_pattern.as_deref())?,
    })
}

/// Compiles rule files against the ontology. Every failing rule is reported
/// in one error.
pub fn compile_rules(files: &[RuleFile], ontology: &Ontology) -> Result<RuleSet, RuleError> {
    let mut set = RuleSet::default();
    let mut failures = Vec::new();
    let mut seen = HashSet::new();
    for file in files {
        if file.rules.is_empty() && file.link_rules.is_empty() {
            set.warnings
                .push(format!("rule file for language {:?} has no rules", file.language));
        }
        for spec in &file.rules {
            if !seen.insert(spec.rule_id.clone()) {
                failures.push((spec.rule_id.clone(), "duplicate rule_id".to_string()));
                continue;
            }
            let language = spec.language.clone().unwrap_or_else(|| file.language.clone());
            match compile_value_rule(spec, language.clone(), ontology) {
                Ok(rule) => {
                    set.by_language.entry(language).or_default().push(set.rules.len());
                    set.rules.push(rule);
                }
                Err(why) => failures.push((spec.rule_id.clone(), why)),
            }
        }
        for spec in &file.link_rules {
            if !seen.insert(spec.rule_id.clone()) {
                failures.push((spec.rule_id.clone(), "duplicate rule_id".to_string()));
                continue;
            }
            let language = spec.language.clone().unwrap_or_else(|| file.language.clone());
            match compile_link_rule(spec, language.clone(), ontology) {
                Ok(rule) => {
                    set.links_by_language
                        .entry(language)
                        .or_default()
                        .push(set.link_rules.len());
                    set.link_rules.push(rule);
                }
                Err(why) => failures.push((spec.rule_id.clone(), why)),
            }
        }
    }
    if failures.is_empty() {
        Ok(set)
    } else {
        Err(RuleError::Invalid(failures))
    }
}
