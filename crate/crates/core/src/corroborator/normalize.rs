//! Value normalization by predicate kind, and entity linking of mentions.

use std::collections::BTreeSet;

use crate::extractors::CandidateFact;
use crate::kg_store::{EntityId, KnowledgeGraph, Ontology, Value, ValueKind};
use crate::locale::{self, LocaleSet};
use crate::units;

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedCandidate {
    pub candidate: CandidateFact,
    pub value: Value,
    /// Entities an ambiguous mention could refer to; empty otherwise.
    pub mention_options: Vec<EntityId>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NormalizeError {
    #[error("unknown predicate {0}")]
    UnknownPredicate(String),
    #[error("cannot read {raw:?} as a {kind} value")]
    Unparseable { raw: String, kind: ValueKind },
}

/// Normalizes one value for a predicate. Textual values (model answers,
/// unlinked mentions) are parsed with the language's locale table.
/// Applying it to its own output returns the same value.
pub fn normalize_value(
    value: &Value,
    kind: ValueKind,
    dimension: Option<units::Dimension>,
    language: &str,
    locales: &LocaleSet,
) -> Result<Value, NormalizeError> {
    let table = locales.get(language);
    let fail = |raw: &str| NormalizeError::Unparseable {
        raw: raw.to_string(),
        kind,
    };
    let canonical = units::canonical_unit(dimension);
    match (kind, value) {
        (ValueKind::Quantity, Value::Quantity { magnitude, unit }) => {
            let v = units::to_canonical(*magnitude, unit, dimension)
                .map_err(|_| fail(&value.to_string()))?;
            Ok(Value::quantity(units::round1(v), canonical))
        }
        (ValueKind::Quantity, Value::Text { text, .. }) => {
            let v = locale::parse_quantity(text, table, dimension).ok_or_else(|| fail(text))?;
            Ok(Value::quantity(units::round1(v), canonical))
        }
        (ValueKind::Date, Value::Date { date, precision }) => {
            if locale::valid_iso_date(date, *precision) {
                Ok(value.clone())
            } else {
                Err(fail(date))
            }
        }
        (ValueKind::Date, Value::Text { text, .. }) => {
            let (date, precision) = locale::parse_date(text, table).ok_or_else(|| fail(text))?;
            Ok(Value::Date { date, precision })
        }
        (ValueKind::Money, Value::Money { .. }) => Ok(value.clone()),
        (ValueKind::Money, Value::Text { text, .. }) => {
            let (minor_units, currency) =
                locale::parse_money(text, table).ok_or_else(|| fail(text))?;
            Ok(Value::Money {
                minor_units,
                currency,
            })
        }
        (ValueKind::String | ValueKind::EntityRef, Value::Text { text, language }) => {
            let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ");
            if collapsed.is_empty() {
                return Err(fail(text));
            }
            Ok(Value::Text {
                text: collapsed,
                language: language.clone(),
            })
        }
        (ValueKind::EntityRef, Value::EntityRef { .. }) => Ok(value.clone()),
        (ValueKind::ExternalId, Value::ExternalId { id, scheme }) => {
            let id = id.trim();
            if id.is_empty() {
                return Err(fail(id));
            }
            Ok(Value::ExternalId {
                id: id.to_string(),
                scheme: scheme.clone(),
            })
        }
        _ => Err(fail(&value.to_string())),
    }
}

pub fn normalize(
    candidate: &CandidateFact,
    ontology: &Ontology,
    locales: &LocaleSet,
) -> Result<NormalizedCandidate, NormalizeError> {
    let predicate = ontology
        .get(&candidate.predicate)
        .ok_or_else(|| NormalizeError::UnknownPredicate(candidate.predicate.clone()))?;
    let value = normalize_value(
        &candidate.value,
        predicate.value_kind,
        predicate.unit_dimension,
        &candidate.language,
        locales,
    )?;
    Ok(NormalizedCandidate {
        candidate: candidate.clone(),
        value,
        mention_options: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mention {
    Linked(EntityId),
    Ambiguous(Vec<EntityId>),
    Unknown,
}

/// Exact case-insensitive name/alias lookup restricted to `type_hint`
/// (empty hint: any type).
pub fn link_mention(text: &str, type_hint: &BTreeSet<EntityId>, kg: &KnowledgeGraph) -> Mention {
    let found = kg.match_name(text, type_hint);
    match found.len() {
        0 => Mention::Unknown,
        1 => Mention::Linked(found.into_iter().next().unwrap()),
        _ => Mention::Ambiguous(found.into_iter().collect()),
    }
}
