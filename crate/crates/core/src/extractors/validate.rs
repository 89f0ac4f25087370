//! Ontology type validation for candidates and facts.

use crate::kg_store::{
    Fact, FactStatus, KnowledgeGraph, Predicate, Provenance, Value, ValueKind,
    LINK_INFERENCE_EXTRACTOR,
};
use crate::locale;
use crate::units;

use super::CandidateFact;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Violation {
    #[error("unknown predicate {0}")]
    UnknownPredicate(String),
    #[error("unknown subject entity {0}")]
    UnknownSubject(String),
    #[error("subject {subject} has none of the allowed types {allowed:?} for {predicate}")]
    SubjectType {
        subject: String,
        predicate: String,
        allowed: Vec<String>,
    },
    #[error("{predicate} expects a {expected} value, got {found}")]
    KindMismatch {
        predicate: String,
        expected: ValueKind,
        found: ValueKind,
    },
    #[error("{predicate}: unit {unit} does not measure the predicate's dimension")]
    UnitDimension { predicate: String, unit: String },
    #[error("unknown object entity {0}")]
    UnknownObject(String),
    #[error("object {object} has none of the allowed types {allowed:?} for {predicate}")]
    ObjectType {
        object: String,
        predicate: String,
        allowed: Vec<String>,
    },
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("confidence {0} outside [0, 1]")]
    Confidence(f64),
    #[error("fact has no provenance")]
    NoProvenance,
    #[error("inferred fact must carry link_inference provenance")]
    InferredProvenance,
}

fn ids<'a>(set: impl IntoIterator<Item = &'a crate::EntityId>) -> Vec<String> {
    set.into_iter().map(|t| t.to_string()).collect()
}

/// Checks one (subject, predicate, object) triple against the ontology and
/// the entity types recorded in the graph.
pub fn validate_triple(
    subject: &crate::EntityId,
    predicate_id: &str,
    object: &Value,
    kg: &KnowledgeGraph,
) -> Result<(), Violation> {
    let predicate: &Predicate = kg
        .ontology()
        .get(predicate_id)
        .ok_or_else(|| Violation::UnknownPredicate(predicate_id.to_string()))?;
    let subject_entity = kg
        .entity(subject)
        .ok_or_else(|| Violation::UnknownSubject(subject.to_string()))?;
    if !predicate.allowed_subject_types.is_empty()
        && subject_entity
            .types
            .is_disjoint(&predicate.allowed_subject_types)
    {
        return Err(Violation::SubjectType {
            subject: subject.to_string(),
            predicate: predicate.id.clone(),
            allowed: ids(&predicate.allowed_subject_types),
        });
    }
    if object.kind() != predicate.value_kind {
        return Err(Violation::KindMismatch {
            predicate: predicate.id.clone(),
            expected: predicate.value_kind,
            found: object.kind(),
        });
    }
    match object {
        Value::EntityRef { id } => {
            let obj = kg
                .entity(id)
                .ok_or_else(|| Violation::UnknownObject(id.to_string()))?;
            if !predicate.allowed_object_types.is_empty()
                && obj.types.is_disjoint(&predicate.allowed_object_types)
            {
                return Err(Violation::ObjectType {
                    object: id.to_string(),
                    predicate: predicate.id.clone(),
                    allowed: ids(&predicate.allowed_object_types),
                });
            }
        }
        Value::Quantity { magnitude, unit } => {
            if !magnitude.is_finite() {
                return Err(Violation::InvalidValue(format!(
                    "non-finite magnitude {magnitude}"
                )));
            }
            match units::lookup(unit) {
                Some(u) if u.dimension == predicate.unit_dimension => {}
                _ => {
                    return Err(Violation::UnitDimension {
                        predicate: predicate.id.clone(),
                        unit: unit.clone(),
                    })
                }
            }
        }
        Value::Date { date, precision } => {
            if !locale::valid_iso_date(date, *precision) {
                return Err(Violation::InvalidValue(format!(
                    "{date:?} is not ISO-8601 at {precision:?} precision"
                )));
            }
        }
        Value::Money { currency, .. } => {
            if currency.len() != 3 || !currency.bytes().all(|b| b.is_ascii_uppercase()) {
                return Err(Violation::InvalidValue(format!(
                    "{currency:?} is not an ISO-4217 code"
                )));
            }
        }
        Value::Text { text, .. } | Value::ExternalId { id: text, .. } => {
            if text.trim().is_empty() {
                return Err(Violation::InvalidValue("empty string value".into()));
            }
        }
    }
    Ok(())
}

/// Validates a candidate before corroboration.
pub fn validate_types(candidate: &CandidateFact, kg: &KnowledgeGraph) -> Result<(), Violation> {
    validate_triple(
        &candidate.subject,
        &candidate.predicate,
        &candidate.value,
        kg,
    )
}

fn is_inference(p: &Provenance) -> bool {
    p.extractor_id == LINK_INFERENCE_EXTRACTOR
}

/// Full check applied to every fact before it is appended to the log.
pub fn validate_fact(fact: &Fact, kg: &KnowledgeGraph) -> Result<(), Violation> {
    if !(0.0..=1.0).contains(&fact.confidence) {
        return Err(Violation::Confidence(fact.confidence));
    }
    if fact.provenance.is_empty() {
        return Err(Violation::NoProvenance);
    }
    if fact.status == FactStatus::Inferred && !fact.provenance.iter().any(is_inference) {
        return Err(Violation::InferredProvenance);
    }
    validate_triple(&fact.subject, &fact.predicate, &fact.object, kg)
}
