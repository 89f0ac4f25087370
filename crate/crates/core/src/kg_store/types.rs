use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::units::Dimension;

/// Reserved prefix for entities minted by this system.
pub const INTERNAL_PREFIX: &str = "odke:";

/// Entity identifier: either an external global ID ("Q8991894") or an
/// internal one carrying the reserved `odke:` prefix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EntityId(String);

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("entity id must be non-empty")]
pub struct EmptyId;

impl EntityId {
    pub fn new(id: impl Into<String>) -> Result<Self, EmptyId> {
        let id = id.into();
        if id.trim().is_empty() {
            return Err(EmptyId);
        }
        Ok(EntityId(id))
    }

    pub fn internal(counter: u64) -> Self {
        EntityId(format!("{INTERNAL_PREFIX}{counter}"))
    }

    pub fn is_internal(&self) -> bool {
        self.0.starts_with(INTERNAL_PREFIX)
    }

    /// Counter of an internal id, if this is one.
    pub fn internal_counter(&self) -> Option<u64> {
        self.0.strip_prefix(INTERNAL_PREFIX)?.parse().ok()
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for EntityId {
    type Error = EmptyId;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        EntityId::new(s)
    }
}

impl From<EntityId> for String {
    fn from(id: EntityId) -> Self {
        id.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Shorthand for fixtures and tests; panics on an empty string.
pub fn eid(s: &str) -> EntityId {
    EntityId::new(s).expect("non-empty entity id")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alias {
    pub name: String,
    pub language: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityOrigin {
    #[default]
    Seed,
    Ingestion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub canonical_name: String,
    #[serde(default)]
    pub aliases: Vec<Alias>,
    #[serde(default)]
    pub types: BTreeSet<EntityId>,
    #[serde(default)]
    pub created_by: EntityOrigin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    EntityRef,
    Quantity,
    Date,
    Money,
    String,
    ExternalId,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ValueKind::EntityRef => "entity_ref",
            ValueKind::Quantity => "quantity",
            ValueKind::Date => "date",
            ValueKind::Money => "money",
            ValueKind::String => "string",
            ValueKind::ExternalId => "external_id",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predicate {
    pub id: String,
    pub name: String,
    pub value_kind: ValueKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit_dimension: Option<Dimension>,
    /// At most one current value per subject.
    pub functional: bool,
    #[serde(default)]
    pub allowed_subject_types: BTreeSet<EntityId>,
    #[serde(default)]
    pub allowed_object_types: BTreeSet<EntityId>,
    #[serde(default)]
    pub sensitive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatePrecision {
    Year,
    Month,
    Day,
}

/// Typed object of a fact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Value {
    EntityRef {
        id: EntityId,
    },
    Quantity {
        magnitude: f64,
        unit: String,
    },
    Date {
        date: String,
        precision: DatePrecision,
    },
    Money {
        minor_units: i64,
        currency: String,
    },
    Text {
        text: String,
        language: String,
    },
    ExternalId {
        id: String,
        scheme: String,
    },
}

impl Value {
    pub fn entity(id: EntityId) -> Self {
        Value::EntityRef { id }
    }

    pub fn quantity(magnitude: f64, unit: &str) -> Self {
        Value::Quantity {
            magnitude,
            unit: unit.to_string(),
        }
    }

    pub fn date(date: &str, precision: DatePrecision) -> Self {
        Value::Date {
            date: date.to_string(),
            precision,
        }
    }

    pub fn text(text: &str, language: &str) -> Self {
        Value::Text {
            text: text.to_string(),
            language: language.to_string(),
        }
    }

    pub fn kind(&self) -> ValueKind {
        match self {
            Value::EntityRef { .. } => ValueKind::EntityRef,
            Value::Quantity { .. } => ValueKind::Quantity,
            Value::Date { .. } => ValueKind::Date,
            Value::Money { .. } => ValueKind::Money,
            Value::Text { .. } => ValueKind::String,
            Value::ExternalId { .. } => ValueKind::ExternalId,
        }
    }

    pub fn as_entity(&self) -> Option<&EntityId> {
        match self {
            Value::EntityRef { id } => Some(id),
            _ => None,
        }
    }

    pub fn magnitude(&self) -> Option<f64> {
        match self {
            Value::Quantity { magnitude, .. } => Some(*magnitude),
            _ => None,
        }
    }

    /// Stable string identity used in fact keys, cluster keys and golden files.
    /// Text language is not part of the identity.
    pub fn canonical_key(&self) -> String {
        match self {
            Value::EntityRef { id } => format!("entity:{id}"),
            Value::Quantity { magnitude, unit } => format!("quantity:{magnitude}:{unit}"),
            Value::Date { date, .. } => format!("date:{date}"),
            Value::Money {
                minor_units,
                currency,
            } => format!("money:{minor_units}:{currency}"),
            Value::Text { text, .. } => format!("text:{text}"),
            Value::ExternalId { id, scheme } => format!("external_id:{scheme}:{id}"),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::EntityRef { id } => write!(f, "{id}"),
            Value::Quantity { magnitude, unit } if unit == "1" => write!(f, "{magnitude}"),
            Value::Quantity { magnitude, unit } => write!(f, "{magnitude} {unit}"),
            Value::Date { date, .. } => f.write_str(date),
            Value::Money {
                minor_units,
                currency,
            } => {
                let digits = crate::locale::minor_digits(currency);
                let scale = 10i64.pow(digits);
                if digits == 0 {
                    write!(f, "{minor_units} {currency}")
                } else {
                    write!(
                        f,
                        "{}.{:0width$} {currency}",
                        minor_units / scale,
                        (minor_units % scale).abs(),
                        width = digits as usize
                    )
                }
            }
            Value::Text { text, .. } => f.write_str(text),
            Value::ExternalId { id, scheme } => write!(f, "{scheme}:{id}"),
        }
    }
}

/// Where in a document revision a value came from. Offsets are in chars,
/// end-exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Span {
    Passage {
        passage_id: String,
        start: usize,
        end: usize,
    },
    Infobox {
        key: String,
        start: usize,
        end: usize,
    },
    /// Not tied to a document: inferred edges and curator input.
    Derived { from: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_url: String,
    pub revision_id: String,
    pub span: Span,
    pub extractor_id: String,
    pub extracted_at: DateTime<Utc>,
    pub pipeline_run_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactStatus {
    Candidate,
    AutoIngested,
    CuratedAccepted,
    CuratedRejected,
    Retracted,
    Inferred,
}

pub const LINK_INFERENCE_EXTRACTOR: &str = "link_inference";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fact {
    pub subject: EntityId,
    pub predicate: String,
    pub object: Value,
    pub confidence: f64,
    pub provenance: Vec<Provenance>,
    pub language: String,
    pub status: FactStatus,
}

/// Version identity of a fact: functional predicates key on
/// (subject, predicate), multi-valued ones add the canonical object value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FactKey {
    pub subject: EntityId,
    pub predicate: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

impl FactKey {
    pub fn new(subject: EntityId, predicate: &str, value: Option<String>) -> Self {
        FactKey {
            subject,
            predicate: predicate.to_string(),
            value,
        }
    }

    pub fn for_fact(fact: &Fact, functional: bool) -> Self {
        FactKey {
            subject: fact.subject.clone(),
            predicate: fact.predicate.clone(),
            value: (!functional).then(|| fact.object.canonical_key()),
        }
    }
}

impl fmt::Display for FactKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}", self.subject, self.predicate)?;
        if let Some(v) = &self.value {
            write!(f, "|{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionedFactRow {
    pub key: FactKey,
    pub version: u64,
    pub fact: Fact,
    pub appended_at: DateTime<Utc>,
    pub run_id: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_namespaces_are_disjoint() {
        let internal = EntityId::internal(7);
        assert!(internal.is_internal());
        assert_eq!(internal.internal_counter(), Some(7));
        assert!(!eid("Q8991894").is_internal());
        assert_eq!(EntityId::new(""), Err(EmptyId));
        assert!(serde_json::from_str::<EntityId>("\"\"").is_err());
    }

    #[test]
    fn value_serde_shape() {
        let v = Value::quantity(213.0, "cm");
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"{"kind":"quantity","magnitude":213.0,"unit":"cm"}"#);
        assert_eq!(serde_json::from_str::<Value>(&json).unwrap(), v);
        assert_eq!(v.canonical_key(), "quantity:213:cm");
    }

    #[test]
    fn money_display() {
        let v = Value::Money {
            minor_units: 120_000_000_050,
            currency: "USD".into(),
        };
        assert_eq!(v.to_string(), "1200000000.50 USD");
    }

    #[test]
    fn functional_keys_drop_the_value() {
        let fact = Fact {
            subject: eid("Q1"),
            predicate: "P569".into(),
            object: Value::date("1942-11-20", DatePrecision::Day),
            confidence: 1.0,
            provenance: vec![],
            language: "en".into(),
            status: FactStatus::Candidate,
        };
        assert_eq!(FactKey::for_fact(&fact, true).value, None);
        assert_eq!(
            FactKey::for_fact(&fact, false).value.as_deref(),
            Some("date:1942-11-20")
        );
    }
}
