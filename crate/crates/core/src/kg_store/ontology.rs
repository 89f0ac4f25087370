use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::Path;

use super::types::{Fact, FactKey, Predicate, ValueKind};
use crate::schema;

/// The predicate catalogue. Entity classes are plain [`EntityId`]s that
/// predicates reference in their subject/object type constraints.
///
/// [`EntityId`]: super::EntityId
#[derive(Debug, Clone, Default)]
pub struct Ontology {
    predicates: BTreeMap<String, Predicate>,
}

#[derive(Debug, thiserror::Error)]
pub enum OntologyError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Header {
        path: String,
        source: schema::HeaderError,
    },
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
}

impl Ontology {
    pub fn new(predicates: impl IntoIterator<Item = Predicate>) -> Result<Self, OntologyError> {
        let mut out = Ontology::default();
        for (i, p) in predicates.into_iter().enumerate() {
            out.insert(p)
                .map_err(|message| OntologyError::Record { line: i + 1, message })?;
        }
        Ok(out)
    }

    fn insert(&mut self, p: Predicate) -> Result<(), String> {
        if p.id.trim().is_empty() {
            return Err("predicate id must be non-empty".into());
        }
        if p.value_kind != ValueKind::EntityRef && !p.allowed_object_types.is_empty() {
            return Err(format!(
                "{}: allowed_object_types only apply to entity_ref predicates",
                p.id
            ));
        }
        if p.value_kind != ValueKind::Quantity && p.unit_dimension.is_some() {
            return Err(format!("{}: unit_dimension only applies to quantities", p.id));
        }
        if self.predicates.contains_key(&p.id) {
            return Err(format!("duplicate predicate {}", p.id));
        }
        self.predicates.insert(p.id.clone(), p);
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, OntologyError> {
        let file = std::fs::File::open(path).map_err(|source| OntologyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let records = schema::read_records(BufReader::new(file), schema::ONTOLOGY).map_err(
            |source| OntologyError::Header {
                path: path.display().to_string(),
                source,
            },
        )?;
        let mut out = Ontology::default();
        for (line, text) in records {
            let p: Predicate = serde_json::from_str(&text).map_err(|e| OntologyError::Record {
                line,
                message: e.to_string(),
            })?;
            out.insert(p)
                .map_err(|message| OntologyError::Record { line, message })?;
        }
        Ok(out)
    }

    pub fn get(&self, id: &str) -> Option<&Predicate> {
        self.predicates.get(id)
    }

    pub fn predicates(&self) -> impl Iterator<Item = &Predicate> {
        self.predicates.values()
    }

    pub fn is_functional(&self, id: &str) -> bool {
        self.get(id).is_some_and(|p| p.functional)
    }

    /// Fact key under this ontology; `None` for an unknown predicate.
    pub fn key_for(&self, fact: &Fact) -> Option<FactKey> {
        let p = self.get(&fact.predicate)?;
        Some(FactKey::for_fact(fact, p.functional))
    }
}
