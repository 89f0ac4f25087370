use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use super::ontology::Ontology;
use super::types::{Alias, Entity, EntityId, EntityOrigin};
use crate::schema;

/// Entities plus the ontology that constrains facts about them.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    ontology: Arc<Ontology>,
    entities: BTreeMap<EntityId, Entity>,
    names: HashMap<String, BTreeSet<EntityId>>,
    next_internal: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolution {
    Existing(EntityId),
    Created(EntityId),
    /// Two or more compatible entities share the name; route to curation.
    Ambiguous(Vec<EntityId>),
}

impl Resolution {
    pub fn id(&self) -> Option<&EntityId> {
        match self {
            Resolution::Existing(id) | Resolution::Created(id) => Some(id),
            Resolution::Ambiguous(_) => None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum KgError {
    #[error("entity name must be non-empty")]
    EmptyName,
    #[error("cannot create entity {0:?} without a type")]
    Untyped(String),
    #[error("entity {0}: canonical name must be non-empty")]
    InvalidEntity(EntityId),
    #[error("duplicate entity {0}")]
    Duplicate(EntityId),
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

/// Lowercased, whitespace-collapsed form used for name matching.
pub fn name_key(name: &str) -> String {
    name.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

impl KnowledgeGraph {
    pub fn new(ontology: Arc<Ontology>) -> Self {
        KnowledgeGraph {
            ontology,
            entities: BTreeMap::new(),
            names: HashMap::new(),
            next_internal: 1,
        }
    }

    pub fn load(ontology: Arc<Ontology>, path: &Path) -> Result<Self, KgError> {
        let file = std::fs::File::open(path).map_err(|source| KgError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let records =
            schema::read_records(BufReader::new(file), schema::KG).map_err(|source| {
                KgError::Header {
                    path: path.display().to_string(),
                    source,
                }
            })?;
        let mut kg = KnowledgeGraph::new(ontology);
        for (line, text) in records {
            let e: Entity = serde_json::from_str(&text).map_err(|e| KgError::Record {
                line,
                message: e.to_string(),
            })?;
            kg.insert(e).map_err(|e| KgError::Record {
                line,
                message: e.to_string(),
            })?;
        }
        Ok(kg)
    }

    /// Writes every entity (seed and ingested) in id order.
    pub fn save(&self, path: &Path) -> Result<(), KgError> {
        let io = |source| KgError::Io {
            path: path.display().to_string(),
            source,
        };
        let tmp = path.with_extension("tmp");
        {
            let mut out = BufWriter::new(std::fs::File::create(&tmp).map_err(io)?);
            schema::write_header(&mut out, schema::KG).map_err(io)?;
            for e in self.entities.values() {
                let line = serde_json::to_string(e).expect("entity serializes");
                writeln!(out, "{line}").map_err(io)?;
            }
            out.into_inner()
                .map_err(|e| io(e.into_error()))?
                .sync_all()
                .map_err(io)?;
        }
        std::fs::rename(&tmp, path).map_err(io)
    }

    pub fn ontology(&self) -> &Ontology {
        &self.ontology
    }

    pub fn ontology_arc(&self) -> Arc<Ontology> {
        Arc::clone(&self.ontology)
    }

    pub fn insert(&mut self, entity: Entity) -> Result<(), KgError> {
        if entity.canonical_name.trim().is_empty() {
            return Err(KgError::InvalidEntity(entity.id));
        }
        if self.entities.contains_key(&entity.id) {
            return Err(KgError::Duplicate(entity.id));
        }
        if let Some(n) = entity.id.internal_counter() {
            self.next_internal = self.next_internal.max(n + 1);
        }
        for name in std::iter::once(&entity.canonical_name).chain(entity.aliases.iter().map(|a| &a.name))
        {
            self.names
                .entry(name_key(name))
                .or_default()
                .insert(entity.id.clone());
        }
        self.entities.insert(entity.id.clone(), entity);
        Ok(())
    }

    pub fn entity(&self, id: &EntityId) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn contains(&self, id: &EntityId) -> bool {
        self.entities.contains_key(id)
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn entities_of_type<'a>(&'a self, ty: &'a EntityId) -> impl Iterator<Item = &'a Entity> + 'a {
        self.entities.values().filter(move |e| e.types.contains(ty))
    }

    /// Entities whose canonical name or an alias matches `name`
    /// case-insensitively, optionally restricted to those with a type in
    /// `types` (an empty set means no restriction).
    pub fn match_name(&self, name: &str, types: &BTreeSet<EntityId>) -> BTreeSet<EntityId> {
        self.names
            .get(&name_key(name))
            .into_iter()
            .flatten()
            .filter(|id| {
                types.is_empty()
                    || self
                        .entities
                        .get(*id)
                        .is_some_and(|e| !e.types.is_disjoint(types))
            })
            .cloned()
            .collect()
    }

    /// Finds or creates the entity for a mention.
    ///
    /// A known `external_id` wins; otherwise a unique case-insensitive
    /// name/alias match of compatible type is returned; two or more matches
    /// are reported as ambiguous; no match creates a new internal entity.
    pub fn resolve_entity(
        &mut self,
        name: &str,
        aliases: &[String],
        type_hint: Option<&EntityId>,
        external_id: Option<&EntityId>,
    ) -> Result<Resolution, KgError> {
        if name.trim().is_empty() {
            return Err(KgError::EmptyName);
        }
        if let Some(ext) = external_id {
            if self.entities.contains_key(ext) {
                return Ok(Resolution::Existing(ext.clone()));
            }
        }
        let types: BTreeSet<EntityId> = type_hint.into_iter().cloned().collect();
        let mut found = BTreeSet::new();
        for n in std::iter::once(name).chain(aliases.iter().map(String::as_str)) {
            found.extend(self.match_name(n, &types));
        }
        match found.len() {
            1 => Ok(Resolution::Existing(found.into_iter().next().unwrap())),
            0 => {
                let ty = type_hint.ok_or_else(|| KgError::Untyped(name.to_string()))?;
                let id = EntityId::internal(self.next_internal);
                let entity = Entity {
                    id: id.clone(),
                    canonical_name: name.split_whitespace().collect::<Vec<_>>().join(" "),
                    aliases: aliases
                        .iter()
                        .map(|a| Alias {
                            name: a.clone(),
                            language: String::new(),
                        })
                        .collect(),
                    types: [ty.clone()].into(),
                    created_by: EntityOrigin::Ingestion,
                };
                self.insert(entity)?;
                Ok(Resolution::Created(id))
            }
            _ => Ok(Resolution::Ambiguous(found.into_iter().collect())),
        }
    }
}
