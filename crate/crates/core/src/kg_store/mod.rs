//! Knowledge graph storage: entities, ontology, the append-only versioned
//! fact log and its materialized latest view.

mod graph;
pub mod log;
mod ontology;
mod store;
mod types;
mod view;

pub use graph::{name_key, KgError, KnowledgeGraph, Resolution};
pub use log::{scan_file, write_log, AppendOutcome, FactLog, LogError};
pub use ontology::{Ontology, OntologyError};
pub use store::FactStore;
pub use types::*;
pub use view::{materialize_latest, LatestView};
