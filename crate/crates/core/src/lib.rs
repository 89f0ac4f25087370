//! Automated knowledge extraction and ingestion for a knowledge graph.
//!
//! The pipeline runs in stages:
//!
//! 1. [`initiator`] decides what to extract (missing facts, stale facts,
//!    escalations, change-feed events).
//! 2. [`retriever`] produces evidence documents from the local [`corpus`],
//!    either by crawl-index lookup or by templated search.
//! 3. [`extractors`] turn infobox rows and hyperlinks into candidate facts
//!    and front a pluggable question-answering model client.
//! 4. [`corroborator`] normalizes, links, clusters, scores and routes them.
//! 5. [`ingestion`] resolves entities and appends to the versioned fact log
//!    held by [`kg_store`], in batch or streaming mode.
//! 6. [`curation`] turns uncertain facts into review tasks and feeds the
//!    decisions back into the log; [`link_inference`] adds edges by rule.
//!
//! [`pipeline`] wires the stages into batch and streaming runs.

pub mod clock;
pub mod corpus;
pub mod corroborator;
pub mod curation;
pub mod extractors;
pub mod ingestion;
pub mod initiator;
pub mod kg_store;
pub mod link_inference;
pub mod locale;
pub mod pipeline;
pub mod retriever;
pub mod schema;
pub mod synth;
pub mod units;

#[cfg(test)]
mod testkit;

pub use kg_store::{
    Entity, EntityId, Fact, FactKey, FactStatus, KnowledgeGraph, Ontology, Predicate, Provenance,
    Span, Value, ValueKind, VersionedFactRow,
};
