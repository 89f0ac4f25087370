//! Small hand-built ontology and graph shared by unit tests.

use std::collections::BTreeSet;
use std::sync::Arc;

use chrono::{DateTime, TimeZone, Utc};

use crate::extractors::{CandidateFact, ExtractorKind};
use crate::kg_store::{
    eid, Entity, EntityId, EntityOrigin, KnowledgeGraph, Ontology, Predicate, Provenance, Span,
    Value, ValueKind,
};
use crate::units::Dimension;

pub const PERSON: &str = "Q5";
pub const PLACE: &str = "Q2221906";

fn types(ids: &[&str]) -> BTreeSet<EntityId> {
    ids.iter().map(|t| eid(t)).collect()
}

pub fn predicate(
    id: &str,
    kind: ValueKind,
    dim: Option<Dimension>,
    functional: bool,
    subj: &[&str],
    obj: &[&str],
) -> Predicate {
    Predicate {
        id: id.into(),
        name: id.into(),
        value_kind: kind,
        unit_dimension: dim,
        functional,
        allowed_subject_types: types(subj),
        allowed_object_types: types(obj),
        sensitive: false,
    }
}

pub fn ontology() -> Arc<Ontology> {
    let mut net_worth = predicate("P2218", ValueKind::Money, None, true, &[PERSON], &[]);
    net_worth.sensitive = true;
    Arc::new(
        Ontology::new([
            predicate("P2048", ValueKind::Quantity, Some(Dimension::Length), true, &[PERSON], &[]),
            predicate("P569", ValueKind::Date, None, true, &[PERSON], &[]),
            predicate("P19", ValueKind::EntityRef, None, true, &[PERSON], &[PLACE]),
            predicate("P26", ValueKind::EntityRef, None, false, &[PERSON], &[PERSON]),
            predicate("P27", ValueKind::EntityRef, None, false, &[PERSON], &[PLACE]),
            predicate("P1477", ValueKind::String, None, true, &[PERSON], &[]),
            net_worth,
        ])
        .unwrap(),
    )
}

pub fn entity(id: &str, name: &str, ty: &[&str]) -> Entity {
    Entity {
        id: eid(id),
        canonical_name: name.into(),
        aliases: vec![],
        types: types(ty),
        created_by: EntityOrigin::Seed,
    }
}

pub fn kg() -> KnowledgeGraph {
    let mut kg = KnowledgeGraph::new(ontology());
    for e in [
        entity("Q8991894", "Giannis Antetokounmpo", &[PERSON]),
        entity("Q6279", "Joe Biden", &[PERSON]),
        entity("Q18419", "Brooklyn", &[PLACE]),
        entity("Q271395", "Scranton", &[PLACE]),
        entity("Q30", "United States", &[PLACE]),
        entity("Q41", "Greece", &[PLACE]),
        entity("Q100", "Michelle Williams", &[PERSON]),
        entity("Q101", "Michelle Williams", &[PERSON]),
    ] {
        kg.insert(e).unwrap();
    }
    kg
}

pub fn t(day: u32) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, day, 0, 0, 0).unwrap()
}

pub fn provenance(url: &str, extractor: &str, at: DateTime<Utc>) -> Provenance {
    Provenance {
        source_url: url.into(),
        revision_id: "r1".into(),
        span: Span::Derived { from: "testkit".into() },
        extractor_id: extractor.into(),
        extracted_at: at,
        pipeline_run_id: "test".into(),
    }
}

pub fn candidate(subject: &str, predicate: &str, value: Value, url: &str) -> CandidateFact {
    CandidateFact {
        subject: eid(subject),
        predicate: predicate.into(),
        raw_span: provenance(url, "rule/x", t(1)),
        raw_text: value.to_string(),
        value,
        extractor_id: "rule/x".into(),
        extractor_kind: ExtractorKind::Pattern,
        extractor_score: 0.95,
        language: "en".into(),
        source_unit: None,
        unresolved_url: None,
    }
}
