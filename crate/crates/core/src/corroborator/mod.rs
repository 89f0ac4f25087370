//! Normalization, entity linking, clustering, scoring and routing of
//! candidate facts.

mod cluster;
mod normalize;
mod scoring;

use serde::{Deserialize, Serialize};

use crate::extractors::{validate_triple, CandidateFact};
use crate::kg_store::{KnowledgeGraph, Value, ValueKind};
use crate::locale::LocaleSet;

pub use cluster::{cluster, FactCluster};
pub use normalize::{link_mention, normalize, normalize_value, Mention, NormalizeError, NormalizedCandidate};
pub use scoring::{
    score_and_rank, ExtractorWeights, GroupEvidence, HeuristicScorer, Route, ScoredFact, Scorer,
    ScoringConfig,
};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorroborationStats {
    pub candidates: usize,
    pub normalization_failures: usize,
    pub type_violations: usize,
    pub ambiguous_mentions: usize,
    pub unknown_mentions: usize,
}

/// Runs the full corroboration stage over one batch of candidates.
///
/// Textual mentions in entity slots are linked against the graph before
/// clustering so they merge with hyperlink candidates for the same entity.
/// Unknown mentions stay textual (ingestion may mint an entity for them);
/// ambiguous ones stay textual and carry their options to curation.
pub fn corroborate(
    candidates: &[CandidateFact],
    kg: &KnowledgeGraph,
    locales: &LocaleSet,
    config: &ScoringConfig,
    scorer: &dyn Scorer,
) -> (Vec<ScoredFact>, CorroborationStats) {
    let ontology = kg.ontology();
    let mut stats = CorroborationStats {
        candidates: candidates.len(),
        ..Default::default()
    };
    let mut normalized = Vec::with_capacity(candidates.len());
    for c in candidates {
        let mut n = match normalize(c, ontology, locales) {
            Ok(n) => n,
            Err(e) => {
                tracing::debug!(subject = %c.subject, predicate = %c.predicate, error = %e, "normalization failed");
                stats.normalization_failures += 1;
                continue;
            }
        };
        let predicate = ontology.get(&c.predicate).expect("normalize checked predicate");
        if predicate.value_kind == ValueKind::EntityRef {
            if let Value::Text { text, .. } = &n.value {
                match link_mention(text, &predicate.allowed_object_types, kg) {
                    Mention::Linked(id) => n.value = Value::entity(id),
                    Mention::Ambiguous(options) => {
                        stats.ambiguous_mentions += 1;
                        n.mention_options = options;
                    }
                    Mention::Unknown => stats.unknown_mentions += 1,
                }
            }
        }
        let textual_entity =
            predicate.value_kind == ValueKind::EntityRef && matches!(n.value, Value::Text { .. });
        if !textual_entity {
            if let Err(v) = validate_triple(&c.subject, &c.predicate, &n.value, kg) {
                tracing::debug!(violation = %v, "candidate dropped");
                stats.type_violations += 1;
                continue;
            }
        }
        normalized.push(n);
    }
    let clusters = cluster(normalized, config.merge_threshold);
    (score_and_rank(clusters, ontology, config, scorer), stats)
}

#[cfg(test)]
mod tests;
