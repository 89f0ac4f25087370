//! Cluster scoring, ranking and routing.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::extractors::ExtractorKind;
use crate::kg_store::{EntityId, Fact, FactStatus, Ontology, Provenance};

use super::cluster::FactCluster;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractorWeights {
    pub pattern: f64,
    pub link: f64,
    pub model: f64,
}

impl Default for ExtractorWeights {
    fn default() -> Self {
        ExtractorWeights {
            pattern: 1.0,
            link: 1.0,
            model: 0.7,
        }
    }
}

impl ExtractorWeights {
    pub fn get(&self, kind: ExtractorKind) -> f64 {
        match kind {
            ExtractorKind::Pattern => self.pattern,
            ExtractorKind::Link => self.link,
            ExtractorKind::Model => self.model,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringConfig {
    pub auto_threshold: f64,
    pub curation_floor: f64,
    /// Relative difference under which quantity clusters merge.
    pub merge_threshold: f64,
    pub weights: ExtractorWeights,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            auto_threshold: 0.8,
            curation_floor: 0.4,
            merge_threshold: 0.01,
            weights: ExtractorWeights::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Auto,
    Curation,
    Drop,
}

/// Evidence totals for one (subject, predicate) group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupEvidence {
    pub candidates: usize,
    pub sources: usize,
    pub functional: bool,
}

/// Pluggable cluster scorer; the output must lie in [0, 1].
pub trait Scorer: Send + Sync {
    fn score(&self, cluster: &FactCluster, group: &GroupEvidence) -> f64;
}

/// Best weighted extractor score times the cluster's share of the group's
/// evidence. Functional predicates share by candidate count; multi-valued
/// ones by distinct source documents, since every value of a
/// multi-valued predicate may be correct at once.
#[derive(Debug, Clone, Default)]
pub struct HeuristicScorer {
    pub weights: ExtractorWeights,
}

impl Scorer for HeuristicScorer {
    fn score(&self, cluster: &FactCluster, group: &GroupEvidence) -> f64 {
        let best = cluster
            .members
            .iter()
            .map(|m| self.weights.get(m.candidate.extractor_kind) * m.candidate.extractor_score)
            .fold(0.0, f64::max);
        let share = if group.functional {
            cluster.support() as f64 / group.candidates.max(1) as f64
        } else {
            cluster.distinct_sources() as f64 / group.sources.max(1) as f64
        };
        (best * share).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredFact {
    /// Status `candidate`; confidence is the score.
    pub fact: Fact,
    pub score: f64,
    /// 1-based rank among the clusters of the same (subject, predicate).
    pub rank: usize,
    pub route: Route,
    pub support: usize,
    pub distinct_sources: usize,
    /// Set when the value is a mention that matches several entities.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mention_options: Vec<EntityId>,
}

fn base_route(score: f64, sensitive: bool, ambiguous: bool, cfg: &ScoringConfig) -> Route {
    if sensitive || ambiguous {
        Route::Curation
    } else if score >= cfg.auto_threshold {
        Route::Auto
    } else if score >= cfg.curation_floor {
        Route::Curation
    } else {
        Route::Drop
    }
}

fn dedup_provenance(cluster: &FactCluster) -> Vec<Provenance> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for m in &cluster.members {
        let p = &m.candidate.raw_span;
        let key = (
            p.source_url.clone(),
            p.revision_id.clone(),
            format!("{:?}", p.span),
            p.extractor_id.clone(),
        );
        if seen.insert(key) {
            out.push(p.clone());
        }
    }
    out
}

/// Scores, ranks and routes clusters per (subject, predicate).
///
/// Ranking: score desc, then more distinct sources, then earlier first
/// extraction, then the smaller canonical value key. For functional
/// predicates only rank 1 may be auto-ingested: if it is, the rest drop; if
/// it goes to curation, the rest go with it as alternatives; if it drops,
/// everything drops.
pub fn score_and_rank(
    clusters: Vec<FactCluster>,
    ontology: &Ontology,
    config: &ScoringConfig,
    scorer: &dyn Scorer,
) -> Vec<ScoredFact> {
    let mut groups: BTreeMap<(EntityId, String), Vec<FactCluster>> = BTreeMap::new();
    for c in clusters {
        groups
            .entry((c.subject.clone(), c.predicate.clone()))
            .or_default()
            .push(c);
    }
    let mut out = Vec::new();
    for ((_, predicate_id), group) in groups {
        let Some(predicate) = ontology.get(&predicate_id) else {
            continue;
        };
        let evidence = GroupEvidence {
            candidates: group.iter().map(FactCluster::support).sum(),
            sources: group
                .iter()
                .flat_map(|c| c.members.iter().map(|m| m.candidate.raw_span.source_url.as_str()))
                .collect::<BTreeSet<_>>()
                .len(),
            functional: predicate.functional,
        };
        let mut scored: Vec<(f64, FactCluster)> = group
            .into_iter()
            .map(|c| (scorer.score(&c, &evidence), c))
            .collect();
        scored.sort_by(|(sa, a), (sb, b)| {
            sb.total_cmp(sa)
                .then_with(|| b.distinct_sources().cmp(&a.distinct_sources()))
                .then_with(|| a.earliest_extraction().cmp(&b.earliest_extraction()))
                .then_with(|| a.value.canonical_key().cmp(&b.value.canonical_key()))
        });
        let mut first_route = None;
        for (i, (score, c)) in scored.into_iter().enumerate() {
            let options = c.mention_options();
            let own = base_route(score, predicate.sensitive, !options.is_empty(), config);
            let route = if predicate.functional {
                match first_route {
                    None => {
                        first_route = Some(own);
                        own
                    }
                    Some(Route::Auto) | Some(Route::Drop) => Route::Drop,
                    Some(Route::Curation) => Route::Curation,
                }
            } else {
                own
            };
            let first = &c.members[0].candidate;
            out.push(ScoredFact {
                fact: Fact {
                    subject: c.subject.clone(),
                    predicate: c.predicate.clone(),
                    object: c.value.clone(),
                    confidence: score,
                    provenance: dedup_provenance(&c),
                    language: first.language.clone(),
                    status: FactStatus::Candidate,
                },
                score,
                rank: i + 1,
                route,
                support: c.support(),
                distinct_sources: c.distinct_sources(),
                mention_options: options,
            });
        }
    }
    out
}
