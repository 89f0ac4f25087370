//! Grouping of equivalent normalized values.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};

use crate::kg_store::{EntityId, Value};

use super::normalize::NormalizedCandidate;

#[derive(Debug, Clone, PartialEq)]
pub struct FactCluster {
    pub subject: EntityId,
    pub predicate: String,
    /// Representative value; quantity clusters may hold members whose
    /// values lie within the merge threshold of it.
    pub value: Value,
    pub members: Vec<NormalizedCandidate>,
}

impl FactCluster {
    pub fn support(&self) -> usize {
        self.members.len()
    }

    pub fn distinct_sources(&self) -> usize {
        self.members
            .iter()
            .map(|m| m.candidate.raw_span.source_url.as_str())
            .collect::<BTreeSet<_>>()
            .len()
    }

    pub fn earliest_extraction(&self) -> Option<DateTime<Utc>> {
        self.members
            .iter()
            .map(|m| m.candidate.raw_span.extracted_at)
            .min()
    }

    /// Entities an ambiguous mention in this cluster could refer to.
    pub fn mention_options(&self) -> Vec<EntityId> {
        self.members
            .iter()
            .flat_map(|m| m.mention_options.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

fn merge_diff(a: f64, b: f64) -> f64 {
    let larger = a.abs().max(b.abs());
    if larger == 0.0 {
        0.0
    } else {
        (a - b).abs() / larger
    }
}

/// Groups candidates by exact normalized value within each
/// (subject, predicate), then folds quantity clusters into a stronger
/// cluster whose value is within `merge_threshold` (relative to the larger
/// magnitude). Stronger means more support, then smaller magnitude.
/// Output order: (subject, predicate), then representative value key.
pub fn cluster(candidates: Vec<NormalizedCandidate>, merge_threshold: f64) -> Vec<FactCluster> {
    type Group = BTreeMap<String, Vec<NormalizedCandidate>>;
    let mut groups: BTreeMap<(EntityId, String), Group> = BTreeMap::new();
    for c in candidates {
        groups
            .entry((c.candidate.subject.clone(), c.candidate.predicate.clone()))
            .or_default()
            .entry(c.value.canonical_key())
            .or_default()
            .push(c);
    }
    let mut out = Vec::new();
    for ((subject, predicate), by_value) in groups {
        let mut exact: Vec<FactCluster> = by_value
            .into_values()
            .map(|members| FactCluster {
                subject: subject.clone(),
                predicate: predicate.clone(),
                value: members[0].value.clone(),
                members,
            })
            .collect();
        exact.sort_by(|a, b| {
            b.support().cmp(&a.support()).then_with(|| {
                let ma = a.value.magnitude().unwrap_or(0.0);
                let mb = b.value.magnitude().unwrap_or(0.0);
                ma.total_cmp(&mb)
                    .then_with(|| a.value.canonical_key().cmp(&b.value.canonical_key()))
            })
        });
        let mut merged: Vec<FactCluster> = Vec::new();
        for c in exact {
            let target = c.value.magnitude().and_then(|m| {
                merged.iter().position(|r| {
                    r.value
                        .magnitude()
                        .is_some_and(|rm| merge_diff(rm, m) <= merge_threshold)
                })
            });
            match target {
                Some(i) => merged[i].members.extend(c.members),
                None => merged.push(c),
            }
        }
        merged.sort_by_key(|c| c.value.canonical_key());
        out.extend(merged);
    }
    out
}
