//! Wall-clock rate of batch pattern extraction.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::extractors::{extract_infobox, ExtractContext, RuleSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub documents: usize,
    pub facts: usize,
    pub workers: usize,
    pub elapsed_seconds: f64,
    pub facts_per_minute: f64,
}

/// Extracts every document with a subject hint on a pool of `workers`
/// threads, one document per unit of work, and reports facts per minute.
pub fn measure_throughput(
    docs: &[&Document],
    rules: &RuleSet,
    ctx: &ExtractContext<'_>,
    workers: usize,
) -> ThroughputReport {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    let start = Instant::now();
    let facts: usize = pool.install(|| {
        docs.par_iter()
            .with_min_len(16)
            .map(|d| match &d.subject_hint {
                Some(s) => extract_infobox(d, rules, s, ctx).map_or(0, |c| c.len()),
                None => 0,
            })
            .sum()
    });
    report(docs.len(), facts, workers, start.elapsed())
}

pub(crate) fn report(documents: usize, facts: usize, workers: usize, elapsed: Duration) -> ThroughputReport {
    let secs = elapsed.as_secs_f64();
    let facts_per_minute = if facts == 0 || secs == 0.0 {
        0.0
    } else {
        facts as f64 * 60.0 / secs
    };
    ThroughputReport {
        documents,
        facts,
        workers,
        elapsed_seconds: secs,
        facts_per_minute,
    }
}
