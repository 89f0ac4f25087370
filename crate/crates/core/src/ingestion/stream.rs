//! Streaming delivery: one fact at a time off the queue, with delivery
//! records and latency accounting against the SLA.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::clock::Clock;
use crate::kg_store::{Fact, FactKey, FactStore, KnowledgeGraph, LogError};

use super::batch::{prepare, Diverted, IngestSummary, Prepared};
use super::queue::{BoundedQueue, QueueError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamItem {
    pub fact: Fact,
    /// Change event this fact came from, for SLA grouping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin_event_time: Option<DateTime<Utc>>,
    pub enqueued_at: DateTime<Utc>,
    /// Earliest time the consumer may deliver it (end of processing).
    pub ready_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeliveryMode {
    Batch,
    Stream,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryRecord {
    pub key: FactKey,
    pub version: u64,
    pub mode: DeliveryMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_id: Option<String>,
    pub enqueued_at: DateTime<Utc>,
    pub delivered_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin_event_time: Option<DateTime<Utc>>,
}

impl DeliveryRecord {
    pub fn latency_minutes(&self) -> Option<f64> {
        self.origin_event_time
            .map(|o| (self.delivered_at - o).num_milliseconds() as f64 / 60_000.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlaReport {
    pub mode: DeliveryMode,
    /// Number of latency samples: change events with at least one delivered
    /// fact, plus deliveries carrying no event id.
    pub samples: usize,
    pub p50_minutes: f64,
    pub p99_minutes: f64,
    pub max_minutes: f64,
    pub sla_minutes: f64,
    pub violations: usize,
}

/// Nearest-rank percentile of an ascending slice: element ⌈p·n⌉ (1-based).
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Latency samples: an event's latency runs from its origin time to the
/// delivery of its last fact.
pub fn latency_samples(records: &[DeliveryRecord]) -> Vec<f64> {
    let mut by_event: BTreeMap<&str, f64> = BTreeMap::new();
    let mut loose = Vec::new();
    for r in records {
        let Some(lat) = r.latency_minutes() else {
            continue;
        };
        match &r.event_id {
            Some(id) => {
                let e = by_event.entry(id.as_str()).or_insert(f64::MIN);
                *e = e.max(lat);
            }
            None => loose.push(lat),
        }
    }
    loose.extend(by_event.into_values());
    loose
}

pub fn sla_report(records: &[DeliveryRecord], mode: DeliveryMode, sla_minutes: f64) -> SlaReport {
    let mut samples = latency_samples(records);
    samples.sort_by(f64::total_cmp);
    SlaReport {
        mode,
        samples: samples.len(),
        p50_minutes: percentile(&samples, 0.50),
        p99_minutes: percentile(&samples, 0.99),
        max_minutes: samples.last().copied().unwrap_or(0.0),
        sla_minutes,
        violations: samples.iter().filter(|&&l| l > sla_minutes).count(),
    }
}

#[derive(Debug)]
pub struct StreamReport {
    pub summary: IngestSummary,
    pub deliveries: Vec<DeliveryRecord>,
    pub diverted: Vec<Diverted>,
    pub rejected: Vec<(Fact, String)>,
    pub sla: SlaReport,
}

#[derive(Debug, thiserror::Error)]
pub enum StreamError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Queue(#[from] QueueError),
}

/// Consumes the queue until it is closed and drained, appending each fact on
/// its own as soon as it is ready on `clock`. The queue is FIFO: producers
/// enqueue in `ready_at` order, otherwise a late item holds up the ones
/// behind it.
pub fn ingest_stream(
    queue: &BoundedQueue<StreamItem>,
    kg: &mut KnowledgeGraph,
    store: &mut FactStore,
    sla_minutes: f64,
    clock: &dyn Clock,
    run_id: &str,
) -> Result<StreamReport, StreamError> {
    let mut summary = IngestSummary::default();
    let mut deliveries = Vec::new();
    let mut diverted = Vec::new();
    let mut rejected = Vec::new();
    while let Some(item) = queue.pop()? {
        let result = deliver_one(item, kg, store, clock, run_id, &mut summary);
        queue.ack();
        match result? {
            Outcome::Delivered(r) => deliveries.push(r),
            Outcome::Diverted(d) => diverted.push(d),
            Outcome::Rejected(f, why) => rejected.push((f, why)),
            Outcome::Unchanged => {}
        }
    }
    summary.diverted = diverted.len();
    summary.rejected = rejected.len();
    let sla = sla_report(&deliveries, DeliveryMode::Stream, sla_minutes);
    Ok(StreamReport {
        summary,
        deliveries,
        diverted,
        rejected,
        sla,
    })
}

enum Outcome {
    Delivered(DeliveryRecord),
    Diverted(Diverted),
    Rejected(Fact, String),
    Unchanged,
}

fn deliver_one(
    item: StreamItem,
    kg: &mut KnowledgeGraph,
    store: &mut FactStore,
    clock: &dyn Clock,
    run_id: &str,
    summary: &mut IngestSummary,
) -> Result<Outcome, LogError> {
    if clock.now() < item.ready_at {
        clock.advance_to(item.ready_at);
    }
    let before = kg.len();
    let prepared = prepare(item.fact, kg, store.view());
    summary.created_entities += kg.len() - before;
    let fact = match prepared {
        Prepared::Ready(f) => f,
        Prepared::Diverted(d) => return Ok(Outcome::Diverted(d)),
        Prepared::Rejected(f, why) => return Ok(Outcome::Rejected(f, why)),
        Prepared::Unchanged => {
            summary.unchanged += 1;
            return Ok(Outcome::Unchanged);
        }
    };
    let delivered_at = clock.now().max(item.ready_at);
    let outcome = store.append(std::slice::from_ref(&fact), run_id, delivered_at, kg)?;
    if let Some((_, v)) = outcome.rejected.into_iter().next() {
        return Ok(Outcome::Rejected(fact, v.to_string()));
    }
    let row = outcome.rows.into_iter().next().expect("one fact appended");
    summary.appended += 1;
    Ok(Outcome::Delivered(DeliveryRecord {
        key: row.key,
        version: row.version,
        mode: DeliveryMode::Stream,
        event_id: item.event_id,
        enqueued_at: item.enqueued_at,
        delivered_at,
        origin_event_time: item.origin_event_time,
    }))
}
