//! Delivery of routed facts into the fact log, in batch or streaming mode.

mod batch;
mod queue;
mod stream;
mod throughput;

pub use batch::{ingest_batch, Diverted, IngestReport, IngestSummary};
pub use queue::{BoundedQueue, QueueError};
pub use stream::{
    ingest_stream, latency_samples, percentile, sla_report, DeliveryMode, DeliveryRecord,
    SlaReport, StreamError, StreamItem, StreamReport,
};
pub use throughput::{measure_throughput, ThroughputReport};
