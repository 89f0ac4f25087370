//! Streaming mode: simulated polling of the change feed, per-event
//! extraction, and one-fact-at-a-time ingestion behind a bounded queue.
//!
//! Time is simulated. Poll `k` happens at `start + k·interval` and covers
//! events in `(previous poll, this poll]`; its facts become ready
//! `processing_minutes` later (plus any injected delay). Items are handed
//! to the queue in ready order.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::io::{BufWriter, Write};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::clock::{Clock, SimClock};
use crate::corpus::{filter_vandalism, poll_window, ChangeEvent, ChangeFeed, Corpus};
use crate::corroborator::{corroborate, HeuristicScorer, Route, ScoredFact};
use crate::curation::{generate_tasks, ApplyReport};
use crate::extractors::{ExtractContext, RuleSet};
use crate::ingestion::{ingest_stream, BoundedQueue, IngestSummary, SlaReport, StreamItem};
use crate::initiator::{event_id, tasks_from_events};
use crate::kg_store::{FactStatus, KnowledgeGraph};
use crate::locale::LocaleSet;
use crate::schema;

use super::batch::{diverted_as_scored, extract_page, RouteCounts};
use super::ops::apply_pending_decisions;
use super::state::{run_id, write_json, PipelineState};
use super::{PipelineConfig, PipelineError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamRunReport {
    pub run_id: String,
    pub decisions: ApplyReport,
    pub polls: usize,
    pub events: usize,
    pub vandalism_filtered: usize,
    pub tasks: usize,
    pub skipped_events: usize,
    pub candidates: usize,
    pub routed: RouteCounts,
    pub ingest: IngestSummary,
    pub curation_tasks_added: usize,
    pub sla: SlaReport,
}

#[derive(Default)]
struct Produced {
    polls: usize,
    events: usize,
    vandalism_filtered: usize,
    tasks: usize,
    skipped_events: usize,
    candidates: usize,
    routed: RouteCounts,
    curation: Vec<ScoredFact>,
}

struct Inputs<'a> {
    cfg: &'a PipelineConfig,
    feed: &'a ChangeFeed,
    corpus: &'a Corpus,
    rules: &'a RuleSet,
    locales: &'a LocaleSet,
    kg: &'a KnowledgeGraph,
    run_id: &'a str,
}

/// Pending items ordered by (ready_at, sequence).
type Pending = BinaryHeap<Reverse<(DateTime<Utc>, u64, usize)>>;

fn produce(inputs: &Inputs<'_>, start: DateTime<Utc>, queue: &BoundedQueue<StreamItem>) -> Produced {
    let cfg = &inputs.cfg.stream;
    let interval = Duration::minutes(cfg.poll_interval_minutes);
    let processing = Duration::minutes(cfg.processing_minutes);
    let priority: BTreeSet<&str> = cfg.priority_predicates.iter().map(String::as_str).collect();
    let scorer = HeuristicScorer {
        weights: inputs.cfg.scoring.weights.clone(),
    };
    let mut out = Produced::default();
    let Some(last_event) = inputs.feed.events().last().map(|e| e.event_time) else {
        return out;
    };
    let mut pending: Pending = BinaryHeap::new();
    let mut items: Vec<Option<StreamItem>> = Vec::new();
    let mut since = None;
    let mut poll = start;
    loop {
        out.polls += 1;
        let events = poll_window(inputs.feed, since, Some(poll));
        let clean = filter_vandalism(&events);
        out.events += events.len();
        out.vandalism_filtered += events.len() - clean.len();
        let tasks = tasks_from_events(&clean, inputs.corpus, inputs.kg, poll);
        out.skipped_events += tasks.skipped;
        out.tasks += tasks.tasks.len();
        let ctx = ExtractContext {
            ontology: inputs.kg.ontology(),
            locales: inputs.locales,
            run_id: inputs.run_id,
            extracted_at: poll,
        };
        let mut batch: Vec<StreamItem> = Vec::new();
        let by_id: HashMap<String, &ChangeEvent> = clean.iter().map(|e| (event_id(e), e)).collect();
        for task in &tasks.tasks {
            let Some(ev) = task.event_id.as_ref().and_then(|id| by_id.get(id)) else {
                continue;
            };
            let Some(doc) = inputs
                .corpus
                .revision(&ev.url, &ev.revision_id)
                .or_else(|| inputs.corpus.latest(&ev.url))
            else {
                continue;
            };
            let candidates = match extract_page(doc, &task.subject, inputs.rules, &ctx) {
                Ok(c) => c,
                Err(e) => {
                    tracing::warn!(event = ?task.event_id, reason = %e.reason, "event skipped");
                    continue;
                }
            };
            out.candidates += candidates.len();
            let (scored, _) = corroborate(&candidates, inputs.kg, inputs.locales, &inputs.cfg.scoring, &scorer);
            let counts = RouteCounts::count(&scored);
            out.routed.auto += counts.auto;
            out.routed.curation += counts.curation;
            out.routed.drop += counts.drop;
            let delay: i64 = cfg
                .inject_delay
                .iter()
                .filter(|d| task.event_id.as_deref() == Some(d.event.as_str()))
                .map(|d| d.minutes)
                .sum();
            for s in scored {
                match s.route {
                    Route::Auto => {
                        let mut fact = s.fact;
                        fact.status = FactStatus::AutoIngested;
                        batch.push(StreamItem {
                            fact,
                            event_id: task.event_id.clone(),
                            origin_event_time: task.origin_event_time,
                            enqueued_at: poll,
                            ready_at: poll + processing + Duration::minutes(delay),
                        });
                    }
                    Route::Curation => out.curation.push(s),
                    Route::Drop => {}
                }
            }
        }
        batch.sort_by_key(|i| !priority.contains(i.fact.predicate.as_str()));
        for item in batch {
            let seq = items.len() as u64;
            pending.push(Reverse((item.ready_at, seq, items.len())));
            items.push(Some(item));
        }
        // Anything ready before the next poll's items could be goes now.
        let horizon = poll + interval + processing;
        let done = poll >= last_event;
        while let Some(Reverse((ready, _, idx))) = pending.peek().copied() {
            if !done && ready > horizon {
                break;
            }
            pending.pop();
            let item = items[idx].take().expect("queued once");
            if queue.push(item).is_err() {
                tracing::error!("stream queue closed early");
                return out;
            }
        }
        if done {
            break;
        }
        since = Some(poll);
        poll += interval;
    }
    out
}

/// Replays the configured feed on a simulated clock and reports latency
/// against the SLA. Deliveries are written to `runs/<run_id>/deliveries.jsonl`.
pub fn run_stream(state: &mut PipelineState, start: Option<DateTime<Utc>>) -> Result<StreamRunReport, PipelineError> {
    let cfg = state.config.clone();
    let feed_path = cfg
        .paths
        .feed
        .as_ref()
        .ok_or_else(|| PipelineError::Validation("stream mode needs paths.feed".into()))?;
    let feed = ChangeFeed::load(feed_path).map_err(|e| PipelineError::Validation(e.to_string()))?;
    let start = cfg
        .stream
        .start
        .or(start)
        .or_else(|| feed.events().first().map(|e| e.event_time))
        .unwrap_or_else(|| cfg.now.unwrap_or_else(Utc::now));
    let run_id = run_id(&cfg, "stream", start);
    let decisions = apply_pending_decisions(state, &run_id, start)?;

    let clock = SimClock::new(start);
    let queue: BoundedQueue<StreamItem> = BoundedQueue::new(cfg.stream.queue_capacity);
    // The producer reads a snapshot; entities minted during the run reach it
    // only through ingestion-time resolution.
    let snapshot = state.kg.clone();
    let inputs = Inputs {
        cfg: &cfg,
        feed: &feed,
        corpus: &state.corpus,
        rules: &state.rules,
        locales: &state.locales,
        kg: &snapshot,
        run_id: &run_id,
    };
    let (produced, consumed) = std::thread::scope(|scope| {
        let producer = scope.spawn(|| {
            let out = produce(&inputs, start, &queue);
            queue.close();
            out
        });
        let consumed = ingest_stream(
            &queue,
            &mut state.kg,
            &mut state.store,
            cfg.stream.sla_minutes,
            &clock,
            &run_id,
        );
        if consumed.is_err() {
            queue.close();
        }
        (producer.join().expect("producer thread"), consumed)
    });
    let consumed = consumed.map_err(|e| PipelineError::stage("ingestion", e))?;

    let mut to_curate = produced.curation;
    to_curate.extend(consumed.diverted.iter().cloned().map(diverted_as_scored));
    let at = clock.now();
    let curation = generate_tasks(&to_curate, &state.kg, state.store.view(), Some(&state.corpus), at);
    let curation_tasks_added = state
        .tasks
        .add_tasks(curation)
        .map_err(|e| PipelineError::stage("curation", e))?;

    let run_dir = state.run_dir(&run_id);
    std::fs::create_dir_all(&run_dir).map_err(|e| PipelineError::stage("report", e))?;
    let write = || -> std::io::Result<()> {
        let mut out = BufWriter::new(std::fs::File::create(run_dir.join("deliveries.jsonl"))?);
        schema::write_header(&mut out, schema::DELIVERIES)?;
        for d in &consumed.deliveries {
            writeln!(out, "{}", serde_json::to_string(d).expect("delivery serializes"))?;
        }
        out.flush()
    };
    write().map_err(|e| PipelineError::stage("report", e))?;

    let report = StreamRunReport {
        run_id,
        decisions,
        polls: produced.polls,
        events: produced.events,
        vandalism_filtered: produced.vandalism_filtered,
        tasks: produced.tasks,
        skipped_events: produced.skipped_events,
        candidates: produced.candidates,
        routed: produced.routed,
        ingest: consumed.summary,
        curation_tasks_added,
        sla: consumed.sla,
    };
    state.save_graph()?;
    write_json(&run_dir.join("report.json"), &report)?;
    Ok(report)
}
