use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::{DateTime, TimeZone, Utc};
use tempfile::TempDir;

use super::*;
use crate::corroborator::Route;
use crate::kg_store::{eid, FactKey, FactStatus, Value};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn config(rel: &str, state: &TempDir) -> PipelineConfig {
    let mut cfg = PipelineConfig::load(&fixtures().join(rel)).unwrap();
    cfg.paths.state_dir = state.path().to_path_buf();
    cfg
}

fn at() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 6, 1, 0, 0, 0).unwrap()
}

fn view_lines(state: &PipelineState) -> BTreeSet<String> {
    state
        .store
        .view()
        .iter()
        .map(|(k, r)| format!("{k} = {}", r.fact.object.canonical_key()))
        .collect()
}

#[test]
fn golden_corpus_is_reproduced_exactly() {
    let dir = TempDir::new().unwrap();
    let mut state = PipelineState::open(config("golden.toml", &dir), at()).unwrap();
    let report = run_batch(&mut state, at(), None).unwrap();
    let golden = report.golden.as_ref().unwrap();
    assert!(golden.passed(), "missing {:?}\nunexpected {:?}", golden.missing, golden.unexpected);
    assert_eq!((golden.precision, golden.recall), (1.0, 1.0));
    assert_eq!(report.documents, 50);
    assert_eq!(report.corroboration.type_violations, 1);
    assert_eq!(report.corroboration.ambiguous_mentions, 1);
    assert_eq!(report.curation_tasks_added, 8);
    // Every ingested fact satisfies the ontology.
    for row in state.store.view().rows() {
        crate::extractors::validate_fact(&row.fact, &state.kg).unwrap();
    }
}

#[test]
fn rerun_on_unchanged_inputs_appends_nothing() {
    let dir = TempDir::new().unwrap();
    let mut state = PipelineState::open(config("golden.toml", &dir), at()).unwrap();
    let first = run_batch(&mut state, at(), None).unwrap();
    assert!(first.ingest.appended > 0);
    let rows = state.store.log().scan().unwrap().len();
    drop(state);

    let mut cfg = config("golden.toml", &dir);
    cfg.run_id = Some("again".into());
    let mut state = PipelineState::open(cfg, at()).unwrap();
    let second = run_batch(&mut state, at(), None).unwrap();
    assert_eq!(second.ingest.appended, 0);
    assert_eq!(second.curation_tasks_added, 0);
    assert_eq!(state.store.log().scan().unwrap().len(), rows);
}

#[test]
fn worker_count_does_not_change_the_view() {
    let one = TempDir::new().unwrap();
    let mut a = PipelineState::open(config("golden.toml", &one), at()).unwrap();
    run_batch(&mut a, at(), None).unwrap();

    let four = TempDir::new().unwrap();
    let mut cfg = config("golden.toml", &four);
    cfg.workers = 4;
    let mut b = PipelineState::open(cfg, at()).unwrap();
    run_batch(&mut b, at(), None).unwrap();
    assert_eq!(view_lines(&a), view_lines(&b));
}

#[test]
fn missing_rules_file_fails_validation_before_any_work() {
    let dir = TempDir::new().unwrap();
    let mut cfg = config("golden.toml", &dir);
    cfg.paths.rules = vec![dir.path().join("nope.json")];
    let err = PipelineState::open(cfg, at()).err().unwrap();
    assert_eq!(err.exit_code(), 1);
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn conflicting_heights_rank_the_majority_first_and_ingest_it() {
    let dir = TempDir::new().unwrap();
    let mut state = PipelineState::open(config("antetokounmpo/config.toml", &dir), at()).unwrap();
    let report = run_batch(&mut state, at(), None).unwrap();
    assert!(report.golden.as_ref().unwrap().passed());
    assert_eq!(report.routed.auto, 1);
    assert_eq!(report.routed.drop, 1);
    let key = FactKey::new(eid("Q8991894"), "P2048", None);
    let fact = state.store.view().fact(&key).unwrap();
    assert_eq!(fact.object, Value::quantity(213.0, "cm"));
    assert_eq!(fact.status, FactStatus::AutoIngested);
    assert!((fact.confidence - 0.95 * 2.0 / 3.0).abs() < 1e-12);
}

#[derive(serde::Deserialize)]
struct Expected {
    subject: String,
    predicate: String,
    value: Value,
}

#[test]
fn family_fixture_infers_four_edges_once() {
    let dir = TempDir::new().unwrap();
    let mut state = PipelineState::open(config("family/config.toml", &dir), at()).unwrap();
    let first = run_link_inference(&mut state, at()).unwrap();
    assert_eq!(first.appended, 4);
    assert_eq!(first.corrections, 0);

    let text = std::fs::read_to_string(fixtures().join("family/expected_inferred.json")).unwrap();
    let expected: Vec<Expected> = serde_json::from_str(&text).unwrap();
    for e in &expected {
        let functional = state.kg.ontology().is_functional(&e.predicate);
        let key = FactKey::new(
            eid(&e.subject),
            &e.predicate,
            (!functional).then(|| e.value.canonical_key()),
        );
        let fact = state.store.view().fact(&key).unwrap_or_else(|| panic!("{key} missing"));
        assert_eq!(fact.object, e.value);
        assert_eq!(fact.status, FactStatus::Inferred);
    }

    let second = run_link_inference(&mut state, at()).unwrap();
    assert_eq!(second.appended, 0);
}

#[test]
fn stream_fixture_meets_the_sla() {
    let dir = TempDir::new().unwrap();
    let mut state = PipelineState::open(config("stream/config.toml", &dir), at()).unwrap();
    let report = run_stream(&mut state, None).unwrap();
    assert_eq!(report.events, 200);
    assert_eq!(report.vandalism_filtered, 4);
    assert_eq!(report.tasks, 196);
    assert_eq!(report.sla.samples, 196);
    assert!(report.sla.p99_minutes <= 240.0);
    assert!(report.sla.max_minutes <= 90.0, "{:?}", report.sla);
    assert_eq!(report.sla.violations, 0);
    let deliveries = dir.path().join("runs/stream/deliveries.jsonl");
    assert!(deliveries.exists());
    // No vandal value reached the graph.
    for row in state.store.view().rows() {
        assert_ne!(row.fact.object, Value::quantity(999.0, "cm"));
        assert_ne!(row.fact.object, Value::quantity(1.0, "1"));
    }
}

#[test]
fn injected_delay_is_the_only_violation() {
    let dir = TempDir::new().unwrap();
    let mut state = PipelineState::open(config("stream/config_delay.toml", &dir), at()).unwrap();
    let report = run_stream(&mut state, None).unwrap();
    assert_eq!(report.sla.violations, 1, "{:?}", report.sla);
    assert!(report.sla.max_minutes > 300.0);
}

#[test]
fn empty_feed_exits_clean_with_an_empty_report() {
    let dir = TempDir::new().unwrap();
    let mut cfg = config("stream/config.toml", &dir);
    cfg.paths.feed = Some(fixtures().join("stream/empty_feed.jsonl"));
    let mut state = PipelineState::open(cfg, at()).unwrap();
    let report = run_stream(&mut state, Some(at())).unwrap();
    assert_eq!(report.events, 0);
    assert_eq!(report.ingest.total(), 0);
    assert_eq!(report.sla.samples, 0);
    assert_eq!(report.sla.violations, 0);
}

#[test]
fn batch_and_stream_converge_on_the_same_revisions() {
    // Stream the feed, then batch-crawl the latest revisions into a fresh
    // state: functional values from the final revisions agree.
    let s_dir = TempDir::new().unwrap();
    let mut s = PipelineState::open(config("stream/config.toml", &s_dir), at()).unwrap();
    run_stream(&mut s, None).unwrap();

    let b_dir = TempDir::new().unwrap();
    let mut cfg = config("stream/config.toml", &b_dir);
    cfg.mode = Mode::Batch;
    cfg.full_scan = true;
    let mut b = PipelineState::open(cfg, at()).unwrap();
    run_batch(&mut b, at(), None).unwrap();
    let sv = view_lines(&s);
    let bv = view_lines(&b);
    assert_eq!(sv, bv);
}

#[test]
fn materialize_is_deterministic_and_stats_count_the_view() {
    let dir = TempDir::new().unwrap();
    let mut state = PipelineState::open(config("family/config.toml", &dir), at()).unwrap();
    let empty = TempDir::new().unwrap();
    let mut cfg = config("family/config.toml", &empty);
    cfg.paths.seed_facts = None;
    let bare = PipelineState::open(cfg, at()).unwrap();
    let zero = stats(&bare).unwrap();
    assert_eq!((zero.log_rows, zero.view_facts, zero.curation.tasks), (0, 0, 0));

    let a = materialize(&mut state).unwrap();
    let first = std::fs::read(&a.path).unwrap();
    let b = materialize(&mut state).unwrap();
    assert_eq!(first, std::fs::read(&b.path).unwrap());
    assert_eq!(a.facts, 6);
    assert_eq!(stats(&state).unwrap().view_facts, 6);
}

#[test]
fn curated_golden_routes_are_present() {
    let golden = load_golden(&fixtures().join("golden.jsonl")).unwrap();
    assert!(golden.iter().any(|g| g.route == Route::Curation));
    assert!(golden.iter().all(|g| g.route != Route::Drop));
}
