use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, TimeZone, Utc};
use serde_json::{json, Value as Json};
use tempfile::TempDir;

use odke_core::clock::FixedClock;
use odke_core::curation::{CurationTask, TaskStore};
use odke_core::pipeline::{apply_pending_decisions, run_batch, PipelineConfig, PipelineState};
use odke_core::{FactKey, FactStatus};
use odke_server::{curation_router, spawn, ApiState, ServeError, ServerHandle};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn at() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 6, 1, 0, 0, 0).unwrap()
}

fn config(dir: &TempDir) -> PipelineConfig {
    let mut cfg = PipelineConfig::load(&fixtures().join("golden.toml")).unwrap();
    cfg.paths.state_dir = dir.path().to_path_buf();
    cfg
}

/// Runs the golden batch so the state directory holds real curation tasks,
/// then serves them.
fn start(dir: &TempDir) -> (ServerHandle, ApiState) {
    let mut state = PipelineState::open(config(dir), at()).unwrap();
    run_batch(&mut state, at(), None).unwrap();
    let kg = Arc::new(state.kg.clone());
    drop(state);
    let api = ApiState {
        store: Arc::new(TaskStore::open(&dir.path().join("curation")).unwrap()),
        kg,
        clock: Arc::new(FixedClock(at())),
    };
    (spawn("127.0.0.1:0", curation_router(api.clone())).unwrap(), api)
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .build()
        .into()
}

fn get(url: &str) -> (u16, Json) {
    let mut resp = agent().get(url).call().unwrap();
    (resp.status().as_u16(), resp.body_mut().read_json().unwrap())
}

fn post(url: &str, curator: Option<&str>, body: &str) -> (u16, Json) {
    let mut req = agent().post(url).header("content-type", "application/json");
    if let Some(c) = curator {
        req = req.header("x-curator-id", c);
    }
    let mut resp = req.send(body).unwrap();
    (resp.status().as_u16(), resp.body_mut().read_json().unwrap())
}

fn task_for(api: &ApiState, subject: &str, predicate: &str) -> CurationTask {
    api.store
        .tasks()
        .into_iter()
        .find(|t| t.subject.id.as_str() == subject && t.predicate == predicate)
        .unwrap()
}

#[test]
fn listing_filters_and_pages() {
    let dir = TempDir::new().unwrap();
    let (server, _) = start(&dir);
    let base = server.url();

    let (status, page) = get(&format!("{base}/tasks?status=pending"));
    assert_eq!(status, 200);
    assert_eq!(page["total"], 8);
    assert_eq!(page["page"], 1);
    assert_eq!(page["items"].as_array().unwrap().len(), 8);

    let (_, page) = get(&format!("{base}/tasks?page_size=3&page=3"));
    assert_eq!(page["pages"], 3);
    assert_eq!(page["items"].as_array().unwrap().len(), 2);

    let (_, decided) = get(&format!("{base}/tasks?status=decided"));
    assert_eq!(decided["total"], 0);

    let (status, err) = get(&format!("{base}/tasks?status=maybe"));
    assert_eq!(status, 422);
    assert_eq!(err["error"]["code"], "invalid_query");
    let (status, err) = get(&format!("{base}/tasks?page=0"));
    assert_eq!(status, 422);
    assert_eq!(err["error"]["code"], "invalid_query");

    let (status, err) = get(&format!("{base}/tasks/ct-nope"));
    assert_eq!(status, 404);
    assert_eq!(err["error"]["code"], "not_found");

    let (status, stats) = get(&format!("{base}/stats"));
    assert_eq!(status, 200);
    assert_eq!((stats["tasks"].as_u64(), stats["pending"].as_u64()), (Some(8), Some(8)));
    assert_eq!(stats["sensitive"], 5);
    server.shutdown().unwrap();
}

#[test]
fn task_detail_carries_context_and_snippets() {
    let dir = TempDir::new().unwrap();
    let (server, api) = start(&dir);
    let task = task_for(&api, "Q700003", "P2048");
    let (status, detail) = get(&format!("{}/tasks/{}", server.url(), task.task_id));
    assert_eq!(status, 200);
    assert_eq!(detail["decision"], Json::Null);
    let clusters = detail["task"]["clusters"].as_array().unwrap();
    assert_eq!(clusters.len(), 2);
    for c in clusters {
        let snippet = &c["snippets"][0];
        let text = snippet["text"].as_str().unwrap();
        let (s, e) = (
            snippet["highlight_start"].as_u64().unwrap() as usize,
            snippet["highlight_end"].as_u64().unwrap() as usize,
        );
        let highlighted: String = text.chars().skip(s).take(e - s).collect();
        assert!(highlighted.ends_with(" m"), "{highlighted:?}");
    }
    server.shutdown().unwrap();
}

#[test]
fn decisions_are_validated() {
    let dir = TempDir::new().unwrap();
    let (server, api) = start(&dir);
    let task = task_for(&api, "Q700003", "P2048");
    let url = format!("{}/tasks/{}/decision", server.url(), task.task_id);

    let (status, err) = post(&url, None, r#"{"verdict":"reject_all"}"#);
    assert_eq!((status, err["error"]["code"].as_str()), (400, Some("missing_curator")));
    let (status, err) = post(&url, Some("cur-1"), r#"{"verdict":"maybe"}"#);
    assert_eq!((status, err["error"]["code"].as_str()), (400, Some("bad_request")));
    let (status, err) = post(&url, Some("cur-1"), r#"{"verdict":{"accept":{"cluster_id":9}}}"#);
    assert_eq!((status, err["error"]["code"].as_str()), (422, Some("invalid_decision")));
    // A date is not a height.
    let amend = json!({"verdict": {"amend": {"value": {"kind": "date", "date": "2000-01-01", "precision": "day"}}}});
    let (status, err) = post(&url, Some("cur-1"), &amend.to_string());
    assert_eq!((status, err["error"]["code"].as_str()), (422, Some("invalid_decision")));
    let (status, err) = post(
        &format!("{}/tasks/ct-missing/decision", server.url()),
        Some("cur-1"),
        r#"{"verdict":"reject_all"}"#,
    );
    assert_eq!((status, err["error"]["code"].as_str()), (404, Some("not_found")));
    assert_eq!(api.store.stats().decided, 0);
    server.shutdown().unwrap();
}

#[test]
fn second_decision_conflicts_and_the_first_survives_a_restart() {
    let dir = TempDir::new().unwrap();
    let (server, api) = start(&dir);
    let task = task_for(&api, "Q700003", "P2048");
    let url = format!("{}/tasks/{}/decision", server.url(), task.task_id);

    let (status, first) = post(&url, Some("cur-1"), r#"{"verdict":{"accept":{"cluster_id":2}}}"#);
    assert_eq!(status, 201);
    assert_eq!(first["verdict"], json!({"accept": {"cluster_id": 2}}));
    let (status, err) = post(&url, Some("cur-2"), r#"{"verdict":"reject_all"}"#);
    assert_eq!(status, 409);
    assert_eq!(err["error"]["code"], "conflict");
    assert_eq!(err["decision"], first);
    server.shutdown().unwrap();

    let reopened = TaskStore::open(&dir.path().join("curation")).unwrap();
    let (t, d) = reopened.get(&task.task_id).unwrap();
    assert_eq!(serde_json::to_value(d.unwrap()).unwrap(), first);
    assert_eq!(serde_json::to_value(t.status).unwrap(), "decided");
}

#[test]
fn concurrent_decisions_have_exactly_one_winner() {
    let dir = TempDir::new().unwrap();
    let (server, api) = start(&dir);
    let task = task_for(&api, "Q700004", "P27");
    let url = format!("{}/tasks/{}/decision", server.url(), task.task_id);
    let statuses: Vec<u16> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..8)
            .map(|i| {
                let url = url.clone();
                s.spawn(move || post(&url, Some(&format!("cur-{i}")), r#"{"verdict":"reject_all"}"#).0)
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert_eq!(statuses.iter().filter(|&&s| s == 201).count(), 1);
    assert_eq!(statuses.iter().filter(|&&s| s == 409).count(), 7);
    let journal = std::fs::read_to_string(dir.path().join("curation/decisions.jsonl")).unwrap();
    assert_eq!(journal.lines().count(), 2, "header plus one decision");
    server.shutdown().unwrap();
}

#[test]
fn curation_loop_feeds_back_into_the_view() {
    let dir = TempDir::new().unwrap();
    let (server, api) = start(&dir);
    let height = task_for(&api, "Q700003", "P2048");
    let citizenship = task_for(&api, "Q700004", "P27");
    let rank2 = height.cluster(2).unwrap().value.clone();

    let (status, _) = post(
        &format!("{}/tasks/{}/decision", server.url(), height.task_id),
        Some("cur-1"),
        r#"{"verdict":{"accept":{"cluster_id":2}}}"#,
    );
    assert_eq!(status, 201);
    let (status, _) = post(
        &format!("{}/tasks/{}/decision", server.url(), citizenship.task_id),
        Some("cur-1"),
        r#"{"verdict":"reject_all"}"#,
    );
    assert_eq!(status, 201);
    server.shutdown().unwrap();

    let mut state = PipelineState::open(config(&dir), at()).unwrap();
    let report = apply_pending_decisions(&mut state, "curation-1", at()).unwrap();
    assert_eq!(report.applied.len(), 2);
    let view = state.store.view();
    let accepted = view.fact(&FactKey::new(height.subject.id.clone(), "P2048", None)).unwrap();
    assert_eq!(accepted.object, rank2);
    assert_eq!(accepted.confidence, 1.0);
    assert_eq!(accepted.status, FactStatus::CuratedAccepted);
    let rejected = citizenship.cluster(1).unwrap().value.canonical_key();
    assert!(view
        .fact(&FactKey::new(citizenship.subject.id.clone(), "P27", Some(rejected)))
        .is_none());

    // Applying again is a no-op.
    let again = apply_pending_decisions(&mut state, "curation-2", at()).unwrap();
    assert_eq!((again.applied.len(), again.already_applied.len()), (0, 2));
}

#[test]
fn busy_port_is_a_startup_error_and_shutdown_releases_it() {
    let dir = TempDir::new().unwrap();
    let (server, api) = start(&dir);
    let addr = server.addr().to_string();
    match spawn(&addr, curation_router(api.clone())) {
        Err(ServeError::Bind { .. }) => {}
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("second bind succeeded"),
    }
    server.shutdown().unwrap();
    assert!(std::net::TcpStream::connect(&addr).is_err());
    let again = spawn(&addr, curation_router(api)).unwrap();
    again.shutdown().unwrap();
}
