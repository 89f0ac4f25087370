//! `odke`: runs the pipeline and its maintenance operations.
//!
//! Every command takes `--config <file.toml>`; flags named after config
//! fields fill in whatever the file leaves out (the file wins where both
//! set a value). `--state-dir` always wins, so one config can be pointed at
//! scratch directories. Reports go to stdout as JSON, or to `--out`.
//!
//! Exit codes: 0 success, 1 invalid input, 2 failure while running,
//! 3 golden-set mismatch.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use toml::{Table, Value as TomlValue};

use odke_core::clock::SystemClock;
use odke_core::extractors::{HttpModelClient, ModelExtractorClient};
use odke_core::pipeline::{
    apply_pending_decisions, materialize, run_batch, run_link_inference, run_stream, stats, Mode,
    PipelineConfig, PipelineError, PipelineState,
};
use odke_server::{curation_router, qa_router, serve_until_interrupted, ApiState, QaScript};

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_GOLDEN: u8 = 3;
const DEFAULT_MODEL_TIMEOUT_MS: u64 = 5_000;

#[derive(Parser)]
#[command(name = "odke", version, about = "Knowledge extraction and ingestion pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Profile the graph, extract, corroborate and ingest once.
    RunBatch(ConfigArgs),
    /// Replay the change feed with simulated polling and report the SLA.
    RunStream(ConfigArgs),
    /// Apply link-inference rules to the latest view.
    InferLinks(ConfigArgs),
    /// Rebuild the latest view from the log and write it to the state dir.
    Materialize(ConfigArgs),
    /// Counts from the latest view, curation store and past runs.
    Stats(ConfigArgs),
    /// Fold journaled curation decisions into the fact log.
    ApplyDecisions(ConfigArgs),
    /// Serve the curation API until interrupted.
    Serve {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
    /// Serve a scripted question-answering endpoint for the model extractor.
    QaMock {
        #[arg(long)]
        script: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8090")]
        addr: String,
    },
}

#[derive(Args, Clone, Default)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `paths.state_dir` even when the config file sets it.
    #[arg(long)]
    state_dir: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    search_k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    languages: Vec<String>,
    /// RFC 3339 run timestamp; the wall clock when unset.
    #[arg(long)]
    now: Option<DateTime<Utc>>,
    #[arg(long)]
    run_id: Option<String>,
    #[arg(long)]
    full_scan: Option<bool>,

    #[arg(long)]
    ontology: Option<PathBuf>,
    #[arg(long)]
    kg: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    rules: Vec<PathBuf>,
    #[arg(long)]
    feed: Option<PathBuf>,
    #[arg(long)]
    seed_facts: Option<PathBuf>,
    #[arg(long)]
    link_rules: Option<PathBuf>,
    #[arg(long)]
    query_templates: Option<PathBuf>,
    #[arg(long)]
    questions: Option<PathBuf>,
    #[arg(long)]
    golden: Option<PathBuf>,

    #[arg(long)]
    auto_threshold: Option<f64>,
    #[arg(long)]
    curation_floor: Option<f64>,
    #[arg(long)]
    merge_threshold: Option<f64>,
    #[arg(long)]
    sla_minutes: Option<f64>,
    #[arg(long)]
    poll_interval_minutes: Option<i64>,
    #[arg(long)]
    model_endpoint: Option<String>,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

fn failure(code: u8, message: impl std::fmt::Display) -> Failure {
    Failure {
        code,
        message: message.to_string(),
    }
}

fn abs(p: &Path) -> TomlValue {
    let p = std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
    TomlValue::String(p.display().to_string())
}

fn put<T: Into<TomlValue>>(table: &mut Table, key: &str, value: Option<T>) {
    if let Some(v) = value {
        table.insert(key.into(), v.into());
    }
}

impl ConfigArgs {
    /// The config as flags describe it. Paths are made absolute here so they
    /// stay relative to the working directory, not the config file.
    fn flag_table(&self) -> Table {
        let mut root = Table::new();
        put(&mut root, "workers", self.workers.map(|n| n as i64));
        put(&mut root, "search_k", self.search_k.map(|n| n as i64));
        if !self.languages.is_empty() {
            root.insert("languages".into(), self.languages.clone().into());
        }
        put(&mut root, "now", self.now.map(|t| t.to_rfc3339()));
        put(&mut root, "run_id", self.run_id.clone());
        put(&mut root, "full_scan", self.full_scan);

        let mut paths = Table::new();
        for (key, value) in [
            ("ontology", &self.ontology),
            ("kg", &self.kg),
            ("corpus", &self.corpus),
            ("feed", &self.feed),
            ("seed_facts", &self.seed_facts),
            ("link_rules", &self.link_rules),
            ("query_templates", &self.query_templates),
            ("questions", &self.questions),
            ("golden", &self.golden),
        ] {
            put(&mut paths, key, value.as_deref().map(abs));
        }
        if !self.rules.is_empty() {
            let rules: Vec<TomlValue> = self.rules.iter().map(|p| abs(p)).collect();
            paths.insert("rules".into(), rules.into());
        }
        put(&mut paths, "state_dir", self.state_dir.as_deref().map(abs));

        let mut scoring = Table::new();
        put(&mut scoring, "auto_threshold", self.auto_threshold);
        put(&mut scoring, "curation_floor", self.curation_floor);
        put(&mut scoring, "merge_threshold", self.merge_threshold);
        let mut stream = Table::new();
        put(&mut stream, "sla_minutes", self.sla_minutes);
        put(&mut stream, "poll_interval_minutes", self.poll_interval_minutes);
        let mut model = Table::new();
        put(&mut model, "endpoint", self.model_endpoint.clone());

        for (key, t) in [("paths", paths), ("scoring", scoring), ("stream", stream), ("model", model)] {
            if !t.is_empty() {
                root.insert(key.into(), t.into());
            }
        }
        root
    }

    fn load(&self) -> Result<PipelineConfig, Failure> {
        let mut table = self.flag_table();
        let base = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| failure(EXIT_VALIDATION, format!("{}: {e}", path.display())))?;
                let file: Table = text
                    .parse()
                    .map_err(|e| failure(EXIT_VALIDATION, format!("{}: {e}", path.display())))?;
                merge(&mut table, file);
                path.parent().unwrap_or(Path::new(".")).to_path_buf()
            }
            None => PathBuf::from("."),
        };
        let text = toml::to_string(&table).map_err(|e| failure(EXIT_VALIDATION, e))?;
        let mut cfg = PipelineConfig::from_toml(&text, &base)?;
        if let Some(dir) = &self.state_dir {
            cfg.paths.state_dir = dir.clone();
        }
        Ok(cfg)
    }

    fn open(&self, mode: Option<Mode>) -> Result<(PipelineState, DateTime<Utc>), Failure> {
        let mut cfg = self.load()?;
        if let Some(m) = mode {
            cfg.mode = m;
        }
        let at = cfg.now.unwrap_or_else(Utc::now);
        Ok((PipelineState::open(cfg, at)?, at))
    }

    fn emit(&self, report: &impl Serialize) -> Result<(), Failure> {
        let json = serde_json::to_string_pretty(report).map_err(|e| failure(EXIT_RUNTIME, e))?;
        match &self.out {
            Some(path) => std::fs::write(path, json + "\n")
                .map_err(|e| failure(EXIT_RUNTIME, format!("{}: {e}", path.display()))),
            None => {
                println!("{json}");
                Ok(())
            }
        }
    }
}

/// Deep merge where `over` wins on conflicting leaves.
fn merge(base: &mut Table, over: Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(TomlValue::Table(b)), TomlValue::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

fn model_client(cfg: &PipelineConfig) -> Option<HttpModelClient> {
    cfg.model.endpoint.as_deref().map(|url| {
        let timeout = cfg.model.timeout_ms.unwrap_or(DEFAULT_MODEL_TIMEOUT_MS);
        HttpModelClient::new(url, Duration::from_millis(timeout))
    })
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::RunBatch(args) => {
            let (mut state, at) = args.open(Some(Mode::Batch))?;
            let client = model_client(&state.config);
            let model = client.as_ref().map(|c| c as &dyn ModelExtractorClient);
            let report = run_batch(&mut state, at, model)?;
            args.emit(&report)?;
            match &report.golden {
                Some(g) if !g.passed() => Err(failure(
                    EXIT_GOLDEN,
                    format!(
                        "golden mismatch: precision {:.4}, recall {:.4}, {} missing, {} unexpected",
                        g.precision,
                        g.recall,
                        g.missing.len(),
                        g.unexpected.len()
                    ),
                )),
                _ => Ok(()),
            }
        }
        Command::RunStream(args) => {
            let (mut state, _) = args.open(Some(Mode::Stream))?;
            let report = run_stream(&mut state, None)?;
            args.emit(&report)
        }
        Command::InferLinks(args) => {
            let (mut state, at) = args.open(None)?;
            let report = run_link_inference(&mut state, at)?;
            args.emit(&report)
        }
        Command::Materialize(args) => {
            let (mut state, _) = args.open(None)?;
            let report = materialize(&mut state)?;
            args.emit(&report)
        }
        Command::Stats(args) => {
            let (state, _) = args.open(None)?;
            args.emit(&stats(&state)?)
        }
        Command::ApplyDecisions(args) => {
            let (mut state, at) = args.open(None)?;
            let run_id = state
                .config
                .run_id
                .clone()
                .unwrap_or_else(|| format!("curation-{}", at.format("%Y%m%dT%H%M%SZ")));
            let report = apply_pending_decisions(&mut state, &run_id, at)?;
            args.emit(&report)
        }
        Command::Serve { config, addr } => {
            let (state, _) = config.open(None)?;
            let PipelineState { kg, tasks, .. } = state;
            let api = ApiState {
                store: Arc::new(tasks),
                kg: Arc::new(kg),
                clock: Arc::new(SystemClock),
            };
            serve_until_interrupted(&addr, curation_router(api), announce)
                .map_err(|e| failure(EXIT_RUNTIME, e))
        }
        Command::QaMock { script, addr } => {
            let script = QaScript::load(&script).map_err(|e| failure(EXIT_VALIDATION, e))?;
            let client: Arc<dyn ModelExtractorClient> = Arc::new(script.into_client());
            serve_until_interrupted(&addr, qa_router(client), announce)
                .map_err(|e| failure(EXIT_RUNTIME, e))
        }
    }
}

fn announce(addr: SocketAddr) {
    eprintln!("listening on http://{addr}");
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("ODKE_LOG")
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("odke: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
