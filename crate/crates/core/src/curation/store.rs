//! Durable task store: `tasks.jsonl` (`odke.curation_tasks`) holds generated
//! tasks, `decisions.jsonl` (`odke.decisions`) is the append-only decision
//! journal. Replaying both files reproduces the in-memory state.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::extractors::validate_triple;
use crate::kg_store::{KnowledgeGraph, Value, ValueKind};
use crate::schema;

use super::{decision_id, CurationTask, Decision, TaskStatus, Verdict};

pub const TASKS_FILE: &str = "tasks.jsonl";
pub const DECISIONS_FILE: &str = "decisions.jsonl";
pub const MAX_PAGE_SIZE: usize = 100;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Header {
        path: String,
        source: schema::HeaderError,
    },
    #[error("{path} line {line}: {message}")]
    Record {
        path: String,
        line: usize,
        message: String,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum DecideError {
    #[error("no task {0}")]
    NotFound(String),
    #[error("task {} already decided by {}", .0.task_id, .0.curator_id)]
    Conflict(Box<Decision>),
    #[error("invalid decision: {0}")]
    Invalid(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreStats {
    pub tasks: usize,
    pub pending: usize,
    pub decided: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub amended: usize,
    pub sensitive: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPage {
    pub items: Vec<CurationTask>,
    pub total: usize,
    pub page: usize,
    pub page_size: usize,
    pub pages: usize,
}

struct Inner {
    order: Vec<String>,
    tasks: BTreeMap<String, CurationTask>,
    decisions: BTreeMap<String, Decision>,
    task_file: File,
    decision_file: File,
}

pub struct TaskStore {
    dir: PathBuf,
    inner: Mutex<Inner>,
}

impl std::fmt::Debug for TaskStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TaskStore").field("dir", &self.dir).finish()
    }
}

fn open_journal<T: DeserializeOwned>(
    path: &Path,
    schema_name: &str,
) -> Result<(Vec<T>, File), StoreError> {
    let io = |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    };
    if !path.exists() {
        let mut f = File::create(path).map_err(io)?;
        schema::write_header(&mut f, schema_name).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    let records = schema::read_records(BufReader::new(File::open(path).map_err(io)?), schema_name)
        .map_err(|source| StoreError::Header {
            path: path.display().to_string(),
            source,
        })?;
    let last = records.len();
    let mut out = Vec::with_capacity(records.len());
    for (i, (line, text)) in records.into_iter().enumerate() {
        match serde_json::from_str(&text) {
            Ok(v) => out.push(v),
            // A torn final line means the write never completed, so it was
            // never acknowledged either.
            Err(e) if i + 1 == last && !text.ends_with('}') => {
                tracing::warn!(path = %path.display(), line, error = %e, "ignoring torn record");
            }
            Err(e) => {
                return Err(StoreError::Record {
                    path: path.display().to_string(),
                    line,
                    message: e.to_string(),
                })
            }
        }
    }
    let file = OpenOptions::new().append(true).open(path).map_err(io)?;
    Ok((out, file))
}

fn append_line<T: Serialize>(file: &mut File, path: &Path, record: &T) -> Result<(), StoreError> {
    let io = |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut line = serde_json::to_string(record).expect("record serializes");
    line.push('\n');
    file.write_all(line.as_bytes()).map_err(io)?;
    file.sync_data().map_err(io)
}

impl TaskStore {
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        std::fs::create_dir_all(dir).map_err(|source| StoreError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let (task_rows, task_file) =
            open_journal::<CurationTask>(&dir.join(TASKS_FILE), schema::CURATION_TASKS)?;
        let (decision_rows, decision_file) =
            open_journal::<Decision>(&dir.join(DECISIONS_FILE), schema::DECISIONS)?;
        let mut order = Vec::new();
        let mut tasks = BTreeMap::new();
        for t in task_rows {
            if !tasks.contains_key(&t.task_id) {
                order.push(t.task_id.clone());
                tasks.insert(t.task_id.clone(), t);
            }
        }
        let mut decisions = BTreeMap::new();
        for d in decision_rows {
            // First write wins on replay exactly as it did live.
            decisions.entry(d.task_id.clone()).or_insert(d);
        }
        for (id, task) in tasks.iter_mut() {
            if decisions.contains_key(id) {
                task.status = TaskStatus::Decided;
            }
        }
        Ok(TaskStore {
            dir: dir.to_path_buf(),
            inner: Mutex::new(Inner {
                order,
                tasks,
                decisions,
                task_file,
                decision_file,
            }),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Adds tasks whose id is new; returns how many were added.
    pub fn add_tasks(&self, tasks: Vec<CurationTask>) -> Result<usize, StoreError> {
        let mut inner = self.inner.lock().unwrap();
        let path = self.dir.join(TASKS_FILE);
        let mut added = 0;
        for mut t in tasks {
            if inner.tasks.contains_key(&t.task_id) {
                continue;
            }
            t.status = TaskStatus::Pending;
            append_line(&mut inner.task_file, &path, &t)?;
            inner.order.push(t.task_id.clone());
            inner.tasks.insert(t.task_id.clone(), t);
            added += 1;
        }
        Ok(added)
    }

    pub fn get(&self, task_id: &str) -> Option<(CurationTask, Option<Decision>)> {
        let inner = self.inner.lock().unwrap();
        let task = inner.tasks.get(task_id)?.clone();
        Some((task, inner.decisions.get(task_id).cloned()))
    }

    /// `page` is 1-based; `page_size` is clamped to `1..=MAX_PAGE_SIZE`.
    pub fn list(&self, status: Option<TaskStatus>, page: usize, page_size: usize) -> TaskPage {
        let inner = self.inner.lock().unwrap();
        let page_size = page_size.clamp(1, MAX_PAGE_SIZE);
        let page = page.max(1);
        let matching: Vec<&CurationTask> = inner
            .order
            .iter()
            .map(|id| &inner.tasks[id])
            .filter(|t| status.is_none_or(|s| t.status == s))
            .collect();
        let total = matching.len();
        TaskPage {
            items: matching
                .into_iter()
                .skip((page - 1) * page_size)
                .take(page_size)
                .cloned()
                .collect(),
            total,
            page,
            page_size,
            pages: total.div_ceil(page_size),
        }
    }

    pub fn tasks(&self) -> Vec<CurationTask> {
        let inner = self.inner.lock().unwrap();
        inner.order.iter().map(|id| inner.tasks[id].clone()).collect()
    }

    pub fn decisions(&self) -> Vec<Decision> {
        self.inner.lock().unwrap().decisions.values().cloned().collect()
    }

    /// Records the first decision for a task. The journal line is synced
    /// before this returns; any later decision gets [`DecideError::Conflict`]
    /// carrying the winner.
    pub fn decide(
        &self,
        task_id: &str,
        verdict: Verdict,
        curator_id: &str,
        at: DateTime<Utc>,
        kg: &KnowledgeGraph,
    ) -> Result<Decision, DecideError> {
        if curator_id.trim().is_empty() {
            return Err(DecideError::Invalid("curator id is required".into()));
        }
        let mut inner = self.inner.lock().unwrap();
        let task = inner
            .tasks
            .get(task_id)
            .ok_or_else(|| DecideError::NotFound(task_id.to_string()))?;
        if let Some(d) = inner.decisions.get(task_id) {
            return Err(DecideError::Conflict(Box::new(d.clone())));
        }
        match &verdict {
            Verdict::Accept { cluster_id } => {
                if task.cluster(*cluster_id).is_none() {
                    return Err(DecideError::Invalid(format!(
                        "task {task_id} has no cluster {cluster_id}"
                    )));
                }
            }
            Verdict::Amend { value } => check_amendment(task, value, kg)?,
            Verdict::RejectAll => {}
        }
        let decision = Decision {
            decision_id: decision_id(task_id),
            task_id: task_id.to_string(),
            verdict,
            curator_id: curator_id.to_string(),
            decided_at: at,
        };
        let path = self.dir.join(DECISIONS_FILE);
        append_line(&mut inner.decision_file, &path, &decision)?;
        inner.decisions.insert(task_id.to_string(), decision.clone());
        if let Some(t) = inner.tasks.get_mut(task_id) {
            t.status = TaskStatus::Decided;
        }
        Ok(decision)
    }

    pub fn stats(&self) -> StoreStats {
        let inner = self.inner.lock().unwrap();
        let mut s = StoreStats {
            tasks: inner.tasks.len(),
            sensitive: inner.tasks.values().filter(|t| t.sensitive).count(),
            ..StoreStats::default()
        };
        for d in inner.decisions.values() {
            match d.verdict {
                Verdict::Accept { .. } => s.accepted += 1,
                Verdict::RejectAll => s.rejected += 1,
                Verdict::Amend { .. } => s.amended += 1,
            }
        }
        s.decided = inner
            .tasks
            .values()
            .filter(|t| t.status == TaskStatus::Decided)
            .count();
        s.pending = s.tasks - s.decided;
        s
    }
}

fn check_amendment(task: &CurationTask, value: &Value, kg: &KnowledgeGraph) -> Result<(), DecideError> {
    let p = kg
        .ontology()
        .get(&task.predicate)
        .ok_or_else(|| DecideError::Invalid(format!("unknown predicate {}", task.predicate)))?;
    // A name in an entity slot is resolved at ingestion time.
    if p.value_kind == ValueKind::EntityRef && matches!(value, Value::Text { .. }) {
        return Ok(());
    }
    validate_triple(&task.subject.id, &task.predicate, value, kg)
        .map_err(|v| DecideError::Invalid(v.to_string()))
}
