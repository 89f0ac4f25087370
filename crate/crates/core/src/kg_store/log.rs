//! Append-only, versioned fact log.
//!
//! On-disk format: a schema header line followed by one record per line,
//! `{"checksum":"<crc32 hex>","row":<VersionedFactRow>}`, where the checksum
//! covers the exact bytes of the `row` JSON. Rows are never rewritten.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::Deserialize;
use serde_json::value::RawValue;

use super::graph::KnowledgeGraph;
use super::types::{Fact, FactKey, VersionedFactRow};
use crate::extractors::{validate_fact, Violation};
use crate::schema;

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("fact log {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("fact log {path}: {source}")]
    Header {
        path: String,
        source: schema::HeaderError,
    },
    #[error("corrupt fact log row at byte offset {offset} (line {line}): {reason}")]
    Corrupt {
        offset: u64,
        line: usize,
        reason: String,
    },
}

#[derive(Debug, Default)]
pub struct AppendOutcome {
    pub rows: Vec<VersionedFactRow>,
    /// Index into the input batch and the constraint it failed.
    pub rejected: Vec<(usize, Violation)>,
}

#[derive(Deserialize)]
struct RawLine<'a> {
    checksum: String,
    #[serde(borrow)]
    row: &'a RawValue,
}

pub fn checksum(bytes: &[u8]) -> String {
    format!("{:08x}", crc32fast::hash(bytes))
}

fn encode_row(row: &VersionedFactRow) -> String {
    let body = serde_json::to_string(row).expect("row serializes");
    format!("{{\"checksum\":\"{}\",\"row\":{body}}}\n", checksum(body.as_bytes()))
}

fn decode_line(line: &str, offset: u64, lineno: usize) -> Result<VersionedFactRow, LogError> {
    let corrupt = |reason: String| LogError::Corrupt {
        offset,
        line: lineno,
        reason,
    };
    let raw: RawLine = serde_json::from_str(line).map_err(|e| corrupt(e.to_string()))?;
    let actual = checksum(raw.row.get().as_bytes());
    if actual != raw.checksum {
        return Err(corrupt(format!(
            "checksum mismatch: stored {}, computed {actual}",
            raw.checksum
        )));
    }
    serde_json::from_str(raw.row.get()).map_err(|e| corrupt(e.to_string()))
}

/// Reads every row of the log at `path` up to `limit` bytes, verifying
/// checksums. A trailing line without a newline is treated as corrupt.
fn read_rows(
    path: &Path,
    limit: Option<u64>,
    mut visit: impl FnMut(VersionedFactRow),
) -> Result<(), LogError> {
    let io = |source| LogError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::open(path).map_err(io)?;
    let reader: Box<dyn Read> = match limit {
        Some(n) => Box::new(file.take(n)),
        None => Box::new(file),
    };
    let mut reader = BufReader::with_capacity(1 << 16, reader);
    let mut line = String::new();
    let mut offset = 0u64;
    let mut lineno = 0usize;
    loop {
        line.clear();
        let n = reader.read_line(&mut line).map_err(io)?;
        if n == 0 {
            break;
        }
        lineno += 1;
        if !line.ends_with('\n') {
            return Err(LogError::Corrupt {
                offset,
                line: lineno,
                reason: "truncated row".into(),
            });
        }
        if lineno == 1 {
            schema::check_header(&line, schema::FACT_LOG).map_err(|source| LogError::Header {
                path: path.display().to_string(),
                source,
            })?;
        } else if !line.trim().is_empty() {
            visit(decode_line(line.trim_end(), offset, lineno)?);
        }
        offset += n as u64;
    }
    if lineno == 0 {
        return Err(LogError::Header {
            path: path.display().to_string(),
            source: schema::HeaderError::Missing,
        });
    }
    Ok(())
}

/// Scans a log file from disk. Independent of any open [`FactLog`].
pub fn scan_file(path: &Path) -> Result<Vec<VersionedFactRow>, LogError> {
    let mut rows = Vec::new();
    read_rows(path, None, |r| rows.push(r))?;
    Ok(rows)
}

/// Writes `rows` verbatim as a fresh log file. Used to import logs produced
/// elsewhere; [`FactLog::open`] re-checks version continuity.
pub fn write_log(path: &Path, rows: &[VersionedFactRow]) -> Result<(), LogError> {
    let io = |source| LogError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = std::io::BufWriter::new(File::create(path).map_err(io)?);
    schema::write_header(&mut out, schema::FACT_LOG).map_err(io)?;
    for row in rows {
        out.write_all(encode_row(row).as_bytes()).map_err(io)?;
    }
    let file = out.into_inner().map_err(|e| io(e.into_error()))?;
    file.sync_all().map_err(io)
}

struct Writer {
    file: File,
    versions: HashMap<FactKey, u64>,
    len: u64,
}

/// Single-writer, multi-reader handle. Appends are serialized internally and
/// synced before returning; readers only ever see whole committed batches.
pub struct FactLog {
    path: PathBuf,
    writer: Mutex<Writer>,
    committed: AtomicU64,
}

impl std::fmt::Debug for FactLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FactLog")
            .field("path", &self.path)
            .field("committed", &self.committed)
            .finish()
    }
}

impl FactLog {
    /// Opens the log, creating it with a header if absent, and rebuilds the
    /// per-key version counters by scanning it.
    pub fn open(path: &Path) -> Result<Self, LogError> {
        let io = |source| LogError::Io {
            path: path.display().to_string(),
            source,
        };
        if !path.exists() {
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(io)?;
            }
            let mut f = File::create(path).map_err(io)?;
            schema::write_header(&mut f, schema::FACT_LOG).map_err(io)?;
            f.sync_all().map_err(io)?;
        }
        let mut versions: HashMap<FactKey, u64> = HashMap::new();
        let mut gap: Option<String> = None;
        read_rows(path, None, |row| {
            let v = versions.entry(row.key.clone()).or_insert(0);
            if row.version != *v + 1 && gap.is_none() {
                gap = Some(format!(
                    "key {} jumps from version {} to {}",
                    row.key, v, row.version
                ));
            }
            *v = row.version;
        })?;
        if let Some(reason) = gap {
            return Err(LogError::Corrupt {
                offset: 0,
                line: 0,
                reason,
            });
        }
        let file = OpenOptions::new().append(true).open(path).map_err(io)?;
        let len = file.metadata().map_err(io)?.len();
        Ok(FactLog {
            path: path.to_path_buf(),
            writer: Mutex::new(Writer {
                file,
                versions,
                len,
            }),
            committed: AtomicU64::new(len),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Committed byte length; never decreases.
    pub fn byte_len(&self) -> u64 {
        self.committed.load(Ordering::Acquire)
    }

    pub fn max_version(&self, key: &FactKey) -> Option<u64> {
        self.writer.lock().unwrap().versions.get(key).copied()
    }

    /// Validates and appends `facts`, one row each. Facts that violate the
    /// ontology are reported in [`AppendOutcome::rejected`]; the rest of the
    /// batch is still appended. Durable before return.
    pub fn append_facts(
        &self,
        facts: &[Fact],
        run_id: &str,
        appended_at: DateTime<Utc>,
        kg: &KnowledgeGraph,
    ) -> Result<AppendOutcome, LogError> {
        let mut outcome = AppendOutcome::default();
        if facts.is_empty() {
            return Ok(outcome);
        }
        let mut w = self.writer.lock().unwrap();
        let mut staged: HashMap<FactKey, u64> = HashMap::new();
        let mut buf = String::new();
        for (i, fact) in facts.iter().enumerate() {
            if let Err(v) = validate_fact(fact, kg) {
                outcome.rejected.push((i, v));
                continue;
            }
            let key = kg
                .ontology()
                .key_for(fact)
                .expect("validated fact has a known predicate");
            let prev = staged
                .get(&key)
                .or_else(|| w.versions.get(&key))
                .copied()
                .unwrap_or(0);
            let row = VersionedFactRow {
                key: key.clone(),
                version: prev + 1,
                fact: fact.clone(),
                appended_at,
                run_id: run_id.to_string(),
            };
            staged.insert(key, prev + 1);
            buf.push_str(&encode_row(&row));
            outcome.rows.push(row);
        }
        if buf.is_empty() {
            return Ok(outcome);
        }
        let io = |source| LogError::Io {
            path: self.path.display().to_string(),
            source,
        };
        w.file.write_all(buf.as_bytes()).map_err(io)?;
        w.file.sync_data().map_err(io)?;
        w.len += buf.len() as u64;
        w.versions.extend(staged);
        self.committed.store(w.len, Ordering::Release);
        Ok(outcome)
    }

    /// Rows of the committed prefix, in append order.
    pub fn scan(&self) -> Result<Vec<VersionedFactRow>, LogError> {
        let mut rows = Vec::new();
        self.for_each_row(|r| rows.push(r))?;
        Ok(rows)
    }

    pub fn for_each_row(&self, visit: impl FnMut(VersionedFactRow)) -> Result<(), LogError> {
        read_rows(&self.path, Some(self.byte_len()), visit)
    }
}
