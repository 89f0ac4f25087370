//! Golden fact sets (`odke.golden` v1): the facts a run is expected to
//! route to ingestion or curation, one record per line.

use std::collections::BTreeSet;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corroborator::{Route, ScoredFact};
use crate::kg_store::{EntityId, Value};
use crate::schema;

use super::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenRecord {
    pub subject: EntityId,
    pub predicate: String,
    pub value: Value,
    pub route: Route,
}

impl GoldenRecord {
    fn identity(&self) -> String {
        format!(
            "{}|{}|{}|{:?}",
            self.subject,
            self.predicate,
            self.value.canonical_key(),
            self.route
        )
    }

    pub fn from_scored(f: &ScoredFact) -> Self {
        GoldenRecord {
            subject: f.fact.subject.clone(),
            predicate: f.fact.predicate.clone(),
            value: f.fact.object.clone(),
            route: f.route,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenReport {
    pub expected: usize,
    pub produced: usize,
    pub matched: usize,
    pub precision: f64,
    pub recall: f64,
    /// Expected but not produced.
    pub missing: Vec<String>,
    /// Produced but not expected.
    pub unexpected: Vec<String>,
}

impl GoldenReport {
    pub fn passed(&self) -> bool {
        self.missing.is_empty() && self.unexpected.is_empty()
    }
}

pub fn load_golden(path: &Path) -> Result<Vec<GoldenRecord>, PipelineError> {
    let err = |m: String| PipelineError::Validation(format!("{}: {m}", path.display()));
    let file = std::fs::File::open(path).map_err(|e| err(e.to_string()))?;
    let records = schema::read_records(BufReader::new(file), schema::GOLDEN).map_err(|e| err(e.to_string()))?;
    records
        .into_iter()
        .map(|(line, text)| serde_json::from_str(&text).map_err(|e| err(format!("line {line}: {e}"))))
        .collect()
}

pub fn write_golden(path: &Path, records: &[GoldenRecord]) -> std::io::Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    schema::write_header(&mut out, schema::GOLDEN)?;
    for r in records {
        writeln!(out, "{}", serde_json::to_string(r).expect("record serializes"))?;
    }
    out.flush()
}

/// Set comparison on (subject, predicate, value, route). Empty sides count
/// as perfect precision or recall.
pub fn compare_golden(golden: &[GoldenRecord], produced: &[GoldenRecord]) -> GoldenReport {
    let expected: BTreeSet<String> = golden.iter().map(GoldenRecord::identity).collect();
    let got: BTreeSet<String> = produced.iter().map(GoldenRecord::identity).collect();
    let matched = expected.intersection(&got).count();
    let ratio = |n: usize, d: usize| if d == 0 { 1.0 } else { n as f64 / d as f64 };
    GoldenReport {
        expected: expected.len(),
        produced: got.len(),
        matched,
        precision: ratio(matched, got.len()),
        recall: ratio(matched, expected.len()),
        missing: expected.difference(&got).cloned().collect(),
        unexpected: got.difference(&expected).cloned().collect(),
    }
}
