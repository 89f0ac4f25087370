use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufWriter, Write};
use std::path::Path;

use super::log::{FactLog, LogError};
use super::types::{EntityId, Fact, FactKey, FactStatus, VersionedFactRow};
use crate::schema;

/// Materialized "latest" facts: for every key, the maximum version whose
/// status is not `curated_rejected`; a key whose selected version is a
/// `retracted` tombstone is absent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LatestView {
    // Includes retracted tombstones so out-of-order application stays correct.
    entries: BTreeMap<FactKey, VersionedFactRow>,
    rejected: HashMap<FactKey, BTreeSet<String>>,
    live: usize,
}

fn visible(row: &VersionedFactRow) -> bool {
    row.fact.status != FactStatus::Retracted
}

impl LatestView {
    pub fn from_rows<'a>(rows: impl IntoIterator<Item = &'a VersionedFactRow>) -> Self {
        let mut view = LatestView::default();
        for row in rows {
            view.apply(row);
        }
        view
    }

    pub fn apply(&mut self, row: &VersionedFactRow) {
        if row.fact.status == FactStatus::CuratedRejected {
            self.rejected
                .entry(row.key.clone())
                .or_default()
                .insert(row.fact.object.canonical_key());
            return;
        }
        match self.entries.get(&row.key) {
            Some(cur) if cur.version >= row.version => {}
            cur => {
                let was_live = cur.is_some_and(visible);
                match (was_live, visible(row)) {
                    (false, true) => self.live += 1,
                    (true, false) => self.live -= 1,
                    _ => {}
                }
                self.entries.insert(row.key.clone(), row.clone());
            }
        }
    }

    pub fn get(&self, key: &FactKey) -> Option<&VersionedFactRow> {
        self.entries.get(key).filter(|r| visible(r))
    }

    pub fn fact(&self, key: &FactKey) -> Option<&Fact> {
        self.get(key).map(|r| &r.fact)
    }

    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FactKey, &VersionedFactRow)> {
        self.entries.iter().filter(|(_, r)| visible(r))
    }

    pub fn rows(&self) -> impl Iterator<Item = &VersionedFactRow> {
        self.iter().map(|(_, r)| r)
    }

    pub fn by_subject<'a>(
        &'a self,
        subject: &'a EntityId,
    ) -> impl Iterator<Item = &'a VersionedFactRow> + 'a {
        let start = FactKey::new(subject.clone(), "", None);
        self.entries
            .range(start..)
            .take_while(move |(k, _)| &k.subject == subject)
            .map(|(_, r)| r)
            .filter(|r| visible(r))
    }

    pub fn by_subject_predicate<'a>(
        &'a self,
        subject: &'a EntityId,
        predicate: &'a str,
    ) -> impl Iterator<Item = &'a VersionedFactRow> + 'a {
        let start = FactKey::new(subject.clone(), predicate, None);
        self.entries
            .range(start..)
            .take_while(move |(k, _)| &k.subject == subject && k.predicate == predicate)
            .map(|(_, r)| r)
            .filter(|r| visible(r))
    }

    pub fn by_predicate<'a>(
        &'a self,
        predicate: &'a str,
    ) -> impl Iterator<Item = &'a VersionedFactRow> + 'a {
        self.rows().filter(move |r| r.key.predicate == predicate)
    }

    /// Whether a curator rejected `value_key` for `key` at some point.
    pub fn is_rejected_value(&self, key: &FactKey, value_key: &str) -> bool {
        self.rejected
            .get(key)
            .is_some_and(|values| values.contains(value_key))
    }

    /// Writes the view as a deterministic newline-delimited artifact.
    pub fn write_artifact(&self, path: &Path) -> std::io::Result<()> {
        let mut out = BufWriter::new(std::fs::File::create(path)?);
        schema::write_header(&mut out, schema::VIEW)?;
        for row in self.rows() {
            writeln!(out, "{}", serde_json::to_string(row).expect("row serializes"))?;
        }
        out.flush()
    }
}

/// Rebuilds the latest view by scanning the whole committed log.
pub fn materialize_latest(log: &FactLog) -> Result<LatestView, LogError> {
    let mut view = LatestView::default();
    log.for_each_row(|row| view.apply(&row))?;
    Ok(view)
}
