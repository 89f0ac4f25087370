//! Local stand-in for the web crawl: document snapshots with revisions, and
//! the change feed that drives streaming extraction.
//!
//! Corpus file (`odke.corpus` v1): one [`Document`] per line. Feed file
//! (`odke.feed` v1): one [`ChangeEvent`] per line, non-decreasing in time.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::BufReader;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::kg_store::EntityId;
use crate::schema;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkTarget {
    Entity(EntityId),
    Url(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyperlink {
    /// Char offsets into the row's `raw_value`, end-exclusive.
    pub start: usize,
    pub end: usize,
    pub target: LinkTarget,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfoboxRow {
    pub key: String,
    pub raw_value: String,
    #[serde(default)]
    pub hyperlinks: Vec<Hyperlink>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub url: String,
    pub language: String,
    pub revision_id: String,
    pub revision_time: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_hint: Option<EntityId>,
    #[serde(default)]
    pub infobox: Vec<InfoboxRow>,
    #[serde(default)]
    pub passages: Vec<Passage>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tables: Vec<Vec<Vec<String>>>,
}

/// Substring of `text` by char offsets, `None` when out of bounds.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = text.char_indices().map(|(i, _)| i).chain(std::iter::once(text.len()));
    let b_start = indices.nth(start)?;
    let b_end = if end == start {
        b_start
    } else {
        indices.nth(end - start - 1)?
    };
    Some(&text[b_start..b_end])
}

/// Converts a byte offset to a char offset.
pub fn char_offset(text: &str, byte: usize) -> usize {
    text[..byte].chars().count()
}

impl Document {
    /// Checks row hyperlink spans and passage id uniqueness.
    pub fn validate(&self) -> Result<(), String> {
        for row in &self.infobox {
            let len = row.raw_value.chars().count();
            for link in &row.hyperlinks {
                if link.start >= link.end || link.end > len {
                    return Err(format!(
                        "hyperlink {}..{} outside row {:?} (len {len})",
                        link.start, link.end, row.key
                    ));
                }
            }
        }
        let mut seen = HashSet::new();
        for p in &self.passages {
            if !seen.insert(p.id.as_str()) {
                return Err(format!("duplicate passage id {:?}", p.id));
            }
        }
        Ok(())
    }

    pub fn passage(&self, id: &str) -> Option<&Passage> {
        self.passages.iter().find(|p| p.id == id)
    }

    pub fn row(&self, key: &str) -> Option<&InfoboxRow> {
        self.infobox.iter().find(|r| r.key == key)
    }

    /// Text behind a provenance span, if it resolves against this revision.
    pub fn resolve_span(&self, span: &crate::Span) -> Option<&str> {
        match span {
            crate::Span::Passage {
                passage_id,
                start,
                end,
            } => char_slice(&self.passage(passage_id)?.text, *start, *end),
            crate::Span::Infobox { key, start, end } => {
                char_slice(&self.row(key)?.raw_value, *start, *end)
            }
            crate::Span::Derived { .. } => None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
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
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
}

/// Loaded, read-only corpus indexed by url and (url, revision).
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    docs: Vec<Document>,
    by_url: HashMap<String, Vec<usize>>,
    by_revision: HashMap<(String, String), usize>,
}

impl Corpus {
    pub fn from_documents(docs: Vec<Document>) -> Result<Self, CorpusError> {
        let mut corpus = Corpus::default();
        for (i, doc) in docs.into_iter().enumerate() {
            corpus
                .push(doc)
                .map_err(|message| CorpusError::Record { line: i + 1, message })?;
        }
        Ok(corpus)
    }

    fn push(&mut self, doc: Document) -> Result<(), String> {
        doc.validate()?;
        let key = (doc.url.clone(), doc.revision_id.clone());
        if self.by_revision.contains_key(&key) {
            return Err(format!(
                "duplicate revision {} of {}",
                doc.revision_id, doc.url
            ));
        }
        let idx = self.docs.len();
        self.by_revision.insert(key, idx);
        self.by_url.entry(doc.url.clone()).or_default().push(idx);
        self.docs.push(doc);
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let records = schema::read_records(BufReader::new(file), schema::CORPUS).map_err(
            |source| CorpusError::Header {
                path: path.display().to_string(),
                source,
            },
        )?;
        let mut corpus = Corpus::default();
        for (line, text) in records {
            let doc: Document = serde_json::from_str(&text).map_err(|e| CorpusError::Record {
                line,
                message: e.to_string(),
            })?;
            corpus
                .push(doc)
                .map_err(|message| CorpusError::Record { line, message })?;
        }
        Ok(corpus)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    pub fn revision(&self, url: &str, revision_id: &str) -> Option<&Document> {
        self.by_revision
            .get(&(url.to_string(), revision_id.to_string()))
            .map(|&i| &self.docs[i])
    }

    /// Newest revision of `url` by revision time; ties go to the larger
    /// revision id.
    pub fn latest(&self, url: &str) -> Option<&Document> {
        self.by_url
            .get(url)?
            .iter()
            .map(|&i| &self.docs[i])
            .max_by(|a, b| {
                a.revision_time
                    .cmp(&b.revision_time)
                    .then_with(|| a.revision_id.cmp(&b.revision_id))
            })
    }

    /// Urls in sorted order.
    pub fn urls(&self) -> Vec<&str> {
        let set: BTreeSet<&str> = self.by_url.keys().map(String::as_str).collect();
        set.into_iter().collect()
    }

    /// Newest revision of every url, in url order.
    pub fn latest_documents(&self) -> Vec<&Document> {
        self.urls()
            .into_iter()
            .filter_map(|u| self.latest(u))
            .collect()
    }

    /// Subject of a url: the hint on its newest revision that carries one.
    pub fn subject_of(&self, url: &str) -> Option<&EntityId> {
        let mut revs: Vec<&Document> = self.by_url.get(url)?.iter().map(|&i| &self.docs[i]).collect();
        revs.sort_by(|a, b| b.revision_time.cmp(&a.revision_time));
        revs.into_iter().find_map(|d| d.subject_hint.as_ref())
    }

    /// Latest revisions (one per url) about `subject`.
    pub fn latest_for_subject(&self, subject: &EntityId) -> Vec<&Document> {
        self.latest_documents()
            .into_iter()
            .filter(|d| d.subject_hint.as_ref() == Some(subject))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditorFlag {
    Anonymous,
    Reverted,
    Bot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeEvent {
    pub url: String,
    pub revision_id: String,
    pub event_time: DateTime<Utc>,
    #[serde(default)]
    pub editor_flags: BTreeSet<EditorFlag>,
}

/// A loaded change feed; events are in non-decreasing time order.
#[derive(Debug, Clone, Default)]
pub struct ChangeFeed {
    events: Vec<ChangeEvent>,
}

impl ChangeFeed {
    pub fn new(events: Vec<ChangeEvent>) -> Result<Self, CorpusError> {
        for (i, w) in events.windows(2).enumerate() {
            if w[1].event_time < w[0].event_time {
                return Err(CorpusError::Record {
                    line: i + 2,
                    message: "event_time decreases".into(),
                });
            }
        }
        Ok(ChangeFeed { events })
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let records = schema::read_records(BufReader::new(file), schema::FEED).map_err(
            |source| CorpusError::Header {
                path: path.display().to_string(),
                source,
            },
        )?;
        let mut events: Vec<ChangeEvent> = Vec::with_capacity(records.len());
        for (line, text) in records {
            let ev: ChangeEvent = serde_json::from_str(&text).map_err(|e| CorpusError::Record {
                line,
                message: e.to_string(),
            })?;
            if events.last().is_some_and(|prev| ev.event_time < prev.event_time) {
                return Err(CorpusError::Record {
                    line,
                    message: "event_time decreases".into(),
                });
            }
            events.push(ev);
        }
        Ok(ChangeFeed { events })
    }

    pub fn events(&self) -> &[ChangeEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Events strictly after `since`, in feed order.
pub fn poll_feed(feed: &ChangeFeed, since: Option<DateTime<Utc>>) -> Vec<ChangeEvent> {
    poll_window(feed, since, None)
}

/// Events in `(since, until]`, in feed order.
pub fn poll_window(
    feed: &ChangeFeed,
    since: Option<DateTime<Utc>>,
    until: Option<DateTime<Utc>>,
) -> Vec<ChangeEvent> {
    let start = match since {
        Some(t) => feed.events.partition_point(|e| e.event_time <= t),
        None => 0,
    };
    feed.events[start..]
        .iter()
        .take_while(|e| until.is_none_or(|u| e.event_time <= u))
        .cloned()
        .collect()
}

/// Pluggable vandalism heuristic over one poll batch.
pub trait VandalismFilter: Send + Sync {
    fn filter(&self, events: &[ChangeEvent]) -> Vec<ChangeEvent>;
}

/// Drops reverted edits, and anonymous edits superseded by a later
/// non-reverted edit of the same url within the batch.
#[derive(Debug, Default, Clone, Copy)]
pub struct DefaultVandalismFilter;

impl VandalismFilter for DefaultVandalismFilter {
    fn filter(&self, events: &[ChangeEvent]) -> Vec<ChangeEvent> {
        // Index of the last non-reverted event per url.
        let mut last_clean: HashMap<&str, usize> = HashMap::new();
        for (i, e) in events.iter().enumerate() {
            if !e.editor_flags.contains(&EditorFlag::Reverted) {
                last_clean.insert(e.url.as_str(), i);
            }
        }
        events
            .iter()
            .enumerate()
            .filter(|(i, e)| {
                if e.editor_flags.contains(&EditorFlag::Reverted) {
                    return false;
                }
                if e.editor_flags.contains(&EditorFlag::Anonymous) {
                    return last_clean.get(e.url.as_str()).is_none_or(|last| last <= i);
                }
                true
            })
            .map(|(_, e)| e.clone())
            .collect()
    }
}

pub fn filter_vandalism(events: &[ChangeEvent]) -> Vec<ChangeEvent> {
    DefaultVandalismFilter.filter(events)
}
