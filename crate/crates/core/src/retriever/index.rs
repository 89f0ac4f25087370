//! Inverted index with length-normalized tf-idf ranking.
//!
//! Tokens are maximal runs of Unicode alphanumeric characters, lowercased.
//! A document is the newest revision of a url; its text is every passage
//! plus every infobox key and value. For a query with distinct terms Q,
//!
//! ```text
//! score(d) = Σ_{t ∈ Q, tf(t,d) > 0} (1 + ln tf(t,d)) · ln(1 + N / df(t)) / sqrt(len(d))
//! ```
//!
//! where N is the number of documents and len(d) the token count. Ties are
//! broken by url. The text artifact starts with a schema header and lists
//! documents, then postings, in sorted order, so equal corpora give
//! byte-identical files.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::schema;

pub const INDEX_SCHEMA: &str = "odke.search_index";

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn document_text(doc: &Document) -> Vec<String> {
    let mut tokens = Vec::new();
    for p in &doc.passages {
        tokens.extend(tokenize(&p.text));
    }
    for row in &doc.infobox {
        tokens.extend(tokenize(&row.key));
        tokens.extend(tokenize(&row.raw_value));
    }
    tokens
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub url: String,
    pub score: f64,
    pub matched_terms: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchIndex {
    /// url → token count
    docs: BTreeMap<String, usize>,
    /// term → url → term frequency
    postings: BTreeMap<String, BTreeMap<String, u32>>,
}

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("index artifact: {0}")]
    Format(String),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
enum Line {
    Doc { url: String, len: usize },
    Term { term: String, postings: BTreeMap<String, u32> },
}

impl SearchIndex {
    pub fn build(corpus: &Corpus) -> Self {
        let mut index = SearchIndex::default();
        for doc in corpus.latest_documents() {
            let tokens = document_text(doc);
            index.docs.insert(doc.url.clone(), tokens.len());
            for t in tokens {
                *index
                    .postings
                    .entry(t)
                    .or_default()
                    .entry(doc.url.clone())
                    .or_insert(0) += 1;
            }
        }
        index
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Number of documents containing `term`.
    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, BTreeMap::len)
    }

    /// Top `k` documents for `query`, highest score first.
    pub fn search(&self, query: &str, k: usize) -> Vec<SearchHit> {
        let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
        let n = self.docs.len() as f64;
        let mut acc: BTreeMap<&str, (f64, Vec<String>)> = BTreeMap::new();
        for term in &terms {
            let Some(posting) = self.postings.get(term) else {
                continue;
            };
            let idf = (1.0 + n / posting.len() as f64).ln();
            for (url, &tf) in posting {
                let e = acc.entry(url.as_str()).or_default();
                e.0 += (1.0 + (tf as f64).ln()) * idf;
                e.1.push(term.clone());
            }
        }
        let mut hits: Vec<SearchHit> = acc
            .into_iter()
            .map(|(url, (raw, matched_terms))| SearchHit {
                url: url.to_string(),
                score: raw / (self.docs[url].max(1) as f64).sqrt(),
                matched_terms,
            })
            .collect();
        hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.url.cmp(&b.url)));
        hits.truncate(k.max(1));
        hits
    }

    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        let mut out = BufWriter::new(std::fs::File::create(path)?);
        schema::write_header(&mut out, INDEX_SCHEMA)?;
        for (url, &len) in &self.docs {
            let line = Line::Doc {
                url: url.clone(),
                len,
            };
            writeln!(out, "{}", serde_json::to_string(&line).expect("serializes"))?;
        }
        for (term, postings) in &self.postings {
            let line = Line::Term {
                term: term.clone(),
                postings: postings.clone(),
            };
            writeln!(out, "{}", serde_json::to_string(&line).expect("serializes"))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IndexError> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| IndexError::Format("empty file".into()))??;
        schema::check_header(&header, INDEX_SCHEMA).map_err(|e| IndexError::Format(e.to_string()))?;
        let mut index = SearchIndex::default();
        for (i, line) in lines.enumerate() {
            let line = line?;
            match serde_json::from_str::<Line>(&line)
                .map_err(|e| IndexError::Format(format!("line {}: {e}", i + 2)))?
            {
                Line::Doc { url, len } => {
                    index.docs.insert(url, len);
                }
                Line::Term { term, postings } => {
                    index.postings.insert(term, postings);
                }
            }
        }
        Ok(index)
    }
}
