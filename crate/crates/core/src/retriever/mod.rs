//! Evidence retrieval: direct lookup of known urls, or templated queries
//! against a local tf-idf index over the corpus.

mod index;
mod queries;

use crate::corpus::{Corpus, Document};
use crate::initiator::ExtractionTask;

pub use index::{tokenize, SearchHit, SearchIndex, IndexError};
pub use queries::{generate_queries, QueryError, QueryTemplate, QueryTemplates};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CrawlResult<'a> {
    pub documents: Vec<&'a Document>,
    pub missing: Vec<String>,
}

impl CrawlResult<'_> {
    /// Every url was missing.
    pub fn is_empty_evidence(&self) -> bool {
        self.documents.is_empty()
    }
}

/// Newest revision of each task url; urls absent from the corpus are
/// reported, not fatal.
pub fn retrieve_crawl<'a>(task: &ExtractionTask, corpus: &'a Corpus) -> CrawlResult<'a> {
    let mut out = CrawlResult::default();
    for url in &task.urls {
        match corpus.latest(url) {
            Some(d) => out.documents.push(d),
            None => out.missing.push(url.clone()),
        }
    }
    out
}

/// Runs every generated query and returns the newest revisions of the
/// union of hits, best first, at most `k` documents.
pub fn retrieve_search<'a>(
    task: &ExtractionTask,
    templates: &QueryTemplates,
    languages: &[String],
    index: &SearchIndex,
    corpus: &'a Corpus,
    k: usize,
) -> Result<Vec<&'a Document>, QueryError> {
    let queries = generate_queries(task, templates, languages)?;
    let mut best: std::collections::BTreeMap<String, f64> = Default::default();
    for q in &queries {
        for hit in index.search(q, k) {
            let e = best.entry(hit.url).or_insert(0.0);
            *e = e.max(hit.score);
        }
    }
    let mut ranked: Vec<(String, f64)> = best.into_iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(ranked
        .into_iter()
        .take(k)
        .filter_map(|(url, _)| corpus.latest(&url))
        .collect())
}
