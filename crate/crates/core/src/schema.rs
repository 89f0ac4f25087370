//! Versioned schema header shared by every newline-delimited file format.
//!
//! The first line of each file is a JSON object
//! `{"schema":"<name>","version":<n>}`; records follow, one per line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub schema: String,
    pub version: u32,
}

pub const CORPUS: &str = "odke.corpus";
pub const FEED: &str = "odke.feed";
pub const FACT_LOG: &str = "odke.fact_log";
pub const ONTOLOGY: &str = "odke.ontology";
pub const KG: &str = "odke.kg";
pub const TASKS: &str = "odke.tasks";
pub const RULES: &str = "odke.rules";
pub const LINK_RULES: &str = "odke.link_rules";
pub const TEMPLATES: &str = "odke.query_templates";
pub const QUESTIONS: &str = "odke.question_templates";
pub const CURATION_TASKS: &str = "odke.curation_tasks";
pub const DECISIONS: &str = "odke.decisions";
pub const DELIVERIES: &str = "odke.deliveries";
pub const VIEW: &str = "odke.latest_view";
pub const GOLDEN: &str = "odke.golden";
pub const FACTS: &str = "odke.facts";

pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum HeaderError {
    #[error("missing schema header line")]
    Missing,
    #[error("malformed schema header: {0}")]
    Malformed(String),
    #[error("expected schema {expected} v{version}, found {found} v{found_version}")]
    Mismatch {
        expected: String,
        version: u32,
        found: String,
        found_version: u32,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn header_line(schema: &str) -> String {
    serde_json::to_string(&Header {
        schema: schema.to_string(),
        version: VERSION,
    })
    .expect("header serializes")
}

pub fn write_header<W: Write>(out: &mut W, schema: &str) -> std::io::Result<()> {
    writeln!(out, "{}", header_line(schema))
}

pub fn check_header(line: &str, schema: &str) -> Result<(), HeaderError> {
    let header: Header =
        serde_json::from_str(line.trim()).map_err(|e| HeaderError::Malformed(e.to_string()))?;
    if header.schema != schema || header.version != VERSION {
        return Err(HeaderError::Mismatch {
            expected: schema.to_string(),
            version: VERSION,
            found: header.schema,
            found_version: header.version,
        });
    }
    Ok(())
}

/// Reads the header from `reader` and returns the remaining lines with their
/// 1-based line numbers. Blank lines are skipped.
pub fn read_records<R: BufRead>(
    reader: R,
    schema: &str,
) -> Result<Vec<(usize, String)>, HeaderError> {
    let mut lines = reader.lines();
    let first = lines.next().ok_or(HeaderError::Missing)??;
    check_header(&first, schema)?;
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push((i + 2, line));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_round_trip() {
        let line = header_line(CORPUS);
        check_header(&line, CORPUS).unwrap();
        assert!(matches!(
            check_header(&line, FEED),
            Err(HeaderError::Mismatch { .. })
        ));
    }

    #[test]
    fn records_carry_line_numbers() {
        let text = format!("{}\n{{}}\n\n{{}}\n", header_line(FEED));
        let recs = read_records(text.as_bytes(), FEED).unwrap();
        assert_eq!(recs.iter().map(|r| r.0).collect::<Vec<_>>(), vec![2, 4]);
    }
}
