//! Hyperlink facts. Targets are entity ids, so output does not depend on
//! the document's language.

use crate::corpus::{char_slice, Document, LinkTarget};
use crate::kg_store::{EntityId, Span, Value};

use super::rules::RuleSet;
use super::{CandidateFact, ExtractContext, ExtractError, ExtractorKind};

/// One candidate per hyperlink in each row matched by a link rule. Links to
/// pages with no known entity carry the anchor text and `unresolved_url`.
pub fn extract_links(
    doc: &Document,
    rules: &RuleSet,
    subject: &EntityId,
    ctx: &ExtractContext<'_>,
) -> Result<Vec<CandidateFact>, ExtractError> {
    doc.validate().map_err(|reason| ExtractError {
        url: doc.url.clone(),
        revision: doc.revision_id.clone(),
        reason,
    })?;
    let mut out = Vec::new();
    for row in &doc.infobox {
        if row.hyperlinks.is_empty() {
            continue;
        }
        for rule in rules.link_rules_for(&doc.language, &row.key) {
            for link in &row.hyperlinks {
                let raw_text = char_slice(&row.raw_value, link.start, link.end)
                    .expect("validated hyperlink span")
                    .to_string();
                let (value, unresolved_url) = match &link.target {
                    LinkTarget::Entity(id) => (Value::entity(id.clone()), None),
                    LinkTarget::Url(url) => {
                        (Value::text(raw_text.trim(), &doc.language), Some(url.clone()))
                    }
                };
                out.push(CandidateFact {
                    subject: subject.clone(),
                    predicate: rule.predicate.clone(),
                    raw_span: ctx.provenance(
                        doc,
                        Span::Infobox {
                            key: row.key.clone(),
                            start: link.start,
                            end: link.end,
                        },
                        &rule.rule_id,
                    ),
                    raw_text,
                    value,
                    extractor_id: rule.rule_id.clone(),
                    extractor_kind: ExtractorKind::Link,
                    extractor_score: rule.extractor_score,
                    language: doc.language.clone(),
                    source_unit: None,
                    unresolved_url,
                });
            }
        }
    }
    Ok(out)
}
