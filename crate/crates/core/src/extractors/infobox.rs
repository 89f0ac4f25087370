//! Infobox rows → candidate facts via compiled value rules.

use regex::Captures;

use crate::corpus::{char_offset, Document, InfoboxRow};
use crate::kg_store::{EntityId, Predicate, Span, Value};
use crate::locale::{self, LocaleTable};
use crate::units;

use super::rules::{AggregatorPolicy, BuildSpec, CompiledExtractor, CompiledRule, RuleSet};
use super::{CandidateFact, ExtractContext, ExtractError, ExtractorKind};

/// Agreement tolerance under which metric and imperial readings of one row
/// are considered the same value.
const METRIC_AGREEMENT: f64 = 0.02;

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// First unit word written in `raw`, as its table symbol.
fn first_unit(raw: &str) -> Option<&'static str> {
    raw.split(|c: char| !c.is_alphabetic())
        .filter(|t| !t.is_empty())
        .find_map(units::lookup)
        .map(|u| u.symbol)
}

fn build_value(
    build: &BuildSpec,
    caps: &Captures<'_>,
    raw: &str,
    predicate: &Predicate,
    table: &LocaleTable,
    language: &str,
) -> Option<(Value, Option<String>)> {
    let canonical = units::canonical_unit(predicate.unit_dimension);
    match build {
        BuildSpec::Quantity { unit, components } if !components.is_empty() => {
            let mut total = 0.0;
            let mut any = false;
            for c in components {
                if let Some(m) = caps.name(&c.group) {
                    let n = locale::parse_number(m.as_str(), table)?;
                    total += units::to_canonical(n, &c.unit, predicate.unit_dimension).ok()?;
                    any = true;
                }
            }
            let source = unit.clone().or_else(|| components.first().map(|c| c.unit.clone()));
            any.then(|| (Value::quantity(total, canonical), source))
        }
        BuildSpec::Quantity { unit: Some(u), .. } => {
            let n = locale::parse_number(raw, table)?;
            let v = units::to_canonical(n, u, predicate.unit_dimension).ok()?;
            Some((Value::quantity(v, canonical), Some(u.clone())))
        }
        BuildSpec::Quantity { unit: None, .. } => {
            let v = locale::parse_quantity(raw, table, predicate.unit_dimension)?;
            let source = match predicate.unit_dimension {
                Some(_) => first_unit(raw).map(str::to_string),
                None => Some("1".to_string()),
            };
            Some((Value::quantity(v, canonical), source))
        }
        BuildSpec::Date => {
            let (date, precision) = locale::parse_date(raw, table)?;
            Some((Value::Date { date, precision }, None))
        }
        BuildSpec::Money => {
            let (minor_units, currency) = locale::parse_money(raw, table)?;
            Some((
                Value::Money {
                    minor_units,
                    currency,
                },
                None,
            ))
        }
        BuildSpec::Text => {
            let text = collapse_whitespace(raw);
            (!text.is_empty()).then(|| (Value::text(&text, language), None))
        }
        BuildSpec::ExternalId { scheme } => {
            let id = raw.trim();
            (!id.is_empty()).then(|| {
                (
                    Value::ExternalId {
                        id: id.to_string(),
                        scheme: scheme.clone(),
                    },
                    None,
                )
            })
        }
    }
}

fn run_extractor(
    doc: &Document,
    row: &InfoboxRow,
    rule: &CompiledRule,
    extractor: &CompiledExtractor,
    subject: &EntityId,
    ctx: &ExtractContext<'_>,
    out: &mut Vec<CandidateFact>,
) {
    let Some(predicate) = ctx.ontology.get(&rule.predicate) else {
        return;
    };
    let table = ctx.locales.get(&doc.language);
    for caps in extractor.regex.captures_iter(&row.raw_value) {
        let m = caps.name("value").unwrap_or_else(|| caps.get(0).unwrap());
        if m.as_str().trim().is_empty() {
            continue;
        }
        let raw = m.as_str();
        let Some((value, source_unit)) =
            build_value(&extractor.build, &caps, raw, predicate, table, &doc.language)
        else {
            tracing::debug!(rule = %rule.rule_id, extractor = %extractor.id, raw, "unparseable match");
            continue;
        };
        let start = char_offset(&row.raw_value, m.start());
        let end = start + raw.chars().count();
        let extractor_id = format!("{}/{}", rule.rule_id, extractor.id);
        out.push(CandidateFact {
            subject: subject.clone(),
            predicate: rule.predicate.clone(),
            raw_span: ctx.provenance(
                doc,
                Span::Infobox {
                    key: row.key.clone(),
                    start,
                    end,
                },
                &extractor_id,
            ),
            raw_text: raw.to_string(),
            value,
            extractor_id,
            extractor_kind: ExtractorKind::Pattern,
            extractor_score: rule.extractor_score,
            language: doc.language.clone(),
            source_unit,
            unresolved_url: None,
        });
    }
}

/// Applies every matching value rule to every infobox row. Rows matching no
/// rule and matches that do not parse are skipped.
pub fn extract_infobox(
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
        for rule in rules.rules_for(&doc.language, &row.key) {
            let mut row_candidates = Vec::new();
            for extractor in &rule.extractors {
                run_extractor(doc, row, rule, extractor, subject, ctx, &mut row_candidates);
            }
            out.extend(aggregate_row(row_candidates, rule.aggregator));
        }
    }
    Ok(out)
}

fn relative_diff(a: f64, b: f64) -> f64 {
    let smaller = a.abs().min(b.abs());
    if a == b {
        0.0
    } else if smaller == 0.0 {
        f64::INFINITY
    } else {
        (a - b).abs() / smaller
    }
}

/// Summarizes the candidates one rule produced from one row.
///
/// `metric_preference` keeps only the first metric-sourced candidate when
/// every pair of readings agrees within 2% (relative to the smaller one);
/// otherwise, or when no reading is metric, everything passes through.
pub fn aggregate_row(candidates: Vec<CandidateFact>, policy: AggregatorPolicy) -> Vec<CandidateFact> {
    if candidates.len() <= 1 {
        return candidates;
    }
    match policy {
        AggregatorPolicy::AllValues => candidates,
        AggregatorPolicy::Single => {
            let mut best = 0;
            for (i, c) in candidates.iter().enumerate() {
                if c.extractor_score > candidates[best].extractor_score {
                    best = i;
                }
            }
            vec![candidates.into_iter().nth(best).unwrap()]
        }
        AggregatorPolicy::MetricPreference => {
            let mags: Option<Vec<f64>> = candidates.iter().map(|c| c.value.magnitude()).collect();
            let Some(mags) = mags else {
                return candidates;
            };
            let agree = mags.iter().enumerate().all(|(i, &a)| {
                mags[i + 1..]
                    .iter()
                    .all(|&b| relative_diff(a, b) <= METRIC_AGREEMENT)
            });
            match candidates.iter().position(CandidateFact::is_metric) {
                Some(i) if agree => vec![candidates.into_iter().nth(i).unwrap()],
                _ => candidates,
            }
        }
    }
}
