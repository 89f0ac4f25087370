//! Per-language surface-form tables (month names, number separators, scale
//! and currency words) and the parsers that use them.
//!
//! Tables are data files; `en` and `es` ship embedded and further languages
//! can be loaded from a directory of `<lang>.json` files.

use std::collections::HashMap;
use std::path::Path;
use std::sync::LazyLock;

use chrono::NaiveDate;
use regex::Regex;
use serde::Deserialize;

use crate::kg_store::DatePrecision;
use crate::units::{self, Dimension};

#[derive(Debug, Clone, Deserialize)]
pub struct LocaleTable {
    pub language: String,
    pub decimal_separator: char,
    pub thousands_separator: char,
    pub months: HashMap<String, u32>,
    #[serde(default)]
    pub filler_words: Vec<String>,
    #[serde(default)]
    pub ordinal_suffixes: Vec<String>,
    #[serde(default)]
    pub scale_words: HashMap<String, f64>,
    #[serde(default)]
    pub currency_words: HashMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct LocaleSet {
    tables: HashMap<String, LocaleTable>,
}

#[derive(Debug, thiserror::Error)]
pub enum LocaleError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
}

const EN: &str = include_str!("../data/locales/en.json");
const ES: &str = include_str!("../data/locales/es.json");

impl LocaleSet {
    pub fn builtin() -> Self {
        let mut tables = HashMap::new();
        for src in [EN, ES] {
            let t: LocaleTable = serde_json::from_str(src).expect("embedded locale table parses");
            tables.insert(t.language.clone(), t);
        }
        LocaleSet { tables }
    }

    /// Built-in tables plus every `*.json` table in `dir` (later wins).
    pub fn load_dir(dir: &Path) -> Result<Self, LocaleError> {
        let mut set = Self::builtin();
        let entries = std::fs::read_dir(dir).map_err(|source| LocaleError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let text = std::fs::read_to_string(&path).map_err(|source| LocaleError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let t: LocaleTable =
                serde_json::from_str(&text).map_err(|source| LocaleError::Parse {
                    path: path.display().to_string(),
                    source,
                })?;
            set.tables.insert(t.language.clone(), t);
        }
        Ok(set)
    }

    /// Table for `language`, falling back to English.
    pub fn get(&self, language: &str) -> &LocaleTable {
        self.tables
            .get(language)
            .or_else(|| self.tables.get("en"))
            .expect("english table is always present")
    }
}

impl Default for LocaleSet {
    fn default() -> Self {
        Self::builtin()
    }
}

fn all_digits(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

/// Splits `s` at the single occurrence of `sep` into (integer, fraction).
fn split_decimal(s: &str, sep: char) -> Option<(&str, Option<&str>)> {
    let mut parts = s.splitn(3, sep);
    let int = parts.next()?;
    let frac = parts.next();
    if parts.next().is_some() {
        return None;
    }
    match frac {
        Some(f) if !all_digits(f) => None,
        _ => Some((int, frac)),
    }
}

fn grouped_int(int: &str, sep: char) -> bool {
    let groups: Vec<&str> = int.split(sep).collect();
    groups.len() >= 2
        && (1..=3).contains(&groups[0].len())
        && groups.iter().all(|g| all_digits(g))
        && groups[1..].iter().all(|g| g.len() == 3)
}

/// Parses a decimal number written with the locale's separators. Grouped
/// thousands are only accepted in groups of exactly three digits; a lone
/// separator of the other kind is read as a decimal point ("1.84" in `es`).
pub fn parse_number(raw: &str, locale: &LocaleTable) -> Option<f64> {
    let s: String = raw
        .trim()
        .chars()
        .filter(|c| !matches!(c, ' ' | '\u{a0}' | '\u{202f}'))
        .collect();
    let (t, d) = (locale.thousands_separator, locale.decimal_separator);
    let (int, frac) = match split_decimal(&s, d) {
        Some((int, frac)) if all_digits(int) || grouped_int(int, t) => (int.replace(t, ""), frac),
        _ => {
            // A single foreign separator followed by other than three digits.
            let (int, frac) = split_decimal(&s, t)?;
            match frac {
                Some(f) if all_digits(int) && f.len() != 3 => (int.to_string(), Some(f)),
                _ => return None,
            }
        }
    };
    let normalized = match frac {
        Some(f) => format!("{int}.{f}"),
        None => int,
    };
    let v: f64 = normalized.parse().ok()?;
    v.is_finite().then_some(v)
}

static ISO_DAY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d{4})-(\d{2})-(\d{2})$").unwrap());
static ISO_MONTH: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(\d{4})-(\d{2})$").unwrap());
static ISO_YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(\d{4})$").unwrap());

/// Formats a validated date at `precision`; `None` if the parts are invalid.
pub fn format_date(year: i32, month: u32, day: u32, precision: DatePrecision) -> Option<String> {
    match precision {
        DatePrecision::Day => {
            NaiveDate::from_ymd_opt(year, month, day)?;
            Some(format!("{year:04}-{month:02}-{day:02}"))
        }
        DatePrecision::Month => {
            (1..=12).contains(&month).then(|| format!("{year:04}-{month:02}"))
        }
        DatePrecision::Year => Some(format!("{year:04}")),
    }
}

/// Checks that `date` is lexically valid ISO-8601 at `precision`.
pub fn valid_iso_date(date: &str, precision: DatePrecision) -> bool {
    let re = match precision {
        DatePrecision::Day => &*ISO_DAY,
        DatePrecision::Month => &*ISO_MONTH,
        DatePrecision::Year => &*ISO_YEAR,
    };
    let Some(c) = re.captures(date) else {
        return false;
    };
    let y: i32 = c[1].parse().unwrap();
    let m: u32 = c.get(2).map_or(1, |m| m.as_str().parse().unwrap());
    let d: u32 = c.get(3).map_or(1, |m| m.as_str().parse().unwrap());
    format_date(y, m, d, precision).as_deref() == Some(date)
}

/// Parses a date surface form ("November 20, 1942", "20 de noviembre de 1942",
/// "1942-11-20", "March 2011", "1942") into ISO-8601 with its precision.
pub fn parse_date(raw: &str, locale: &LocaleTable) -> Option<(String, DatePrecision)> {
    let s = raw.trim();
    for (re, precision) in [
        (&*ISO_DAY, DatePrecision::Day),
        (&*ISO_MONTH, DatePrecision::Month),
        (&*ISO_YEAR, DatePrecision::Year),
    ] {
        if re.is_match(s) {
            return valid_iso_date(s, precision).then(|| (s.to_string(), precision));
        }
    }

    let lower = s.to_lowercase();
    let mut year = None;
    let mut month = None;
    let mut day = None;
    for token in lower.split(|c: char| !c.is_alphanumeric() && c != 'º' && c != '°') {
        if token.is_empty() || locale.filler_words.iter().any(|w| w == token) {
            continue;
        }
        if let Some(&m) = locale.months.get(token) {
            if month.replace(m).is_some() {
                return None;
            }
            continue;
        }
        let digits = strip_ordinal(token, locale);
        if digits.chars().all(|c| c.is_ascii_digit()) && !digits.is_empty() {
            match digits.len() {
                4 => {
                    if year.replace(digits.parse::<i32>().ok()?).is_some() {
                        return None;
                    }
                }
                1 | 2 => {
                    if day.replace(digits.parse::<u32>().ok()?).is_some() {
                        return None;
                    }
                }
                _ => return None,
            }
            continue;
        }
        return None;
    }
    let year = year?;
    match (month, day) {
        (Some(m), Some(d)) => {
            format_date(year, m, d, DatePrecision::Day).map(|x| (x, DatePrecision::Day))
        }
        (Some(m), None) => {
            format_date(year, m, 1, DatePrecision::Month).map(|x| (x, DatePrecision::Month))
        }
        (None, None) => Some((format!("{year:04}"), DatePrecision::Year)),
        (None, Some(_)) => None,
    }
}

fn strip_ordinal<'a>(token: &'a str, locale: &LocaleTable) -> &'a str {
    for suffix in &locale.ordinal_suffixes {
        if let Some(rest) = token.strip_suffix(suffix.as_str()) {
            if !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()) {
                return rest;
            }
        }
    }
    token
}

static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d[\d.,\u{a0}]*\d|\d").unwrap());
static ISO_CODE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b(USD|EUR|GBP|JPY|CHF|CAD|AUD|MXN)\b").unwrap());

/// Number of minor units per major unit, as a power of ten.
pub fn minor_digits(currency: &str) -> u32 {
    match currency {
        "JPY" => 0,
        _ => 2,
    }
}

/// Parses "US$ 1.2 billion", "€3,5 millones", "50,000 USD" into
/// (minor units, ISO-4217 code).
pub fn parse_money(raw: &str, locale: &LocaleTable) -> Option<(i64, String)> {
    let s = raw.trim();
    let lower = s.to_lowercase();
    let currency = if let Some(c) = ISO_CODE.captures(s) {
        c[1].to_string()
    } else if s.contains("US$") || s.contains('$') {
        "USD".to_string()
    } else if s.contains('€') {
        "EUR".to_string()
    } else if s.contains('£') {
        "GBP".to_string()
    } else if s.contains('¥') {
        "JPY".to_string()
    } else {
        let mut words: Vec<_> = locale.currency_words.iter().collect();
        words.sort_by_key(|(w, _)| std::cmp::Reverse(w.len()));
        words
            .into_iter()
            .find(|(w, _)| lower.contains(w.as_str()))
            .map(|(_, c)| c.clone())?
    };
    let m = NUMBER.find(s)?;
    let amount = parse_number(m.as_str(), locale)?;
    let rest = lower[m.end()..].trim_start();
    let mut scales: Vec<_> = locale.scale_words.iter().collect();
    scales.sort_by_key(|(w, _)| std::cmp::Reverse(w.len()));
    let scale = scales
        .into_iter()
        .find(|(w, _)| {
            rest.strip_prefix(w.as_str())
                .is_some_and(|after| after.chars().next().is_none_or(|c| !c.is_alphanumeric()))
        })
        .map_or(1.0, |(_, f)| *f);
    let minor = amount * scale * 10f64.powi(minor_digits(&currency) as i32);
    if !minor.is_finite() || minor.abs() > i64::MAX as f64 {
        return None;
    }
    Some((minor.round() as i64, currency))
}

static QTY: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"(?P<num>\d(?:[\d.,]*\d)?)\s*(?P<unit>[A-Za-zÀ-ÿ]+|["'″′])?"#).unwrap()
});

/// Parses a quantity surface form ("2.13 m", "211 cm", "6 ft 11 in",
/// "2,736,074") into the canonical unit of `dimension`. Adjacent
/// number-unit pairs separated only by whitespace are summed.
pub fn parse_quantity(
    raw: &str,
    locale: &LocaleTable,
    dimension: Option<Dimension>,
) -> Option<f64> {
    let mut total: Option<f64> = None;
    let mut last_end: Option<usize> = None;
    for caps in QTY.captures_iter(raw) {
        let whole = caps.get(0).unwrap();
        if let Some(end) = last_end {
            if !raw[end..whole.start()].trim().is_empty() {
                break;
            }
        }
        let n = parse_number(&caps["num"], locale)?;
        let value = match (dimension, caps.name("unit")) {
            (None, None) => n,
            (None, Some(u)) => match units::lookup(u.as_str()) {
                Some(unit) if unit.dimension.is_none() => n,
                _ => break,
            },
            (Some(_), None) => break,
            (Some(d), Some(u)) => match units::to_canonical(n, u.as_str(), Some(d)) {
                Ok(v) => v,
                Err(_) => break,
            },
        };
        total = Some(total.unwrap_or(0.0) + value);
        last_end = Some(whole.end());
        if dimension.is_none() {
            break;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn en() -> LocaleTable {
        LocaleSet::builtin().get("en").clone()
    }
    fn es() -> LocaleTable {
        LocaleSet::builtin().get("es").clone()
    }

    #[test]
    fn numbers_per_locale() {
        assert_eq!(parse_number("1.84", &en()), Some(1.84));
        assert_eq!(parse_number("1,84", &es()), Some(1.84));
        assert_eq!(parse_number("2,736,074", &en()), Some(2_736_074.0));
        assert_eq!(parse_number("2.736.074", &es()), Some(2_736_074.0));
        assert_eq!(parse_number("1.84", &es()), Some(1.84));
        assert_eq!(parse_number("abc", &en()), None);
    }

    #[test]
    fn dates_in_both_languages() {
        let day = |s: &str| (s.to_string(), DatePrecision::Day);
        assert_eq!(parse_date("November 20, 1942", &en()), Some(day("1942-11-20")));
        assert_eq!(parse_date("20 November 1942", &en()), Some(day("1942-11-20")));
        assert_eq!(parse_date("20 de noviembre de 1942", &es()), Some(day("1942-11-20")));
        assert_eq!(parse_date("1942-11-20", &es()), Some(day("1942-11-20")));
        assert_eq!(
            parse_date("March 2011", &en()),
            Some(("2011-03".to_string(), DatePrecision::Month))
        );
        assert_eq!(parse_date("1961", &en()), Some(("1961".into(), DatePrecision::Year)));
        assert_eq!(parse_date("August 4th, 1961", &en()), Some(day("1961-08-04")));
        assert_eq!(parse_date("February 30, 1942", &en()), None);
        assert_eq!(parse_date("tall and friendly", &en()), None);
    }

    #[test]
    fn money_surface_forms() {
        assert_eq!(
            parse_money("US$ 1.2 billion", &en()),
            Some((120_000_000_000, "USD".into()))
        );
        assert_eq!(
            parse_money("3,5 millones de euros", &es()),
            Some((350_000_000, "EUR".into()))
        );
        assert_eq!(parse_money("¥500", &en()), Some((500, "JPY".into())));
        assert_eq!(parse_money("lots", &en()), None);
    }

    #[test]
    fn quantities() {
        let len = Some(Dimension::Length);
        assert_eq!(parse_quantity("2.13 m", &en(), len), Some(213.0));
        assert_eq!(parse_quantity("211 cm", &en(), len), Some(211.0));
        let imperial = parse_quantity("6 ft 0 in", &en(), len).unwrap();
        assert!((imperial - 182.88).abs() < 1e-9);
        let first_only = parse_quantity("7 ft 0 in (2.13 m)", &en(), len).unwrap();
        assert!((first_only - 213.36).abs() < 1e-9);
        assert_eq!(parse_quantity("2,736,074", &en(), None), Some(2_736_074.0));
        assert_eq!(parse_quantity("tall", &en(), len), None);
    }

    #[test]
    fn iso_validation() {
        assert!(valid_iso_date("1942-11-20", DatePrecision::Day));
        assert!(!valid_iso_date("1942-13-01", DatePrecision::Day));
        assert!(valid_iso_date("1942-11", DatePrecision::Month));
        assert!(!valid_iso_date("1942-11", DatePrecision::Day));
    }
}
