//! Unit table with exact conversion factors to the canonical unit of each
//! dimension: `cm` for length, `kg` for mass, `1` for dimensionless counts.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Length,
    Mass,
}

impl std::fmt::Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Dimension::Length => f.write_str("length"),
            Dimension::Mass => f.write_str("mass"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unit {
    pub symbol: &'static str,
    /// `None` for dimensionless counts.
    pub dimension: Option<Dimension>,
    /// Multiply by this to get the canonical unit.
    pub factor: f64,
    pub metric: bool,
}

const UNITS: &[Unit] = &[
    Unit { symbol: "mm", dimension: Some(Dimension::Length), factor: 0.1, metric: true },
    Unit { symbol: "cm", dimension: Some(Dimension::Length), factor: 1.0, metric: true },
    Unit { symbol: "m", dimension: Some(Dimension::Length), factor: 100.0, metric: true },
    Unit { symbol: "km", dimension: Some(Dimension::Length), factor: 100_000.0, metric: true },
    Unit { symbol: "in", dimension: Some(Dimension::Length), factor: 2.54, metric: false },
    Unit { symbol: "ft", dimension: Some(Dimension::Length), factor: 30.48, metric: false },
    Unit { symbol: "g", dimension: Some(Dimension::Mass), factor: 0.001, metric: true },
    Unit { symbol: "kg", dimension: Some(Dimension::Mass), factor: 1.0, metric: true },
    Unit { symbol: "lb", dimension: Some(Dimension::Mass), factor: 0.453_592_37, metric: false },
    Unit { symbol: "st", dimension: Some(Dimension::Mass), factor: 6.350_293_18, metric: false },
    Unit { symbol: "1", dimension: None, factor: 1.0, metric: true },
];

const ALIASES: &[(&str, &str)] = &[
    ("millimetre", "mm"),
    ("millimetres", "mm"),
    ("millimeter", "mm"),
    ("millimeters", "mm"),
    ("milímetros", "mm"),
    ("centimetre", "cm"),
    ("centimetres", "cm"),
    ("centimeter", "cm"),
    ("centimeters", "cm"),
    ("centímetros", "cm"),
    ("centimetros", "cm"),
    ("metre", "m"),
    ("metres", "m"),
    ("meter", "m"),
    ("meters", "m"),
    ("metro", "m"),
    ("metros", "m"),
    ("kilometre", "km"),
    ("kilometres", "km"),
    ("kilómetros", "km"),
    ("inch", "in"),
    ("inches", "in"),
    ("\"", "in"),
    ("″", "in"),
    ("pulgadas", "in"),
    ("foot", "ft"),
    ("feet", "ft"),
    ("'", "ft"),
    ("′", "ft"),
    ("pies", "ft"),
    ("pie", "ft"),
    ("gram", "g"),
    ("grams", "g"),
    ("gramos", "g"),
    ("kilogram", "kg"),
    ("kilograms", "kg"),
    ("kilogramos", "kg"),
    ("kilo", "kg"),
    ("kilos", "kg"),
    ("lbs", "lb"),
    ("pound", "lb"),
    ("pounds", "lb"),
    ("libras", "lb"),
    ("stone", "st"),
];

/// Looks up a unit symbol or one of its spelled-out aliases (case-insensitive).
pub fn lookup(name: &str) -> Option<&'static Unit> {
    let lower = name.trim().to_lowercase();
    let symbol = ALIASES
        .iter()
        .find(|(alias, _)| *alias == lower)
        .map(|(_, s)| *s)
        .unwrap_or(lower.as_str());
    UNITS.iter().find(|u| u.symbol == symbol)
}

pub fn canonical_unit(dimension: Option<Dimension>) -> &'static str {
    match dimension {
        Some(Dimension::Length) => "cm",
        Some(Dimension::Mass) => "kg",
        None => "1",
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum UnitError {
    #[error("unknown unit {0:?}")]
    Unknown(String),
    #[error("unit {unit} is not a {expected:?} unit")]
    WrongDimension {
        unit: String,
        expected: Option<Dimension>,
    },
}

/// Converts `magnitude unit` into the canonical unit of `dimension`.
pub fn to_canonical(
    magnitude: f64,
    unit: &str,
    dimension: Option<Dimension>,
) -> Result<f64, UnitError> {
    let u = lookup(unit).ok_or_else(|| UnitError::Unknown(unit.to_string()))?;
    if u.dimension != dimension {
        return Err(UnitError::WrongDimension {
            unit: unit.to_string(),
            expected: dimension,
        });
    }
    Ok(magnitude * u.factor)
}

/// Rounds to one decimal place. Idempotent on its own output.
pub fn round1(x: f64) -> f64 {
    let r = (x * 10.0).round() / 10.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}
