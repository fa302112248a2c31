//! Unit algebra and the parameter model.
//!
//! Every input to the valuation kernels is a [`Quantity`]: a finite magnitude
//! paired with a [`UnitDim`], a vector of small signed exponents over nine
//! base dimensions plus a positive decimal scale factor. Quantities normalize
//! to scale 1 on construction, so `1.82 billion RMB/year` and
//! `1.82e9 RMB/year` compare by magnitude alone.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of base dimensions tracked by [`UnitDim`].
pub const BASE_DIM_COUNT: usize = 9;

/// Base dimensions of the unit system.
///
/// The canonical base unit of each dimension: RMB, m3, t, ha, mm, kJ,
/// person, year, dB.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaseDim {
    Currency,
    Volume,
    Mass,
    Area,
    Length,
    Energy,
    Count,
    Time,
    Sound,
}

impl BaseDim {
    const ALL: [BaseDim; BASE_DIM_COUNT] = [
        BaseDim::Currency,
        BaseDim::Volume,
        BaseDim::Mass,
        BaseDim::Area,
        BaseDim::Length,
        BaseDim::Energy,
        BaseDim::Count,
        BaseDim::Time,
        BaseDim::Sound,
    ];

    /// Canonical base-unit token used by [`UnitDim::format_unit`].
    fn canonical_token(self) -> &'static str {
        match self {
            BaseDim::Currency => "RMB",
            BaseDim::Volume => "m3",
            BaseDim::Mass => "t",
            BaseDim::Area => "ha",
            BaseDim::Length => "mm",
            BaseDim::Energy => "kJ",
            BaseDim::Count => "person",
            BaseDim::Time => "year",
            BaseDim::Sound => "dB",
        }
    }
}

/// A unit dimension: exponent vector over the base dimensions plus a
/// positive scale factor relative to the canonical base units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitDim {
    exps: [i8; BASE_DIM_COUNT],
    scale: f64,
}

/// Errors from unit parsing and quantity arithmetic.
#[derive(Debug, Error, PartialEq)]
pub enum UnitError {
    #[error("unknown unit token `{token}` at byte offset {offset}")]
    UnknownToken { token: String, offset: usize },
    #[error("malformed unit expression: {reason} at byte offset {offset}")]
    Malformed { reason: String, offset: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },
    #[error("division by zero quantity")]
    DivisionByZero,
    #[error("non-finite magnitude")]
    NonFinite,
}

impl UnitDim {
    /// The dimensionless unit, scale 1.
    pub fn dimensionless() -> UnitDim {
        UnitDim {
            exps: [0; BASE_DIM_COUNT],
            scale: 1.0,
        }
    }

    /// A single base dimension with exponent 1, scale 1.
    pub fn base(dim: BaseDim) -> UnitDim {
        let mut exps = [0i8; BASE_DIM_COUNT];
        exps[dim as usize] = 1;
        UnitDim { exps, scale: 1.0 }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn exponent(&self, dim: BaseDim) -> i8 {
        self.exps[dim as usize]
    }

    pub fn is_dimensionless(&self) -> bool {
        self.exps.iter().all(|&e| e == 0)
    }

    /// Compatibility ignores scale: two dims are compatible iff all
    /// exponents are equal.
    pub fn compatible(&self, other: &UnitDim) -> bool {
        self.exps == other.exps
    }

    pub fn mul(&self, other: &UnitDim) -> UnitDim {
        let mut exps = [0i8; BASE_DIM_COUNT];
        for i in 0..BASE_DIM_COUNT {
            exps[i] = self.exps[i] + other.exps[i];
        }
        UnitDim {
            exps,
            scale: self.scale * other.scale,
        }
    }

    pub fn div(&self, other: &UnitDim) -> UnitDim {
        let mut exps = [0i8; BASE_DIM_COUNT];
        for i in 0..BASE_DIM_COUNT {
            exps[i] = self.exps[i] - other.exps[i];
        }
        UnitDim {
            exps,
            scale: self.scale / other.scale,
        }
    }

    fn pow(&self, n: i8) -> UnitDim {
        let mut exps = [0i8; BASE_DIM_COUNT];
        for i in 0..BASE_DIM_COUNT {
            exps[i] = self.exps[i] * n;
        }
        UnitDim {
            exps,
            scale: self.scale.powi(n as i32),
        }
    }

    fn with_scale_one(&self) -> UnitDim {
        UnitDim {
            exps: self.exps,
            scale: 1.0,
        }
    }

    /// Canonical serialization: `*`-joined positive-exponent bases followed
    /// by `/`-separated negative-exponent bases, fixed base order, no
    /// whitespace. Dimensionless is `one`. Only defined for scale 1.
    pub fn format_unit(&self) -> String {
        if self.is_dimensionless() {
            return "one".to_string();
        }
        let mut num = Vec::new();
        let mut den = Vec::new();
        for dim in BaseDim::ALL {
            let e = self.exponent(dim);
            let tok = dim.canonical_token();
            if e > 0 {
                num.push(if e == 1 {
                    tok.to_string()
                } else {
                    format!("{tok}^{e}")
                });
            } else if e < 0 {
                den.push(if e == -1 {
                    tok.to_string()
                } else {
                    format!("{}^{}", tok, -e)
                });
            }
        }
        let mut out = if num.is_empty() {
            "one".to_string()
        } else {
            num.join("*")
        };
        for d in den {
            out.push('/');
            out.push_str(&d);
        }
        out
    }
}

impl fmt::Display for UnitDim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if (self.scale - 1.0).abs() > f64::EPSILON {
            write!(f, "{} (scale {})", self.format_unit(), self.scale)
        } else {
            write!(f, "{}", self.format_unit())
        }
    }
}

struct BaseEntry {
    token: &'static str,
    dim: Option<BaseDim>,
    scale: f64,
}

const BASES: &[BaseEntry] = &[
    BaseEntry { token: "RMB", dim: Some(BaseDim::Currency), scale: 1.0 },
    BaseEntry { token: "m3", dim: Some(BaseDim::Volume), scale: 1.0 },
    BaseEntry { token: "t", dim: Some(BaseDim::Mass), scale: 1.0 },
    BaseEntry { token: "kg", dim: Some(BaseDim::Mass), scale: 1e-3 },
    BaseEntry { token: "ha", dim: Some(BaseDim::Area), scale: 1.0 },
    BaseEntry { token: "mm", dim: Some(BaseDim::Length), scale: 1.0 },
    BaseEntry { token: "kJ", dim: Some(BaseDim::Energy), scale: 1.0 },
    BaseEntry { token: "kWh", dim: Some(BaseDim::Energy), scale: 3600.0 },
    BaseEntry { token: "person", dim: Some(BaseDim::Count), scale: 1.0 },
    BaseEntry { token: "visitor", dim: Some(BaseDim::Count), scale: 1.0 },
    BaseEntry { token: "year", dim: Some(BaseDim::Time), scale: 1.0 },
    BaseEntry { token: "dB", dim: Some(BaseDim::Sound), scale: 1.0 },
    BaseEntry { token: "one", dim: None, scale: 1.0 },
    BaseEntry { token: "%", dim: None, scale: 1e-2 },
];

const PREFIXES: &[(&str, f64)] = &[("k", 1e3), ("million", 1e6), ("billion", 1e9)];

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Word(String, usize),
    Star(usize),
    Slash(usize),
    Caret(usize),
    Int(i8, usize),
}

fn lex(text: &str) -> Result<Vec<Token>, UnitError> {
    let mut tokens = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' => i += 1,
            '*' => {
                tokens.push(Token::Star(i));
                i += 1;
            }
            '/' => {
                tokens.push(Token::Slash(i));
                i += 1;
            }
            '^' => {
                tokens.push(Token::Caret(i));
                i += 1;
            }
            '%' => {
                tokens.push(Token::Word("%".to_string(), i));
                i += 1;
            }
            c if c.is_ascii_alphabetic() || c.is_ascii_digit() || c == '-' => {
                let start = i;
                while i < bytes.len() {
                    let d = bytes[i] as char;
                    if d.is_ascii_alphanumeric() || d == '-' {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let word = &text[start..i];
                if word.chars().next().is_some_and(|c| c.is_ascii_digit() || c == '-') {
                    let n: i8 = word.parse().map_err(|_| UnitError::Malformed {
                        reason: format!("invalid exponent `{word}`"),
                        offset: start,
                    })?;
                    tokens.push(Token::Int(n, start));
                } else {
                    tokens.push(Token::Word(word.to_string(), start));
                }
            }
            _ => {
                return Err(UnitError::Malformed {
                    reason: format!("unexpected character `{c}`"),
                    offset: i,
                })
            }
        }
    }
    Ok(tokens)
}

fn lookup_base(word: &str, offset: usize) -> Result<UnitDim, UnitError> {
    for entry in BASES {
        if entry.token == word {
            let mut dim = match entry.dim {
                Some(d) => UnitDim::base(d),
                None => UnitDim::dimensionless(),
            };
            dim.scale = entry.scale;
            return Ok(dim);
        }
    }
    Err(UnitError::UnknownToken {
        token: word.to_string(),
        offset,
    })
}

/// Parses a unit expression `prefix? base (('*'|'/') base)*` with optional
/// `^n` exponents, folding prefixes and per-base scales into the result's
/// scale factor.
pub fn parse_unit(text: &str) -> Result<UnitDim, UnitError> {
    let tokens = lex(text)?;
    let mut pos = 0;

    let mut result = UnitDim::dimensionless();

    // Optional leading prefix (k, million, billion) before the first base.
    if let Some(Token::Word(w, _)) = tokens.get(pos) {
        if let Some((_, factor)) = PREFIXES.iter().find(|(p, _)| p == w) {
            result.scale *= factor;
            pos += 1;
        }
    }

    let expect_factor = |tokens: &[Token], pos: &mut usize| -> Result<UnitDim, UnitError> {
        match tokens.get(*pos) {
            Some(Token::Word(w, off)) => {
                let mut dim = lookup_base(w, *off)?;
                *pos += 1;
                if let Some(Token::Caret(coff)) = tokens.get(*pos) {
                    let coff = *coff;
                    *pos += 1;
                    match tokens.get(*pos) {
                        Some(Token::Int(n, _)) => {
                            dim = dim.pow(*n);
                            *pos += 1;
                        }
                        _ => {
                            return Err(UnitError::Malformed {
                                reason: "expected integer exponent after `^`".to_string(),
                                offset: coff + 1,
                            })
                        }
                    }
                }
                Ok(dim)
            }
            Some(tok) => {
                let off = match tok {
                    Token::Star(o) | Token::Slash(o) | Token::Caret(o) | Token::Int(_, o) => *o,
                    Token::Word(_, o) => *o,
                };
                Err(UnitError::Malformed {
                    reason: "expected unit token".to_string(),
                    offset: off,
                })
            }
            None => Err(UnitError::Malformed {
                reason: "expected unit token, found end of input".to_string(),
                offset: text.len(),
            }),
        }
    };

    result = result.mul(&expect_factor(&tokens, &mut pos)?);

    while pos < tokens.len() {
        match &tokens[pos] {
            Token::Star(_) => {
                pos += 1;
                result = result.mul(&expect_factor(&tokens, &mut pos)?);
            }
            Token::Slash(_) => {
                pos += 1;
                result = result.div(&expect_factor(&tokens, &mut pos)?);
            }
            tok => {
                let off = match tok {
                    Token::Word(_, o) | Token::Int(_, o) => *o,
                    Token::Star(o) | Token::Slash(o) | Token::Caret(o) => *o,
                };
                return Err(UnitError::Malformed {
                    reason: "expected `*` or `/`".to_string(),
                    offset: off,
                });
            }
        }
    }

    Ok(result)
}

/// A finite magnitude with a unit, normalized to scale 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity {
    magnitude: f64,
    unit: UnitDim,
}

impl Quantity {
    /// Builds a quantity, folding the unit's scale into the magnitude.
    pub fn new(magnitude: f64, unit: UnitDim) -> Result<Quantity, UnitError> {
        let m = magnitude * unit.scale;
        if !m.is_finite() {
            return Err(UnitError::NonFinite);
        }
        Ok(Quantity {
            magnitude: m,
            unit: unit.with_scale_one(),
        })
    }

    pub fn dimensionless(magnitude: f64) -> Result<Quantity, UnitError> {
        Quantity::new(magnitude, UnitDim::dimensionless())
    }

    /// Parses `magnitude` against a unit expression, e.g. `(1.82, "billion RMB/year")`.
    pub fn parse(magnitude: f64, unit_text: &str) -> Result<Quantity, UnitError> {
        Quantity::new(magnitude, parse_unit(unit_text)?)
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    /// Same unit, different magnitude. Used by the sensitivity module to
    /// perturb already-normalized parameters.
    pub fn with_magnitude(&self, magnitude: f64) -> Result<Quantity, UnitError> {
        if !magnitude.is_finite() {
            return Err(UnitError::NonFinite);
        }
        Ok(Quantity {
            magnitude,
            unit: self.unit,
        })
    }

    pub fn unit(&self) -> &UnitDim {
        &self.unit
    }

    pub fn has_dim(&self, dim: &UnitDim) -> bool {
        self.unit.compatible(dim)
    }

    /// Checks dimension compatibility, reporting canonical unit strings on
    /// mismatch.
    pub fn expect_dim(&self, dim: &UnitDim) -> Result<(), UnitError> {
        if self.has_dim(dim) {
            Ok(())
        } else {
            Err(UnitError::DimensionMismatch {
                expected: dim.format_unit(),
                actual: self.unit.format_unit(),
            })
        }
    }
}

/// Multiplies two quantities: magnitudes multiply, exponents add.
pub fn qty_mul(a: &Quantity, b: &Quantity) -> Result<Quantity, UnitError> {
    Quantity::new(a.magnitude * b.magnitude, a.unit.mul(&b.unit))
}

/// Divides two quantities: magnitudes divide, exponents subtract.
pub fn qty_div(a: &Quantity, b: &Quantity) -> Result<Quantity, UnitError> {
    if b.magnitude == 0.0 {
        return Err(UnitError::DivisionByZero);
    }
    Quantity::new(a.magnitude / b.magnitude, a.unit.div(&b.unit))
}

/// Converts an area (ha) and a water depth (mm) to a volume (m³):
/// `volume = ha × mm × 10`, exact.
pub fn convert_area_depth_to_volume(area: &Quantity, depth: &Quantity) -> Result<Quantity, UnitError> {
    area.expect_dim(&UnitDim::base(BaseDim::Area))?;
    depth.expect_dim(&UnitDim::base(BaseDim::Length))?;
    Quantity::new(
        area.magnitude * depth.magnitude * 10.0,
        UnitDim::base(BaseDim::Volume),
    )
}

/// How a parameter value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Statistic,
    LocalStudy,
    Transfer,
    Constant,
}

impl Method {
    pub fn parse(text: &str) -> Option<Method> {
        match text {
            "statistic" => Some(Method::Statistic),
            "local_study" => Some(Method::LocalStudy),
            "transfer" => Some(Method::Transfer),
            "constant" => Some(Method::Constant),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Statistic => "statistic",
            Method::LocalStudy => "local_study",
            Method::Transfer => "transfer",
            Method::Constant => "constant",
        }
    }
}

/// Where a parameter value came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub source: String,
    pub year: i32,
    pub method: Method,
}

/// A named input value: quantity plus provenance and an optional closed
/// uncertainty interval in the same unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub id: String,
    pub quantity: Quantity,
    pub provenance: Provenance,
    pub uncertainty: Option<(f64, f64)>,
}

impl Parameter {
    /// Validates the interval invariant `low ≤ magnitude ≤ high`.
    pub fn check(&self) -> Result<(), String> {
        if let Some((low, high)) = self.uncertainty {
            let m = self.quantity.magnitude();
            if !(low <= m && m <= high) {
                return Err(format!(
                    "parameter `{}`: uncertainty [{low}, {high}] does not contain value {m}",
                    self.id
                ));
            }
        }
        Ok(())
    }
}

/// A set of uniquely-keyed parameters plus dataset metadata.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterSet {
    pub region: String,
    pub year: i32,
    params: BTreeMap<String, Parameter>,
}

impl ParameterSet {
    pub fn new(region: &str, year: i32) -> ParameterSet {
        ParameterSet {
            region: region.to_string(),
            year,
            params: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, p: Parameter) -> Result<(), String> {
        p.check()?;
        if self.params.contains_key(&p.id) {
            return Err(format!("duplicate parameter id `{}`", p.id));
        }
        self.params.insert(p.id.clone(), p);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Parameter> {
        self.params.get(id)
    }

    pub fn get_mut(&mut self, id: &str) -> Option<&mut Parameter> {
        self.params.get_mut(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.values()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }
}
