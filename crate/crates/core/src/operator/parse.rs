//! Plain-text operator files.
//!
//! ```text
//! # Hermite operator  -(d/dx)^2 + x^2
//! order: 2
//! d0: 0 0 1
//! d1: 0
//! d2: -1
//! ```
//!
//! * `order: M` appears exactly once.
//! * `dm: c0 c1 ...` gives the coefficient of `(d/dx)^m`, lowest power of
//!   `x` first, for every `m` in `0..=M`. Numbers are exact: `3`, `-1/2`,
//!   `1/2+3/4*i`, `-i`. Fractions must be in lowest terms with a positive
//!   denominator.
//! * `dm: n0 n1 ... | e0 e1 ...` gives a rational-function coefficient as
//!   numerator `|` denominator.
//! * `#` starts a comment. Any other `key: value` line is handed back to
//!   the caller untouched.

use super::poly::{Poly, RationalFunction};
use super::scalar::GaussianRational;
use super::RationalDiffOperator;
use crate::error::{Error, Result};

/// A `key: value` line the operator grammar does not own.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

#[derive(Clone, Debug)]
pub struct Document {
    pub operator: RationalDiffOperator,
    pub entries: Vec<Entry>,
}

impl Document {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

pub fn parse_document(text: &str) -> Result<Document> {
    let mut order: Option<(usize, usize)> = None;
    let mut terms: Vec<(usize, usize, RationalFunction)> = Vec::new();
    let mut entries: Vec<Entry> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once(':')
            .ok_or_else(|| err(line, format!("expected 'key: value', found '{content}'")))?;
        let (key, value) = (key.trim(), value.trim());

        if key == "order" {
            if order.is_some() {
                return Err(err(line, "duplicate 'order'"));
            }
            let m = value.parse::<usize>().map_err(|_| {
                err(
                    line,
                    format!("order must be a nonnegative integer, got '{value}'"),
                )
            })?;
            order = Some((m, line));
        } else if let Some(m) = key.strip_prefix('d').and_then(|s| s.parse::<usize>().ok()) {
            if terms.iter().any(|(mm, _, _)| *mm == m) {
                return Err(err(line, format!("duplicate coefficient line d{m}")));
            }
            let rf = parse_coefficient(value).map_err(|msg| err(line, msg))?;
            terms.push((m, line, rf));
        } else {
            if entries.iter().any(|e| e.key == key) {
                return Err(err(line, format!("duplicate key '{key}'")));
            }
            entries.push(Entry {
                line,
                key: key.to_string(),
                value: value.to_string(),
            });
        }
    }

    let (m_max, order_line) = order.ok_or_else(|| err(0, "missing 'order' line"))?;
    if let Some((m, line, _)) = terms.iter().find(|(m, _, _)| *m > m_max) {
        return Err(err(
            *line,
            format!("d{m} exceeds the declared order {m_max}"),
        ));
    }
    let mut coeffs = Vec::with_capacity(m_max + 1);
    for m in 0..=m_max {
        let rf = terms
            .iter()
            .find(|(mm, _, _)| *mm == m)
            .map(|(_, _, rf)| rf.clone())
            .ok_or_else(|| err(order_line, format!("missing coefficient line d{m}")))?;
        coeffs.push(rf);
    }
    let operator = RationalDiffOperator::new(coeffs).map_err(|e| {
        let line = terms
            .iter()
            .find(|(m, _, _)| *m == m_max)
            .map_or(order_line, |t| t.1);
        err(line, e.to_string())
    })?;
    Ok(Document { operator, entries })
}

fn parse_coefficient(value: &str) -> std::result::Result<RationalFunction, String> {
    let (num, den) = match value.split_once('|') {
        Some((n, d)) => (n, Some(d)),
        None => (value, None),
    };
    let num = parse_poly(num)?;
    match den {
        None => Ok(RationalFunction::from_poly(num)),
        Some(d) => {
            let den = parse_poly(d)?;
            RationalFunction::new(num, den).ok_or_else(|| "zero denominator polynomial".to_string())
        }
    }
}

fn parse_poly(s: &str) -> std::result::Result<Poly, String> {
    let tokens: Vec<&str> = s.split_whitespace().collect();
    if tokens.is_empty() {
        return Err("empty coefficient list".into());
    }
    tokens
        .iter()
        .map(|t| t.parse::<GaussianRational>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(Poly::new)
}
