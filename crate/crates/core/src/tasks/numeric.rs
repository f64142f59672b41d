//! Numeric answers: `The answer is $<value>$`.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::ExtractError;

/// Canonical form of a numeric answer. Integers, decimals and simple
/// fractions become exact rationals; anything else is kept as a trimmed,
/// whitespace-collapsed literal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NumericAnswer {
    Rational(BigRational),
    Literal(String),
}

impl fmt::Display for NumericAnswer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumericAnswer::Rational(r) if r.denom().is_one() => write!(f, "{}", r.numer()),
            NumericAnswer::Rational(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            NumericAnswer::Literal(s) => f.write_str(s),
        }
    }
}

fn parse_unsigned_decimal(s: &str) -> Option<BigRational> {
    let (int_part, frac_part) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit())
    {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = digits.parse().ok()?;
    let denom = num_traits::pow(BigInt::from(10), frac_part.len());
    Some(BigRational::new(numer, denom))
}

/// Parses an integer, decimal or `a/b` fraction after commas, whitespace and
/// a leading `+` are removed.
pub fn parse_rational(literal: &str) -> Option<BigRational> {
    let cleaned: String = literal
        .chars()
        .filter(|c| *c != ',' && !c.is_whitespace())
        .collect();
    let cleaned = cleaned.strip_prefix('+').unwrap_or(&cleaned);
    let (negative, body) = match cleaned.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, cleaned),
    };
    if body.is_empty() {
        return None;
    }
    let value = match body.split_once('/') {
        Some((n, d)) => {
            if n.contains('.') || d.contains('.') {
                return None;
            }
            let n = parse_unsigned_decimal(n)?;
            let d = parse_unsigned_decimal(d)?;
            if d.is_zero() {
                return None;
            }
            n / d
        }
        None => parse_unsigned_decimal(body)?,
    };
    Some(if negative { -value } else { value })
}

pub fn canonicalize_numeric(literal: &str) -> NumericAnswer {
    match parse_rational(literal) {
        Some(r) => NumericAnswer::Rational(r),
        None => NumericAnswer::Literal(literal.split_whitespace().collect::<Vec<_>>().join(" ")),
    }
}

/// Content of the first non-empty `$...$` span.
pub fn dollar_span(text: &str) -> Option<&str> {
    let mut rest = text;
    while let Some(open) = rest.find('$') {
        let after = &rest[open + 1..];
        let close = after.find('$')?;
        let inner = after[..close].trim();
        if !inner.is_empty() {
            return Some(inner);
        }
        rest = &after[close + 1..];
    }
    None
}

pub fn extract_numeric(answer_text: &str) -> Result<NumericAnswer, ExtractError> {
    let span = dollar_span(answer_text).ok_or(ExtractError::NoValue)?;
    Ok(canonicalize_numeric(span))
}

/// Exact equality when both sides are rationals, string equality otherwise.
pub fn numeric_matches(predicted: &NumericAnswer, gold: &NumericAnswer) -> bool {
    predicted == gold
}
