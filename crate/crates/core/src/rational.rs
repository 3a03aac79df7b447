//! Exact rational numbers and their text forms.
//!
//! Rule computations never round. Values are read from decimal (`3.2`),
//! integer (`16`) or fraction (`16/5`) notation and written back in the
//! shortest of those forms that is exact.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Arbitrary-precision rational, always kept in lowest terms with a positive
/// denominator.
pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("`{text}` is not an exact decimal or fraction")]
pub struct ParseRationalError {
    pub text: String,
}

/// Shorthand for `numer/denom`.
pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn integer(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

pub fn from_usize(value: usize) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

/// Parses `12`, `-3.25`, `+0.5`, `16/5` or `1e3`-free decimal text exactly.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError { text: text.to_string() };
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(err());
    }
    if let Some((num, den)) = trimmed.split_once('/') {
        let num: BigInt = parse_integer(num.trim()).ok_or_else(err)?;
        let den: BigInt = parse_integer(den.trim()).ok_or_else(err)?;
        if den.is_zero() {
            return Err(err());
        }
        return Ok(Rational::new(num, den));
    }
    let (negative, body) = match trimmed.as_bytes()[0] {
        b'-' => (true, &trimmed[1..]),
        b'+' => (false, &trimmed[1..]),
        _ => (false, trimmed),
    };
    let (whole, frac) = match body.split_once('.') {
        Some((w, f)) => (w, f),
        None => (body, ""),
    };
    if whole.is_empty() && frac.is_empty() {
        return Err(err());
    }
    if !whole.bytes().all(|c| c.is_ascii_digit()) || !frac.bytes().all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let digits = format!("{whole}{frac}");
    let mut numer: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().map_err(|_| err())?
    };
    if negative {
        numer = -numer;
    }
    let denom = num_traits::pow(BigInt::from(10), frac.len());
    Ok(Rational::new(numer, denom))
}

fn parse_integer(text: &str) -> Option<BigInt> {
    let body = text.strip_prefix('+').unwrap_or(text);
    let digits = body.strip_prefix('-').unwrap_or(body);
    if digits.is_empty() || !digits.bytes().all(|c| c.is_ascii_digit()) {
        return None;
    }
    body.parse().ok()
}

/// Writes `value` as an integer, a terminating decimal, or `numer/denom`,
/// whichever is exact and shortest in kind.
pub fn format_rational(value: &Rational) -> String {
    if value.is_integer() {
        return value.numer().to_string();
    }
    let mut rest = value.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let mut twos = 0usize;
    let mut fives = 0usize;
    while rest.is_even() {
        rest /= &two;
        twos += 1;
    }
    while (&rest % &five).is_zero() {
        rest /= &five;
        fives += 1;
    }
    if !rest.is_one() {
        return format!("{}/{}", value.numer(), value.denom());
    }
    let places = twos.max(fives);
    let scale = num_traits::pow(BigInt::from(10), places);
    let scaled = value.numer().abs() * &scale / value.denom();
    let (whole, frac) = scaled.div_rem(&scale);
    let sign = if value.is_negative() { "-" } else { "" };
    format!("{sign}{whole}.{:0>width$}", frac.to_string(), width = places)
}

/// Lossy conversion for reporting only.
pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// `value * count >= target`, without building intermediate rationals.
pub(crate) fn times_at_least(value: &Rational, count: usize, target: &Rational) -> bool {
    value.numer() * BigInt::from(count) * target.denom() >= target.numer() * value.denom()
}
