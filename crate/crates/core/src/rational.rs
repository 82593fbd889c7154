//! Exact rational numbers and their canonical `"num/den"` text form.
//!
//! Every rational that crosses a file boundary is written as a reduced
//! `"num/den"` string (the denominator is always present, `"1/1"` included)
//! so that documents round-trip bit-exactly.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer, Visitor};
use serde::Serializer;

/// Arbitrary-precision rational used throughout the crate.
pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed rational `{0}`: expected `num/den` with a non-zero denominator")]
pub struct ParseRationalError(pub String);

/// Shorthand for `num/den` as a [`Rational`].
///
/// # Panics
/// Panics when `den == 0`.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Canonical `num/den` text.
pub fn to_text(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn parse(text: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError(text.to_string());
    let trimmed = text.trim();
    let (num, den) = match trimmed.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (trimmed, "1"),
    };
    let num = BigInt::from_str(num).map_err(|_| err())?;
    let den = BigInt::from_str(den).map_err(|_| err())?;
    if den.is_zero() {
        return Err(err());
    }
    Ok(Rational::new(num, den))
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Nearest rational with denominator `den` (ties away from zero).
pub fn round_to_denominator(x: f64, den: u64) -> Rational {
    let scaled = (x * den as f64).round();
    Rational::new(BigInt::from(scaled as i64), BigInt::from(den))
}

pub fn in_unit_interval(r: &Rational) -> bool {
    !r.is_negative() && *r <= Rational::one()
}

/// Exact value rendered as a `num/den` pair next to a fixed decimal.
pub struct Exact<'a>(pub &'a Rational);

impl fmt::Display for Exact<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", fixed(to_f64(self.0)), to_text(self.0))
    }
}

/// Locale-independent fixed decimal with at most six places and trailing
/// zeros removed: `0.125`, `-0.25`, `0`.
pub fn fixed(x: f64) -> String {
    let mut s = format!("{x:.6}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".to_string();
    }
    s
}

/// `serde(with = "crate::rational::serde_text")` for single rationals.
pub mod serde_text {
    use super::*;

    pub fn serialize<S: Serializer>(value: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&to_text(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        struct TextVisitor;
        impl Visitor<'_> for TextVisitor {
            type Value = Rational;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a rational as a \"num/den\" string")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
                parse(v).map_err(E::custom)
            }
        }
        d.deserialize_str(TextVisitor)
    }
}

/// Same as [`serde_text`] for `Vec<Rational>`.
pub mod serde_text_vec {
    use super::*;
    use serde::{Deserialize, Serialize};

    pub fn serialize<S: Serializer>(values: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        values.iter().map(to_text).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|t| parse(t).map_err(de::Error::custom))
            .collect()
    }
}

/// Same as [`serde_text`] for `Option<Rational>`.
pub mod serde_text_opt {
    use super::*;
    use serde::{Deserialize, Serialize};

    pub fn serialize<S: Serializer>(value: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        value.as_ref().map(to_text).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|t| parse(&t).map_err(de::Error::custom))
            .transpose()
    }
}
