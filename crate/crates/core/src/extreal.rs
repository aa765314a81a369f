//! Exact nonnegative rationals extended with infinity.
//!
//! Every distance, bound and context weight in the crate is an [`ExtReal`].
//! Arithmetic is exact; an operation whose result does not fit the backing
//! integer type panics instead of rounding.

use std::fmt;
use std::ops::Add;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ParseNumberError;

/// Exact rational used for all finite quantities.
pub type Rational = Ratio<i128>;

/// A value of `[0, ∞]`.
///
/// Variant order matters: the derived `Ord` places every finite value below `Inf`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExtReal {
    Fin(Rational),
    Inf,
}

pub use ExtReal::Inf as INF;

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal::Fin(Ratio::new_raw(0, 1));
    pub const ONE: ExtReal = ExtReal::Fin(Ratio::new_raw(1, 1));

    /// Builds `numer/denom`; panics when the value is negative or `denom` is zero.
    pub fn new(numer: i128, denom: i128) -> ExtReal {
        ExtReal::from_rational(Ratio::new(numer, denom))
    }

    pub fn from_int(n: i128) -> ExtReal {
        ExtReal::new(n, 1)
    }

    pub fn from_rational(r: Rational) -> ExtReal {
        assert!(r >= Rational::zero(), "negative distance {r}");
        ExtReal::Fin(r)
    }

    /// Fallible variant of [`ExtReal::from_rational`].
    pub fn try_from_rational(r: Rational) -> Option<ExtReal> {
        (r >= Rational::zero()).then_some(ExtReal::Fin(r))
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ExtReal::Fin(_))
    }

    pub fn is_inf(&self) -> bool {
        matches!(self, ExtReal::Inf)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ExtReal::Fin(r) if r.is_zero())
    }

    pub fn finite(&self) -> Option<Rational> {
        match self {
            ExtReal::Fin(r) => Some(*r),
            ExtReal::Inf => None,
        }
    }

    /// Multiplication by a nonnegative rational. `0 · ∞` is taken to be `0`.
    pub fn scale(&self, k: Rational) -> ExtReal {
        assert!(k >= Rational::zero(), "negative scale factor {k}");
        match self {
            ExtReal::Inf if k.is_zero() => ExtReal::ZERO,
            ExtReal::Inf => ExtReal::Inf,
            ExtReal::Fin(r) => ExtReal::Fin(checked(r.checked_mul(&k))),
        }
    }

    /// Division by a positive rational.
    pub fn div(&self, k: Rational) -> ExtReal {
        assert!(k > Rational::zero(), "division by nonpositive {k}");
        match self {
            ExtReal::Inf => ExtReal::Inf,
            ExtReal::Fin(r) => ExtReal::Fin(checked(r.checked_div(&k))),
        }
    }

    pub fn min(self, other: ExtReal) -> ExtReal {
        std::cmp::min(self, other)
    }

    pub fn max(self, other: ExtReal) -> ExtReal {
        std::cmp::max(self, other)
    }
}

fn checked(r: Option<Rational>) -> Rational {
    r.expect("rational overflow: value exceeds the exact 128-bit range")
}

/// `c · r^n` computed exactly.
pub fn geometric(scale: Rational, ratio: Rational, n: u64) -> Rational {
    let mut acc = scale;
    for _ in 0..n {
        acc = checked(acc.checked_mul(&ratio));
    }
    acc
}

impl Add for ExtReal {
    type Output = ExtReal;

    fn add(self, rhs: ExtReal) -> ExtReal {
        match (self, rhs) {
            (ExtReal::Fin(a), ExtReal::Fin(b)) => ExtReal::Fin(checked(a.checked_add(&b))),
            _ => ExtReal::Inf,
        }
    }
}

impl From<Rational> for ExtReal {
    fn from(r: Rational) -> Self {
        ExtReal::from_rational(r)
    }
}

impl Default for ExtReal {
    fn default() -> Self {
        ExtReal::ZERO
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Inf => f.write_str("inf"),
            ExtReal::Fin(r) => write_rational(f, r),
        }
    }
}

pub(crate) fn write_rational(f: &mut fmt::Formatter<'_>, r: &Rational) -> fmt::Result {
    if r.denom().is_one() {
        write!(f, "{}", r.numer())
    } else {
        write!(f, "{}/{}", r.numer(), r.denom())
    }
}

/// Renders a rational the same way finite [`ExtReal`]s are rendered.
pub fn rational_to_string(r: &Rational) -> String {
    ExtReal::Fin(*r).to_string()
}

/// Parses `p`, `p/q` or a decimal literal such as `0.25` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational, ParseNumberError> {
    let s = s.trim();
    let bad = || ParseNumberError(s.to_string());
    if let Some((p, q)) = s.split_once('/') {
        let p: i128 = parse_int(p.trim()).ok_or_else(bad)?;
        let q: i128 = parse_int(q.trim()).ok_or_else(bad)?;
        if q == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(p, q));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) || frac.len() > 18 {
            return Err(bad());
        }
        let negative = whole.starts_with('-');
        let whole_val: i128 = if whole.is_empty() || whole == "-" { 0 } else { parse_int(whole).ok_or_else(bad)? };
        let denom = 10i128.pow(frac.len() as u32);
        let frac_val: i128 = frac.parse().map_err(|_| bad())?;
        let magnitude = whole_val.abs() * denom + frac_val;
        let numer = if negative || whole_val < 0 { -magnitude } else { magnitude };
        return Ok(Ratio::new(numer, denom));
    }
    Ok(Ratio::from_integer(parse_int(s).ok_or_else(bad)?))
}

// Literals are limited to the i64 range so that sums and products of a few of
// them stay well inside i128.
fn parse_int(s: &str) -> Option<i128> {
    let v: i64 = s.parse().ok()?;
    Some(v as i128)
}

impl FromStr for ExtReal {
    type Err = ParseNumberError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t == "∞" {
            return Ok(ExtReal::Inf);
        }
        let r = parse_rational(t)?;
        ExtReal::try_from_rational(r).ok_or_else(|| ParseNumberError(s.to_string()))
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for plain rationals using the `"p/q"` string form.
pub mod rational_serde {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&rational_to_string(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}
