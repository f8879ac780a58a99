//! Exact time values.
//!
//! All solver arithmetic runs on `i128` rationals. Infinite values only ever
//! appear as interval bounds.

use std::fmt;
use std::ops::Neg;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde_json::Value;
use thiserror::Error;

/// A finite, exact point in time.
pub type Rational = Ratio<i128>;

/// An interval bound: a finite rational or one of the two infinities.
///
/// The derived ordering places `NegInf` below every finite value and `PosInf`
/// above, which is exactly the extended-real order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TimeValue {
    NegInf,
    Finite(Rational),
    PosInf,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid time value `{0}`")]
pub struct ParseTimeError(pub String);

pub fn int(v: i64) -> Rational {
    Rational::from_integer(v as i128)
}

/// Shorthand for `num / den` as an exact rational.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(num as i128, den as i128)
}

impl TimeValue {
    pub const ZERO: TimeValue = TimeValue::Finite(Ratio::new_raw(0, 1));

    pub fn int(v: i64) -> Self {
        TimeValue::Finite(int(v))
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, TimeValue::Finite(_))
    }

    pub fn finite(&self) -> Option<Rational> {
        match self {
            TimeValue::Finite(r) => Some(*r),
            _ => None,
        }
    }

    /// `self + r`; infinities absorb finite shifts.
    pub fn shift(self, r: Rational) -> TimeValue {
        match self {
            TimeValue::Finite(v) => TimeValue::Finite(v + r),
            other => other,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            TimeValue::NegInf => f64::NEG_INFINITY,
            TimeValue::PosInf => f64::INFINITY,
            TimeValue::Finite(r) => rational_to_f64(r),
        }
    }

    /// Encodes as a JSON number when the value has an exact decimal form,
    /// as a `"p/q"` string otherwise, and as `"inf"` / `"-inf"` for infinities.
    pub fn to_json(&self) -> Value {
        match self {
            TimeValue::NegInf => Value::String("-inf".into()),
            TimeValue::PosInf => Value::String("inf".into()),
            TimeValue::Finite(r) => rational_to_json(r),
        }
    }

    pub fn from_json(v: &Value) -> Result<Self, ParseTimeError> {
        match v {
            Value::Number(n) => n.to_string().parse(),
            Value::String(s) => s.parse(),
            other => Err(ParseTimeError(other.to_string())),
        }
    }
}

impl From<Rational> for TimeValue {
    fn from(r: Rational) -> Self {
        TimeValue::Finite(r)
    }
}

impl Neg for TimeValue {
    type Output = TimeValue;
    fn neg(self) -> TimeValue {
        match self {
            TimeValue::NegInf => TimeValue::PosInf,
            TimeValue::PosInf => TimeValue::NegInf,
            TimeValue::Finite(r) => TimeValue::Finite(-r),
        }
    }
}

impl PartialEq<Rational> for TimeValue {
    fn eq(&self, other: &Rational) -> bool {
        *self == TimeValue::Finite(*other)
    }
}

impl PartialOrd<Rational> for TimeValue {
    fn partial_cmp(&self, other: &Rational) -> Option<std::cmp::Ordering> {
        self.partial_cmp(&TimeValue::Finite(*other))
    }
}

impl FromStr for TimeValue {
    type Err = ParseTimeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "inf" | "+inf" => Ok(TimeValue::PosInf),
            "-inf" => Ok(TimeValue::NegInf),
            other => parse_rational(other).map(TimeValue::Finite),
        }
    }
}

impl fmt::Display for TimeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeValue::NegInf => f.write_str("-inf"),
            TimeValue::PosInf => f.write_str("inf"),
            TimeValue::Finite(r) => f.write_str(&format_rational(r)),
        }
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

pub fn rational_to_json(r: &Rational) -> Value {
    match decimal_string(r) {
        Some(s) => Value::Number(s.parse().expect("decimal string is a valid JSON number")),
        None => Value::String(format!("{}/{}", r.numer(), r.denom())),
    }
}

pub fn rational_from_json(v: &Value) -> Result<Rational, ParseTimeError> {
    match TimeValue::from_json(v)? {
        TimeValue::Finite(r) => Ok(r),
        _ => Err(ParseTimeError(v.to_string())),
    }
}

/// Decimal text, or `p/q` when the denominator has prime factors besides 2 and 5.
pub fn format_rational(r: &Rational) -> String {
    decimal_string(r).unwrap_or_else(|| format!("{}/{}", r.numer(), r.denom()))
}

/// Exact decimal rendering when one exists.
pub fn decimal_string(r: &Rational) -> Option<String> {
    let mut den = *r.denom();
    let (mut twos, mut fives) = (0u32, 0u32);
    while den % 2 == 0 {
        den /= 2;
        twos += 1;
    }
    while den % 5 == 0 {
        den /= 5;
        fives += 1;
    }
    if den != 1 {
        return None;
    }
    let digits = twos.max(fives);
    let scale = 10i128.checked_pow(digits)?;
    let scaled = r.numer().checked_mul(scale / r.denom())?;
    let negative = scaled < 0;
    let abs = scaled.unsigned_abs().to_string();
    let body = if digits == 0 {
        abs
    } else {
        let d = digits as usize;
        let padded = format!("{:0>width$}", abs, width = d + 1);
        let (int_part, frac_part) = padded.split_at(padded.len() - d);
        format!("{int_part}.{frac_part}")
    };
    Some(if negative { format!("-{body}") } else { body })
}

/// Parses `p/q`, integers, and decimals with an optional exponent.
pub fn parse_rational(s: &str) -> Result<Rational, ParseTimeError> {
    let err = || ParseTimeError(s.to_string());
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: i128 = p.trim().parse().map_err(|_| err())?;
        let q: i128 = q.trim().parse().map_err(|_| err())?;
        if q == 0 {
            return Err(err());
        }
        return Ok(Rational::new(p, q));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| err())?),
        None => (s, 0),
    };
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: i128 = digits.parse().map_err(|_| err())?;
    let exp = exponent - frac_part.len() as i32;
    let pow = |e: i32| 10i128.checked_pow(e.unsigned_abs()).ok_or_else(err);
    let mut value = if exp >= 0 {
        Rational::from_integer(numer.checked_mul(pow(exp)?).ok_or_else(err)?)
    } else {
        Rational::new(numer, pow(exp)?)
    };
    if negative {
        value = -value;
    }
    Ok(value)
}

/// Closed interval `[lo, hi]` over finite times.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Window {
    pub lo: Rational,
    pub hi: Rational,
}

impl Window {
    pub fn new(lo: Rational, hi: Rational) -> Self {
        debug_assert!(lo <= hi, "window lower bound above upper bound");
        Window { lo, hi }
    }

    pub fn point(t: Rational) -> Self {
        Window { lo: t, hi: t }
    }

    pub fn contains(&self, t: Rational) -> bool {
        self.lo <= t && t <= self.hi
    }

    pub fn width(&self) -> Rational {
        self.hi - self.lo
    }
}
