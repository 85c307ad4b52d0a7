//! Exact rational scalar used for every position, time, distance and dual value.
//!
//! `Q` wraps an arbitrary-precision rational. Values are always in lowest
//! terms, so structural equality is numeric equality and comparisons never
//! need a tolerance.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use malachite_base::num::arithmetic::traits::{Abs, Lcm, Pow};
use malachite_base::num::basic::traits::{One, Zero};
use malachite_base::num::conversion::traits::RoundingFrom;
use malachite_base::rounding_modes::RoundingMode;
use malachite_nz::integer::Integer;
use malachite_nz::natural::Natural;
use malachite_q::Rational;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Q(Rational);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumParseError {
    #[error("empty number")]
    Empty,
    #[error("scientific notation is not accepted: {0:?}")]
    Scientific(String),
    #[error("not an exact decimal or p/q rational: {0:?}")]
    Malformed(String),
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
}

impl Q {
    pub fn zero() -> Self {
        Q(Rational::ZERO)
    }

    pub fn one() -> Self {
        Q(Rational::ONE)
    }

    pub fn from_int(n: i64) -> Self {
        Q(Rational::from(n))
    }

    /// `num / den` in lowest terms. Panics when `den == 0`.
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Q(Rational::from_signeds(num, den))
    }

    pub fn is_zero(&self) -> bool {
        self.0 == Rational::ZERO
    }

    pub fn is_negative(&self) -> bool {
        self.0 < Rational::ZERO
    }

    pub fn is_positive(&self) -> bool {
        self.0 > Rational::ZERO
    }

    pub fn abs(&self) -> Q {
        Q((&self.0).abs())
    }

    pub fn is_integer(&self) -> bool {
        *self.0.denominator_ref() == Natural::ONE
    }

    /// Absolute difference `|self - other|`.
    pub fn dist(&self, other: &Q) -> Q {
        if self >= other {
            self - other
        } else {
            other - self
        }
    }

    pub fn max_of<'a>(&'a self, other: &'a Q) -> &'a Q {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn min_of<'a>(&'a self, other: &'a Q) -> &'a Q {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn from_i128(n: i128) -> Self {
        Q(Rational::from(n))
    }

    /// The value as an `i128`, when it is an integer in range.
    pub fn to_i128(&self) -> Option<i128> {
        if !self.is_integer() {
            return None;
        }
        let n = Integer::try_from(&self.0).ok()?;
        i128::try_from(&n).ok()
    }

    /// Denominator in lowest terms, as an integer-valued `Q`.
    pub fn denominator(&self) -> Q {
        Q(Rational::from(self.0.denominator_ref().clone()))
    }

    /// Least common multiple of the denominators of `values` (1 when empty).
    pub fn common_denominator<'a>(values: impl IntoIterator<Item = &'a Q>) -> Q {
        let mut acc = Natural::ONE;
        for v in values {
            let d = v.0.denominator_ref();
            if *d != Natural::ONE {
                acc = acc.lcm(d);
            }
        }
        Q(Rational::from(acc))
    }

    pub fn to_f64(&self) -> f64 {
        f64::rounding_from(&self.0, RoundingMode::Nearest).0
    }

    /// Parses an exact decimal literal such as `-12.0350`.
    ///
    /// Exponent forms (`1e3`) are rejected rather than silently widened.
    pub fn parse_decimal(s: &str) -> Result<Q, NumParseError> {
        let t = s.trim();
        if t.is_empty() {
            return Err(NumParseError::Empty);
        }
        if t.contains(['e', 'E']) {
            return Err(NumParseError::Scientific(s.to_string()));
        }
        let (negative, body) = match t.as_bytes()[0] {
            b'-' => (true, &t[1..]),
            b'+' => (false, &t[1..]),
            _ => (false, t),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
        if (int_part.is_empty() && frac_part.is_empty())
            || !all_digits(int_part)
            || !all_digits(frac_part)
            || (body.ends_with('.') && frac_part.is_empty() && body.contains('.'))
        {
            return Err(NumParseError::Malformed(s.to_string()));
        }
        let digits = format!("{int_part}{frac_part}");
        let digits = if digits.is_empty() { "0" } else { &digits };
        let numerator =
            Integer::from_str(digits).map_err(|_| NumParseError::Malformed(s.to_string()))?;
        let denominator = Natural::from(10u32).pow(frac_part.len() as u64);
        let value = Rational::from_integers(numerator, Integer::from(denominator));
        Ok(Q(if negative { -value } else { value }))
    }

    /// Parses either a decimal literal or a `p/q` rational.
    pub fn parse_exact(s: &str) -> Result<Q, NumParseError> {
        let t = s.trim();
        match t.split_once('/') {
            None => Q::parse_decimal(t),
            Some((p, q)) => {
                let bad = || NumParseError::Malformed(s.to_string());
                let plain_int = |x: &str| {
                    let x = x.strip_prefix('-').unwrap_or(x);
                    !x.is_empty() && x.bytes().all(|b| b.is_ascii_digit())
                };
                if !plain_int(p) || !plain_int(q) {
                    return Err(bad());
                }
                let p = Integer::from_str(p).map_err(|_| bad())?;
                let q = Integer::from_str(q).map_err(|_| bad())?;
                if q == Integer::ZERO {
                    return Err(NumParseError::ZeroDenominator(s.to_string()));
                }
                Ok(Q(Rational::from_integers(p, q)))
            }
        }
    }

    /// Exact decimal rendering when the denominator is of the form `2^a 5^b`.
    pub fn to_terminating_decimal(&self) -> Option<String> {
        let mut den = self.0.denominator_ref().clone();
        let two = Natural::from(2u32);
        let five = Natural::from(5u32);
        let mut twos = 0u64;
        let mut fives = 0u64;
        while &den % &two == Natural::ZERO {
            den /= &two;
            twos += 1;
        }
        while &den % &five == Natural::ZERO {
            den /= &five;
            fives += 1;
        }
        if den != Natural::ONE {
            return None;
        }
        Some(self.to_decimal_string(twos.max(fives) as usize))
    }

    /// Decimal rendering with exactly `digits` fractional digits, rounding
    /// to nearest (ties to even).
    pub fn to_decimal_string(&self, digits: usize) -> String {
        let scale = Rational::from(Natural::from(10u32).pow(digits as u64));
        let scaled = &self.0 * scale;
        let (rounded, _) = Integer::rounding_from(&scaled, RoundingMode::Nearest);
        let negative = rounded < Integer::ZERO;
        let magnitude = (&rounded).abs().to_string();
        let body = if digits == 0 {
            magnitude
        } else {
            let padded = format!("{:0>width$}", magnitude, width = digits + 1);
            let split = padded.len() - digits;
            format!("{}.{}", &padded[..split], &padded[split..])
        };
        if negative {
            format!("-{body}")
        } else {
            body
        }
    }
}

impl fmt::Display for Q {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl fmt::Debug for Q {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Q {
    type Err = NumParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Q::parse_exact(s)
    }
}

impl From<i64> for Q {
    fn from(n: i64) -> Self {
        Q::from_int(n)
    }
}

impl Serialize for Q {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Q {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Q::parse_exact(&s).map_err(serde::de::Error::custom)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident) => {
        impl $trait<Q> for Q {
            type Output = Q;
            fn $method(self, rhs: Q) -> Q {
                Q(self.0.$method(rhs.0))
            }
        }
        impl<'a> $trait<&'a Q> for Q {
            type Output = Q;
            fn $method(self, rhs: &'a Q) -> Q {
                Q(self.0.$method(&rhs.0))
            }
        }
        impl<'a> $trait<Q> for &'a Q {
            type Output = Q;
            fn $method(self, rhs: Q) -> Q {
                Q((&self.0).$method(rhs.0))
            }
        }
        impl<'a, 'b> $trait<&'b Q> for &'a Q {
            type Output = Q;
            fn $method(self, rhs: &'b Q) -> Q {
                Q((&self.0).$method(&rhs.0))
            }
        }
    };
}

binop!(Add, add);
binop!(Sub, sub);
binop!(Mul, mul);
binop!(Div, div);

impl AddAssign<&Q> for Q {
    fn add_assign(&mut self, rhs: &Q) {
        self.0 += &rhs.0;
    }
}

impl AddAssign<Q> for Q {
    fn add_assign(&mut self, rhs: Q) {
        self.0 += rhs.0;
    }
}

impl SubAssign<&Q> for Q {
    fn sub_assign(&mut self, rhs: &Q) {
        self.0 -= &rhs.0;
    }
}

impl SubAssign<Q> for Q {
    fn sub_assign(&mut self, rhs: Q) {
        self.0 -= rhs.0;
    }
}

impl Neg for Q {
    type Output = Q;
    fn neg(self) -> Q {
        Q(-self.0)
    }
}

impl Neg for &Q {
    type Output = Q;
    fn neg(self) -> Q {
        Q(-&self.0)
    }
}

impl Sum for Q {
    fn sum<I: Iterator<Item = Q>>(iter: I) -> Q {
        iter.fold(Q::zero(), |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Q> for Q {
    fn sum<I: Iterator<Item = &'a Q>>(iter: I) -> Q {
        iter.fold(Q::zero(), |acc, x| acc + x)
    }
}

/// A value that may be `+∞`, used for "no augmenting path" costs.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Extended {
    Finite(Q),
    Infinite,
}

impl Extended {
    pub fn finite(&self) -> Option<&Q> {
        match self {
            Extended::Finite(q) => Some(q),
            Extended::Infinite => None,
        }
    }
}

impl PartialOrd for Extended {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Extended {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Extended::Finite(a), Extended::Finite(b)) => a.cmp(b),
            (Extended::Finite(_), Extended::Infinite) => Ordering::Less,
            (Extended::Infinite, Extended::Finite(_)) => Ordering::Greater,
            (Extended::Infinite, Extended::Infinite) => Ordering::Equal,
        }
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(q) => write!(f, "{q}"),
            Extended::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Extended {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl From<Option<Q>> for Extended {
    fn from(v: Option<Q>) -> Self {
        v.map_or(Extended::Infinite, Extended::Finite)
    }
}
