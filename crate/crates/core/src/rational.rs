//! Exact rational arithmetic for all gas and fee quantities.
//!
//! Fee identities in this crate (risk sums, shill margins, Shapley shares)
//! are asserted with exact equality, so every monetary value is a reduced
//! big-integer fraction rather than a float. Values serialize as `"num/den"`
//! strings (plain `"num"` when the denominator is one); decimal rendering is
//! display-only.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{One, Signed, ToPrimitive, Zero};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// An arbitrary-precision rational number, always kept in reduced form.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(BigRational);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RationalParseError {
    #[error("empty rational literal")]
    Empty,
    #[error("invalid integer part in rational literal: {0:?}")]
    BadInteger(String),
    #[error("zero denominator in rational literal: {0:?}")]
    ZeroDenominator(String),
}

impl Rational {
    pub fn new(numer: i64, denom: i64) -> Self {
        assert!(denom != 0, "rational with zero denominator");
        Rational(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn from_int(v: i64) -> Self {
        Rational(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn from_u64(v: u64) -> Self {
        Rational(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn from_big(v: BigRational) -> Self {
        Rational(v)
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
    }

    pub fn recip(&self) -> Self {
        assert!(!self.is_zero(), "reciprocal of zero");
        Rational(self.0.recip())
    }

    pub fn inner(&self) -> &BigRational {
        &self.0
    }

    /// Lossy conversion for display and plotting; never used in checks.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Fixed-point decimal rendering with `digits` fractional digits,
    /// truncated toward zero. Display-only.
    pub fn to_decimal_string(&self, digits: u32) -> String {
        let sign = if self.is_negative() { "-" } else { "" };
        let a = self.0.abs();
        let scale = BigInt::from(10u32).pow(digits);
        let scaled = (a.numer() * &scale) / a.denom();
        let int_part = &scaled / &scale;
        let frac_part = &scaled % &scale;
        if digits == 0 {
            format!("{sign}{int_part}")
        } else {
            format!("{sign}{int_part}.{:0>width$}", frac_part, width = digits as usize)
        }
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for Rational {
    type Err = RationalParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(RationalParseError::Empty);
        }
        let (num_str, den_str) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), Some(d.trim())),
            None => (s, None),
        };
        let numer: BigInt = num_str
            .parse()
            .map_err(|_| RationalParseError::BadInteger(num_str.to_owned()))?;
        let denom: BigInt = match den_str {
            Some(d) => d
                .parse()
                .map_err(|_| RationalParseError::BadInteger(d.to_owned()))?,
            None => BigInt::one(),
        };
        if denom.is_zero() {
            return Err(RationalParseError::ZeroDenominator(s.to_owned()));
        }
        Ok(Rational(BigRational::new(numer, denom)))
    }
}

impl From<i64> for Rational {
    fn from(v: i64) -> Self {
        Rational::from_int(v)
    }
}

impl From<u64> for Rational {
    fn from(v: u64) -> Self {
        Rational::from_u64(v)
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational((self.0).$method(rhs.0))
            }
        }
        impl<'a> $trait<&'a Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                Rational((self.0).$method(&rhs.0))
            }
        }
        impl<'a> $trait<Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational((&self.0).$method(rhs.0))
            }
        }
        impl<'a, 'b> $trait<&'b Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: &'b Rational) -> Rational {
                Rational((&self.0).$method(&rhs.0))
            }
        }
    };
}

impl_binop!(Add, add);
impl_binop!(Sub, sub);
impl_binop!(Mul, mul);
impl_binop!(Div, div);

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-&self.0)
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), Add::add)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, r| acc + r)
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct RatVisitor;

        impl<'de> de::Visitor<'de> for RatVisitor {
            type Value = Rational;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a rational as \"num/den\" string or an integer")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
                v.parse().map_err(de::Error::custom)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
                Ok(Rational::from_int(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
                Ok(Rational::from_u64(v))
            }
        }

        deserializer.deserialize_any(RatVisitor)
    }
}

/// Rounds `r` to `sig` significant decimal digits, half-to-even.
pub fn round_to_sig_digits(r: &Rational, sig: u32) -> Rational {
    assert!(sig > 0, "need at least one significant digit");
    if r.is_zero() {
        return Rational::zero();
    }
    let negative = r.is_negative();
    let a = r.inner().abs();
    // Decimal exponent e with 10^e <= a < 10^(e+1).
    let num_digits = a.numer().to_string().len() as i64;
    let den_digits = a.denom().to_string().len() as i64;
    let mut e = num_digits - den_digits;
    let ten = BigInt::from(10u32);
    let pow = |k: i64| -> BigInt { ten.pow(k.unsigned_abs() as u32) };
    // a >= 10^e iff numer * 10^-e >= denom (sign-split to stay integral).
    let ge_pow10 = |x: &BigRational, k: i64| -> bool {
        if k >= 0 {
            x.numer() >= &(x.denom() * pow(k))
        } else {
            x.numer() * pow(k) >= *x.denom()
        }
    };
    if !ge_pow10(&a, e) {
        e -= 1;
    }
    debug_assert!(ge_pow10(&a, e) && !ge_pow10(&a, e + 1));
    // mantissa = round(a / 10^(e - sig + 1)) with sig digits.
    let shift = e - sig as i64 + 1;
    let (num, den) = if shift >= 0 {
        (a.numer().clone(), a.denom() * pow(shift))
    } else {
        (a.numer() * pow(shift), a.denom().clone())
    };
    let (q, rem) = num::Integer::div_rem(&num, &den);
    let twice = &rem * BigInt::from(2u32);
    let mantissa = if twice > den || (twice == den && num::Integer::is_odd(&q)) {
        q + BigInt::one()
    } else {
        q
    };
    let rounded = if shift >= 0 {
        BigRational::from_integer(mantissa * pow(shift))
    } else {
        BigRational::new(mantissa, pow(shift))
    };
    Rational(if negative { -rounded } else { rounded })
}

/// Approximates `e^x` to `sig` significant decimal digits.
///
/// Fixed-point evaluation: the argument is halved until it is small, a Taylor
/// sum runs on scaled integers with fifteen guard digits, and the result is
/// squared back up before rounding. Deterministic for identical inputs.
pub fn exp_rational(x: &Rational, sig: u32) -> Rational {
    const GUARD: u32 = 15;
    let scale = BigInt::from(10u32).pow(sig + GUARD);

    // Halve until |y| <= 1/4 so the series converges fast and, for negative
    // arguments, without cancellation loss.
    let quarter = Rational::new(1, 4);
    let mut halvings = 0u32;
    let mut y = x.clone();
    while y.abs() > quarter {
        y = y / Rational::from_int(2);
        halvings += 1;
        assert!(halvings <= 64, "exp argument out of supported range");
    }

    let num = y.numer().clone();
    let den = y.denom().clone();
    let mut term = scale.clone();
    let mut acc = scale.clone();
    let mut k = BigInt::one();
    while !term.is_zero() {
        term = (&term * &num) / (&den * &k);
        acc += &term;
        k += BigInt::one();
        if term.to_string().len() > 80 && k > BigInt::from(500) {
            break; // unreachable for |y| <= 1/4; guards against misuse
        }
    }
    for _ in 0..halvings {
        acc = (&acc * &acc) / &scale;
    }
    let approx = Rational(BigRational::new(acc, scale));
    round_to_sig_digits(&approx, sig)
}
