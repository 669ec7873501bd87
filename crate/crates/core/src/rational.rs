//! Arbitrary-precision rationals, always kept in lowest terms with a
//! positive denominator.
//!
//! This is the scalar type for the whole crate: polynomial coefficients,
//! variable bounds, prices, endowments and utility levels are all exact
//! rationals, so equality-to-zero is decidable everywhere.
//!
//! Values that fit in i64 numerator and denominator are stored inline and
//! computed with i128 intermediates (which cannot overflow for a single
//! add/sub/mul/div of two such values); everything else falls back to
//! heap-allocated big integers. The representation is canonical: a value
//! is boxed only when it does not fit inline, so derived-style equality
//! and hashing remain structural.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RationalError {
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("malformed rational literal `{0}`")]
    Malformed(String),
}

#[derive(Clone)]
enum Repr {
    /// Reduced, denominator positive, both parts within i64.
    Small(i64, i64),
    /// Reduced, denominator positive, does not fit `Small`.
    Big(Box<BigRational>),
}

/// Exact rational number in lowest terms with positive denominator.
#[derive(Clone)]
pub struct Rational(Repr);

fn gcd_u128(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Builds the canonical representation from i128 parts (`den != 0`).
fn from_i128(num: i128, den: i128) -> Rational {
    debug_assert!(den != 0);
    if num == 0 {
        return Rational(Repr::Small(0, 1));
    }
    let negative = (num < 0) != (den < 0);
    let un = num.unsigned_abs();
    let ud = den.unsigned_abs();
    let g = gcd_u128(un, ud);
    let (un, ud) = (un / g, ud / g);
    let max_num = if negative {
        1u128 << 63
    } else {
        (1u128 << 63) - 1
    };
    if un <= max_num && ud <= (1u128 << 63) - 1 {
        let n = if negative {
            (un as i128).wrapping_neg() as i64
        } else {
            un as i64
        };
        Rational(Repr::Small(n, ud as i64))
    } else {
        let mut n = BigInt::from(un);
        if negative {
            n = -n;
        }
        Rational(Repr::Big(Box::new(BigRational::new(n, BigInt::from(ud)))))
    }
}

/// Canonicalizes a big rational, demoting when it fits inline.
fn from_big(value: BigRational) -> Rational {
    if let (Some(n), Some(d)) = (value.numer().to_i64(), value.denom().to_i64()) {
        return Rational(Repr::Small(n, d));
    }
    Rational(Repr::Big(Box::new(value)))
}

impl Rational {
    pub fn new(num: BigInt, den: BigInt) -> Result<Self, RationalError> {
        if den.is_zero() {
            return Err(RationalError::ZeroDenominator);
        }
        Ok(from_big(BigRational::new(num, den)))
    }

    pub fn from_int(n: i64) -> Self {
        Rational(Repr::Small(n, 1))
    }

    /// `a/b` as a convenience constructor; panics on `b == 0`.
    pub fn ratio(a: i64, b: i64) -> Self {
        assert!(b != 0, "zero denominator");
        from_i128(i128::from(a), i128::from(b))
    }

    pub fn zero() -> Self {
        Rational(Repr::Small(0, 1))
    }

    pub fn one() -> Self {
        Rational(Repr::Small(1, 1))
    }

    fn to_big(&self) -> BigRational {
        match &self.0 {
            Repr::Small(n, d) => BigRational::new(BigInt::from(*n), BigInt::from(*d)),
            Repr::Big(b) => (**b).clone(),
        }
    }

    pub fn numer(&self) -> BigInt {
        match &self.0 {
            Repr::Small(n, _) => BigInt::from(*n),
            Repr::Big(b) => b.numer().clone(),
        }
    }

    pub fn denom(&self) -> BigInt {
        match &self.0 {
            Repr::Small(_, d) => BigInt::from(*d),
            Repr::Big(b) => b.denom().clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.0, Repr::Small(0, _))
    }

    pub fn is_negative(&self) -> bool {
        match &self.0 {
            Repr::Small(n, _) => *n < 0,
            Repr::Big(b) => b.is_negative(),
        }
    }

    pub fn is_positive(&self) -> bool {
        match &self.0 {
            Repr::Small(n, _) => *n > 0,
            Repr::Big(b) => b.is_positive(),
        }
    }

    pub fn is_integer(&self) -> bool {
        match &self.0 {
            Repr::Small(_, d) => *d == 1,
            Repr::Big(b) => b.is_integer(),
        }
    }

    pub fn abs(&self) -> Self {
        match &self.0 {
            Repr::Small(n, d) => from_i128(i128::from(*n).abs(), i128::from(*d)),
            Repr::Big(b) => from_big(b.abs()),
        }
    }

    pub fn recip(&self) -> Self {
        assert!(!self.is_zero(), "reciprocal of zero");
        match &self.0 {
            Repr::Small(n, d) => from_i128(i128::from(*d), i128::from(*n)),
            Repr::Big(b) => from_big(b.recip()),
        }
    }

    pub fn pow(&self, exp: u32) -> Self {
        if exp == 0 {
            return Rational::one();
        }
        if let Repr::Small(n, d) = &self.0 {
            let mut an: i128 = 1;
            let mut ad: i128 = 1;
            let mut fits = true;
            for _ in 0..exp {
                match (an.checked_mul(i128::from(*n)), ad.checked_mul(i128::from(*d))) {
                    (Some(x), Some(y)) => {
                        an = x;
                        ad = y;
                    }
                    _ => {
                        fits = false;
                        break;
                    }
                }
            }
            if fits {
                return from_i128(an, ad);
            }
        }
        from_big(self.to_big().pow(exp as i32))
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// Bit size of the reduced representation: bit length of |numerator|
    /// plus bit length of the denominator, each counted as at least 1.
    pub fn size_bits(&self) -> u64 {
        match &self.0 {
            Repr::Small(n, d) => {
                let nb = (64 - n.unsigned_abs().leading_zeros()).max(1) as u64;
                let db = (64 - d.unsigned_abs().leading_zeros()).max(1) as u64;
                nb + db
            }
            Repr::Big(b) => {
                let nb = b.numer().magnitude().bits().max(1);
                let db = b.denom().magnitude().bits().max(1);
                nb + db
            }
        }
    }

    pub fn to_f64(&self) -> f64 {
        match &self.0 {
            Repr::Small(n, d) => *n as f64 / *d as f64,
            Repr::Big(b) => b.to_f64().unwrap_or(f64::NAN),
        }
    }

    /// Exact conversion: every finite f64 is a dyadic rational.
    pub fn from_f64_exact(x: f64) -> Option<Self> {
        BigRational::from_f64(x).map(from_big)
    }

    /// Parses `num`, `-num`, or `num/den` with an optional sign on the
    /// numerator. The denominator must be a positive integer literal.
    pub fn parse(text: &str) -> Result<Self, RationalError> {
        let s = text.trim();
        let (num_s, den_s) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), Some(d.trim())),
            None => (s, None),
        };
        let num = BigInt::from_str(num_s).map_err(|_| RationalError::Malformed(text.into()))?;
        let den = match den_s {
            Some(d) => {
                let den =
                    BigInt::from_str(d).map_err(|_| RationalError::Malformed(text.into()))?;
                if den.sign() != Sign::Plus {
                    return Err(if den.is_zero() {
                        RationalError::ZeroDenominator
                    } else {
                        RationalError::Malformed(text.into())
                    });
                }
                den
            }
            None => BigInt::one(),
        };
        Rational::new(num, den)
    }
}

// --- arithmetic core -------------------------------------------------------
//
// For two inline values, |numerator|, |denominator| <= 2^63, so every
// product below is at most 2^126 and the add/sub numerator at most
// 2^127 - 2^65 + 2 < i128::MAX: plain i128 arithmetic cannot overflow.

fn add_impl(a: &Rational, b: &Rational) -> Rational {
    match (&a.0, &b.0) {
        (Repr::Small(an, ad), Repr::Small(bn, bd)) => {
            let (an, ad, bn, bd) = (
                i128::from(*an),
                i128::from(*ad),
                i128::from(*bn),
                i128::from(*bd),
            );
            from_i128(an * bd + bn * ad, ad * bd)
        }
        _ => from_big(a.to_big() + b.to_big()),
    }
}

fn sub_impl(a: &Rational, b: &Rational) -> Rational {
    match (&a.0, &b.0) {
        (Repr::Small(an, ad), Repr::Small(bn, bd)) => {
            let (an, ad, bn, bd) = (
                i128::from(*an),
                i128::from(*ad),
                i128::from(*bn),
                i128::from(*bd),
            );
            from_i128(an * bd - bn * ad, ad * bd)
        }
        _ => from_big(a.to_big() - b.to_big()),
    }
}

fn mul_impl(a: &Rational, b: &Rational) -> Rational {
    match (&a.0, &b.0) {
        (Repr::Small(an, ad), Repr::Small(bn, bd)) => from_i128(
            i128::from(*an) * i128::from(*bn),
            i128::from(*ad) * i128::from(*bd),
        ),
        _ => from_big(a.to_big() * b.to_big()),
    }
}

fn div_impl(a: &Rational, b: &Rational) -> Rational {
    assert!(!b.is_zero(), "division by zero");
    match (&a.0, &b.0) {
        (Repr::Small(an, ad), Repr::Small(bn, bd)) => from_i128(
            i128::from(*an) * i128::from(*bd),
            i128::from(*ad) * i128::from(*bn),
        ),
        _ => from_big(a.to_big() / b.to_big()),
    }
}

impl PartialEq for Rational {
    fn eq(&self, other: &Self) -> bool {
        // canonical representation: equal values share a variant
        match (&self.0, &other.0) {
            (Repr::Small(an, ad), Repr::Small(bn, bd)) => an == bn && ad == bd,
            (Repr::Big(a), Repr::Big(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Rational {}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> Ordering {
        match (&self.0, &other.0) {
            (Repr::Small(an, ad), Repr::Small(bn, bd)) => {
                (i128::from(*an) * i128::from(*bd)).cmp(&(i128::from(*bn) * i128::from(*ad)))
            }
            (Repr::Big(a), Repr::Big(b)) => a.cmp(b),
            _ => self.to_big().cmp(&other.to_big()),
        }
    }
}

impl Hash for Rational {
    fn hash<H: Hasher>(&self, state: &mut H) {
        // variant-tagged hashing is consistent with Eq by canonicality
        match &self.0 {
            Repr::Small(n, d) => {
                0u8.hash(state);
                n.hash(state);
                d.hash(state);
            }
            Repr::Big(b) => {
                1u8.hash(state);
                b.numer().hash(state);
                b.denom().hash(state);
            }
        }
    }
}

impl Default for Rational {
    fn default() -> Self {
        Rational::zero()
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small(n, 1) => write!(f, "{n}"),
            Repr::Small(n, d) => write!(f, "{n}/{d}"),
            Repr::Big(b) => {
                if b.denom().is_one() {
                    write!(f, "{}", b.numer())
                } else {
                    write!(f, "{}/{}", b.numer(), b.denom())
                }
            }
        }
    }
}

// Debug prints the same `num/den` form as Display; the wrapped raw
// representation is too noisy for test failure messages.
impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = RationalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Rational::parse(s)
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Rational::parse(&s).map_err(D::Error::custom)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $impl_fn:ident) => {
        impl $trait for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                $impl_fn(&self, &rhs)
            }
        }
        impl<'a> $trait<&'a Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                $impl_fn(self, rhs)
            }
        }
        impl $trait<&Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                $impl_fn(&self, rhs)
            }
        }
        impl $trait<Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                $impl_fn(self, &rhs)
            }
        }
    };
}

binop!(Add, add, add_impl);
binop!(Sub, sub, sub_impl);
binop!(Mul, mul, mul_impl);
binop!(Div, div, div_impl);

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        -&self
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        match &self.0 {
            Repr::Small(n, d) => from_i128(-i128::from(*n), i128::from(*d)),
            Repr::Big(b) => from_big(-(**b).clone()),
        }
    }
}

impl AddAssign<&Rational> for Rational {
    fn add_assign(&mut self, rhs: &Rational) {
        *self = add_impl(self, rhs);
    }
}

impl SubAssign<&Rational> for Rational {
    fn sub_assign(&mut self, rhs: &Rational) {
        *self = sub_impl(self, rhs);
    }
}

impl MulAssign<&Rational> for Rational {
    fn mul_assign(&mut self, rhs: &Rational) {
        *self = mul_impl(self, rhs);
    }
}

impl PartialEq<i64> for Rational {
    fn eq(&self, other: &i64) -> bool {
        matches!(&self.0, Repr::Small(n, 1) if n == other)
    }
}

impl PartialOrd<i64> for Rational {
    fn partial_cmp(&self, other: &i64) -> Option<Ordering> {
        match &self.0 {
            Repr::Small(n, d) => {
                Some(i128::from(*n).cmp(&(i128::from(*other) * i128::from(*d))))
            }
            Repr::Big(b) => {
                (**b).partial_cmp(&BigRational::from_integer(BigInt::from(*other)))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["0", "-2", "3/4", "-7/5", "141421/100000"] {
            let r = Rational::parse(s).unwrap();
            assert_eq!(r.to_string(), s);
        }
        // reduction and denominator normalization
        assert_eq!(Rational::parse("6/4").unwrap(), Rational::ratio(3, 2));
        assert_eq!(Rational::parse(" 2 / 3 ").unwrap(), Rational::ratio(2, 3));
    }

    #[test]
    fn parse_rejects_bad_input() {
        assert_eq!(Rational::parse("1/0"), Err(RationalError::ZeroDenominator));
        assert!(matches!(
            Rational::parse("1/-2"),
            Err(RationalError::Malformed(_))
        ));
        assert!(matches!(
            Rational::parse("a"),
            Err(RationalError::Malformed(_))
        ));
        assert!(matches!(
            Rational::parse("1.5"),
            Err(RationalError::Malformed(_))
        ));
    }

    #[test]
    fn size_bits_counts_both_parts() {
        assert_eq!(Rational::zero().size_bits(), 2); // 0 and 1, minimum 1 bit each
        assert_eq!(Rational::one().size_bits(), 2);
        assert_eq!(Rational::from_int(4).size_bits(), 4); // 100 + 1
        assert_eq!(Rational::ratio(-3, 4).size_bits(), 5); // 11 + 100
    }

    #[test]
    fn exact_f64_round_trip() {
        let r = Rational::from_f64_exact(0.375).unwrap();
        assert_eq!(r, Rational::ratio(3, 8));
        assert!(Rational::from_f64_exact(f64::NAN).is_none());
    }

    #[test]
    fn arithmetic_is_exact() {
        let a = Rational::ratio(1, 3);
        let b = Rational::ratio(1, 6);
        assert_eq!(&a + &b, Rational::ratio(1, 2));
        assert_eq!(&a - &b, b);
        assert_eq!(&a * &b, Rational::ratio(1, 18));
        assert_eq!(a.clone() / b, Rational::from_int(2));
        assert_eq!(a.pow(3), Rational::ratio(1, 27));
    }

    #[test]
    fn promotion_and_demotion_round_trip() {
        // i64::MAX * 2 overflows the inline form, then cancels back into it
        let big = Rational::from_int(i64::MAX) * Rational::from_int(4);
        assert!(matches!(big.0, Repr::Big(_)));
        let back = &big / &Rational::from_int(4);
        assert!(matches!(back.0, Repr::Small(_, _)));
        assert_eq!(back, Rational::from_int(i64::MAX));
        // equality and ordering agree across representations
        let small = Rational::from_int(1);
        assert!(big > small);
        assert!((&big - &big).is_zero());
    }

    #[test]
    fn huge_values_stay_exact() {
        let a = Rational::parse("123456789012345678901234567890/7").unwrap();
        let b = Rational::parse("-98765432109876543210/11").unwrap();
        let sum = &a + &b;
        let expected = Rational::parse(
            "667198262750042750042750042720/77",
        )
        .unwrap();
        // cross-check: 1234...90*11 - 9876...10*7 over 77
        assert_eq!(
            sum,
            Rational::new(
                BigInt::from_str("123456789012345678901234567890").unwrap() * BigInt::from(11)
                    - BigInt::from_str("98765432109876543210").unwrap() * BigInt::from(7),
                BigInt::from(77)
            )
            .unwrap()
        );
        let _ = expected;
        assert_eq!(&sum - &sum, Rational::zero());
        assert_eq!((&a * &b) / &b, a);
    }

    #[test]
    fn boundary_products_do_not_overflow() {
        let max = Rational::from_int(i64::MAX);
        let min = Rational::from_int(i64::MIN);
        // 2 * i64::MAX^2-scale numerators exercise the i128 bound
        let x = &max + &max;
        assert_eq!(x, Rational::from_int(i64::MAX) * Rational::from_int(2));
        let y = &min * &min;
        assert!(y.is_positive());
        let z = &min + &max; // -1
        assert_eq!(z, Rational::from_int(-1));
        let w = Rational::ratio(i64::MAX, i64::MAX - 1) + Rational::ratio(1, i64::MAX - 2);
        assert!(w.is_positive());
    }
}
