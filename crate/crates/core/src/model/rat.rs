//! Exact rational numbers.
//!
//! Every continuous quantity in the crate (seconds, bits, bits/second) is a
//! [`Rat`]. The canonical form keeps the denominator positive and reduced, so
//! structural equality is numeric equality.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rat(BigRational);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid rational literal `{0}`")]
pub struct ParseRatError(pub String);

impl Rat {
    pub fn zero() -> Self {
        Rat(BigRational::zero())
    }

    pub fn one() -> Self {
        Rat(BigRational::one())
    }

    pub fn int(n: i64) -> Self {
        Rat(BigRational::from_integer(BigInt::from(n)))
    }

    /// `num / den`. Panics on a zero denominator.
    pub fn ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Rat(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_bigints(num: BigInt, den: BigInt) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        Rat(BigRational::new(num, den))
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn abs(&self) -> Self {
        Rat(self.0.abs())
    }

    pub fn floor(&self) -> Self {
        Rat(self.0.floor())
    }

    pub fn ceil(&self) -> Self {
        Rat(self.0.ceil())
    }

    pub fn recip(&self) -> Self {
        assert!(!self.is_zero(), "reciprocal of zero");
        Rat(self.0.recip())
    }

    pub fn max_of(a: &Rat, b: &Rat) -> Rat {
        if a >= b {
            a.clone()
        } else {
            b.clone()
        }
    }

    pub fn min_of(a: &Rat, b: &Rat) -> Rat {
        if a <= b {
            a.clone()
        } else {
            b.clone()
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Integer part of the floor, if it fits.
    pub fn floor_i64(&self) -> Option<i64> {
        self.0.floor().to_integer().to_i64()
    }

    /// Fixed-point decimal rendering, rounded half away from zero.
    pub fn to_decimal(&self, places: usize) -> String {
        let scale = BigInt::from(10u32).pow(places as u32);
        let scaled = self.0.abs() * BigRational::from_integer(scale.clone());
        let two = BigInt::from(2);
        let (q, r) = scaled.numer().div_rem(scaled.denom());
        let rounded = if &r * &two >= *scaled.denom() { q + 1 } else { q };
        let (int_part, frac_part) = rounded.div_rem(&scale);
        let sign = if self.is_negative() && !rounded_is_zero(&int_part, &frac_part) { "-" } else { "" };
        if places == 0 {
            format!("{sign}{int_part}")
        } else {
            let frac = frac_part.to_string();
            format!("{sign}{int_part}.{}{frac}", "0".repeat(places - frac.len()))
        }
    }
}

fn rounded_is_zero(a: &BigInt, b: &BigInt) -> bool {
    a.is_zero() && b.is_zero()
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Accepts integers, `a/b` ratios, and decimals with an optional exponent
/// (`-1.25`, `1e6`, `12.8e3`). Decimals are converted exactly.
impl FromStr for Rat {
    type Err = ParseRatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseRatError(s.to_string());
        let t = s.trim();
        if t.is_empty() {
            return Err(err());
        }
        if let Some((n, d)) = t.split_once('/') {
            let n = parse_decimal(n.trim()).ok_or_else(err)?;
            let d = parse_decimal(d.trim()).ok_or_else(err)?;
            if d.is_zero() {
                return Err(err());
            }
            return Ok(Rat(n / d));
        }
        parse_decimal(t).map(Rat).ok_or_else(err)
    }
}

fn parse_decimal(s: &str) -> Option<BigRational> {
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let all: String = format!("{int_part}{frac_part}");
    let n = BigInt::parse_bytes(all.as_bytes(), 10)?;
    let n = if neg { -n } else { n };
    let shift = exp - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let value = if shift >= 0 {
        BigRational::from_integer(n * ten.pow(shift as u32))
    } else {
        BigRational::new(n, ten.pow((-shift) as u32))
    };
    Some(value)
}

impl Serialize for Rat {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl From<i64> for Rat {
    fn from(n: i64) -> Self {
        Rat::int(n)
    }
}

impl Zero for Rat {
    fn zero() -> Self {
        Rat::zero()
    }

    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait<Rat> for Rat {
            type Output = Rat;
            fn $method(self, rhs: Rat) -> Rat {
                Rat(self.0.$method(rhs.0))
            }
        }
        impl<'a> $trait<&'a Rat> for Rat {
            type Output = Rat;
            fn $method(self, rhs: &'a Rat) -> Rat {
                Rat(self.0.$method(&rhs.0))
            }
        }
        impl<'a> $trait<Rat> for &'a Rat {
            type Output = Rat;
            fn $method(self, rhs: Rat) -> Rat {
                Rat((&self.0).$method(rhs.0))
            }
        }
        impl<'a, 'b> $trait<&'b Rat> for &'a Rat {
            type Output = Rat;
            fn $method(self, rhs: &'b Rat) -> Rat {
                Rat((&self.0).$method(&rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);

impl Div<Rat> for Rat {
    type Output = Rat;
    fn div(self, rhs: Rat) -> Rat {
        assert!(!rhs.is_zero(), "division by zero");
        Rat(self.0 / rhs.0)
    }
}

impl<'a> Div<&'a Rat> for Rat {
    type Output = Rat;
    fn div(self, rhs: &'a Rat) -> Rat {
        assert!(!rhs.is_zero(), "division by zero");
        Rat(self.0 / &rhs.0)
    }
}

impl Div<Rat> for &Rat {
    type Output = Rat;
    fn div(self, rhs: Rat) -> Rat {
        assert!(!rhs.is_zero(), "division by zero");
        Rat(&self.0 / rhs.0)
    }
}

impl<'b> Div<&'b Rat> for &Rat {
    type Output = Rat;
    fn div(self, rhs: &'b Rat) -> Rat {
        assert!(!rhs.is_zero(), "division by zero");
        Rat(&self.0 / &rhs.0)
    }
}

impl Neg for Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat(-self.0)
    }
}

impl Neg for &Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat(-&self.0)
    }
}

impl AddAssign<&Rat> for Rat {
    fn add_assign(&mut self, rhs: &Rat) {
        self.0 += &rhs.0;
    }
}

impl AddAssign<Rat> for Rat {
    fn add_assign(&mut self, rhs: Rat) {
        self.0 += rhs.0;
    }
}

impl SubAssign<&Rat> for Rat {
    fn sub_assign(&mut self, rhs: &Rat) {
        self.0 -= &rhs.0;
    }
}

impl Sum for Rat {
    fn sum<I: Iterator<Item = Rat>>(iter: I) -> Rat {
        iter.fold(Rat::zero(), |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Rat> for Rat {
    fn sum<I: Iterator<Item = &'a Rat>>(iter: I) -> Rat {
        iter.fold(Rat::zero(), |acc, x| acc + x)
    }
}

impl PartialEq<i64> for Rat {
    fn eq(&self, other: &i64) -> bool {
        self.0.is_integer() && *self.0.numer() == BigInt::from(*other)
    }
}

impl PartialOrd<i64> for Rat {
    fn partial_cmp(&self, other: &i64) -> Option<Ordering> {
        Some(self.0.cmp(&BigRational::from_integer(BigInt::from(*other))))
    }
}

/// Sign of a rational as -1, 0, 1.
pub fn signum(x: &Rat) -> i32 {
    match x.0.numer().sign() {
        Sign::Minus => -1,
        Sign::NoSign => 0,
        Sign::Plus => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_every_literal_form() {
        assert_eq!("38000/7".parse::<Rat>().unwrap(), Rat::ratio(38000, 7));
        assert_eq!("-1.25".parse::<Rat>().unwrap(), Rat::ratio(-5, 4));
        assert_eq!("12.8e3".parse::<Rat>().unwrap(), Rat::int(12800));
        assert_eq!("1e-3".parse::<Rat>().unwrap(), Rat::ratio(1, 1000));
        assert_eq!(".5".parse::<Rat>().unwrap(), Rat::ratio(1, 2));
        assert_eq!("1.5/0.5".parse::<Rat>().unwrap(), Rat::int(3));
        assert!("".parse::<Rat>().is_err());
        assert!("1/0".parse::<Rat>().is_err());
        assert!("abc".parse::<Rat>().is_err());
        assert!("-".parse::<Rat>().is_err());
    }

    #[test]
    fn canonical_form() {
        let x = Rat::ratio(6, -4);
        assert_eq!(x.to_string(), "-3/2");
        assert!(x.denom() > &BigInt::zero());
        assert_eq!(Rat::ratio(10, 5).to_string(), "2");
    }

    #[test]
    fn decimal_rendering_rounds_half_away() {
        assert_eq!(Rat::ratio(38000, 7).to_decimal(3), "5428.571");
        assert_eq!(Rat::ratio(5, 2).to_decimal(0), "3");
        assert_eq!(Rat::ratio(-5, 2).to_decimal(0), "-3");
        assert_eq!(Rat::ratio(-1, 1000).to_decimal(2), "0.00");
        assert_eq!(Rat::int(6).to_decimal(2), "6.00");
        assert_eq!(Rat::ratio(1, 200).to_decimal(2), "0.01");
    }

    fn arb_rat() -> impl Strategy<Value = Rat> {
        (any::<i64>(), 1i64..i64::MAX).prop_map(|(n, d)| Rat::ratio(n, d))
    }

    proptest! {
        #[test]
        fn display_parse_round_trip(x in arb_rat()) {
            let back: Rat = x.to_string().parse().unwrap();
            prop_assert_eq!(back, x);
        }

        #[test]
        fn field_identities(a in arb_rat(), b in arb_rat()) {
            prop_assert_eq!(&(&a + &b) - &b, a.clone());
            if !b.is_zero() {
                prop_assert_eq!(&(&a * &b) / &b, a.clone());
            }
            prop_assert_eq!(signum(&(&a - &a)), 0);
        }
    }
}
