//! Weights that remember their exact rational value when they have one.
//!
//! Constructed states derive every weight from `μ0`, `η` and the base masses
//! `1/4`, `1/2` (or `1/3`) by rational arithmetic, so partition checks such as
//! "three sets of measure exactly one third" can be decided without rounding.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Weight {
    value: f64,
    exact: Option<BigRational>,
}

impl Weight {
    pub fn from_f64(value: f64) -> Self {
        Self { value, exact: None }
    }

    pub fn from_ratio(r: BigRational) -> Self {
        let value = ratio_to_f64(&r);
        Self { value, exact: Some(r) }
    }

    pub fn fraction(num: i64, den: i64) -> Self {
        Self::from_ratio(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn zero() -> Self {
        Self::from_ratio(BigRational::zero())
    }

    pub fn one() -> Self {
        Self::from_ratio(BigRational::one())
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn exact(&self) -> Option<&BigRational> {
        self.exact.as_ref()
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    pub fn is_positive(&self) -> bool {
        match &self.exact {
            Some(r) => r.is_positive(),
            None => self.value > 0.0,
        }
    }

    pub fn add(&self, other: &Weight) -> Weight {
        match (&self.exact, &other.exact) {
            (Some(a), Some(b)) => Weight::from_ratio(a + b),
            _ => Weight::from_f64(self.value + other.value),
        }
    }

    pub fn sub(&self, other: &Weight) -> Weight {
        match (&self.exact, &other.exact) {
            (Some(a), Some(b)) => Weight::from_ratio(a - b),
            _ => Weight::from_f64(self.value - other.value),
        }
    }

    pub fn mul(&self, other: &Weight) -> Weight {
        match (&self.exact, &other.exact) {
            (Some(a), Some(b)) => Weight::from_ratio(a * b),
            _ => Weight::from_f64(self.value * other.value),
        }
    }

    pub fn div_int(&self, n: i64) -> Weight {
        match &self.exact {
            Some(a) => Weight::from_ratio(a / BigRational::from_integer(BigInt::from(n))),
            None => Weight::from_f64(self.value / n as f64),
        }
    }

    pub fn powi(&self, n: u32) -> Weight {
        match &self.exact {
            Some(a) => Weight::from_ratio(num_traits::pow(a.clone(), n as usize)),
            None => Weight::from_f64(self.value.powi(n as i32)),
        }
    }

    /// Exact comparison when both sides are exact, else `|a - b| <= tol`.
    pub fn approx_eq(&self, other: &Weight, tol: f64) -> bool {
        match (&self.exact, &other.exact) {
            (Some(a), Some(b)) => a == b,
            _ => (self.value - other.value).abs() <= tol,
        }
    }

    pub fn sum<'a, I: IntoIterator<Item = &'a Weight>>(iter: I) -> Weight {
        iter.into_iter().fold(Weight::zero(), |acc, w| acc.add(w))
    }

    /// Parses `"3/8"`, `"0.125"`, `"1e-3"` and friends, keeping the exact
    /// rational value of any finite decimal literal.
    pub fn parse(s: &str) -> Result<Weight> {
        let s = s.trim();
        let bad = || Error::Config(format!("not a number: {s:?}"));
        if let Some((n, d)) = s.split_once('/') {
            let n = parse_decimal(n.trim()).ok_or_else(bad)?;
            let d = parse_decimal(d.trim()).ok_or_else(bad)?;
            if d.is_zero() {
                return Err(bad());
            }
            return Ok(Weight::from_ratio(n / d));
        }
        match parse_decimal(s) {
            Some(r) => Ok(Weight::from_ratio(r)),
            None => {
                let v: f64 = s.parse().map_err(|_| bad())?;
                if !v.is_finite() {
                    return Err(bad());
                }
                Ok(Weight::from_f64(v))
            }
        }
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.exact {
            Some(r) if r.denom().is_one() => write!(f, "{}", r.numer()),
            Some(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            None => write!(f, "{:.16e}", self.value),
        }
    }
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Fallback for magnitudes outside the direct conversion path.
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

fn parse_decimal(s: &str) -> Option<BigRational> {
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
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
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    if exp.unsigned_abs() > 4000 {
        return None;
    }
    let all: String = format!("{int_part}{frac_part}");
    let mut numer: BigInt = all.parse().ok()?;
    if neg {
        numer = -numer;
    }
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let r = if scale >= 0 {
        BigRational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Some(r)
}
