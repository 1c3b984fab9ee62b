//! Numeric traits shared by the exact and floating-point code paths.

use std::cmp::Ordering;
use std::fmt;

use num::rational::Ratio;
use num::{BigInt, BigRational, Float, FromPrimitive, Num, Signed, ToPrimitive, Zero};

/// A scalar field element that can be compared and converted: `f32`, `f64`,
/// or an exact rational.
pub trait Scalar:
    Clone + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// Absolute slack used when comparing against a rational threshold.
    /// Zero for exact types.
    fn threshold_slack() -> Self;

    /// Converts an exact rational, rounding for floating types.
    fn from_rational(r: &BigRational) -> Option<Self>;

    /// `num / den` in this type.
    fn ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num).expect("i64 fits") / Self::from_i64(den).expect("i64 fits")
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

/// Floating-point scalars used by the iterative numerics and the simulator.
pub trait Real: Scalar + Float {}

impl Scalar for f64 {
    fn threshold_slack() -> Self {
        8.0 * f64::EPSILON
    }
    fn from_rational(r: &BigRational) -> Option<Self> {
        r.to_f64()
    }
}

impl Scalar for f32 {
    fn threshold_slack() -> Self {
        8.0 * f32::EPSILON
    }
    fn from_rational(r: &BigRational) -> Option<Self> {
        r.to_f32()
    }
}

impl Real for f64 {}
impl Real for f32 {}

impl Scalar for BigRational {
    fn threshold_slack() -> Self {
        Self::zero()
    }
    fn from_rational(r: &BigRational) -> Option<Self> {
        Some(r.clone())
    }
    fn ratio(num: i64, den: i64) -> Self {
        Ratio::new(BigInt::from(num), BigInt::from(den))
    }
}

/// Compares `x` with `num / den`, treating values within
/// [`Scalar::threshold_slack`] (scaled by the threshold) as equal.
pub fn cmp_threshold<T: Scalar>(x: &T, num: i64, den: i64) -> Ordering {
    let t = T::ratio(num, den);
    let scale = if t.abs() > T::one() { t.abs() } else { T::one() };
    let slack = T::threshold_slack() * scale;
    let diff = x.clone() - t;
    if diff.abs() <= slack {
        Ordering::Equal
    } else if diff > T::zero() {
        Ordering::Greater
    } else {
        Ordering::Less
    }
}

/// Parses a decimal (`0.85`, `1e-3`) or fraction (`2/3`) literal exactly.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    if let Some((n, d)) = s.split_once('/') {
        let n = parse_rational(n)?;
        let d = parse_rational(d)?;
        if d.is_zero() {
            return None;
        }
        return Some(n / d);
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
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
    let all: String = format!("{int_part}{frac_part}");
    let numer: BigInt = if all.is_empty() { BigInt::zero() } else { all.parse().ok()? };
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut r = if scale >= 0 {
        BigRational::from_integer(numer * num::pow(ten, scale as usize))
    } else {
        Ratio::new(numer, num::pow(ten, (-scale) as usize))
    };
    if neg {
        r = -r;
    }
    Some(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(parse_rational("0.85").unwrap(), BigRational::ratio(17, 20));
        assert_eq!(parse_rational("2/3").unwrap(), BigRational::ratio(2, 3));
        assert_eq!(parse_rational("1e-3").unwrap(), BigRational::ratio(1, 1000));
        assert_eq!(parse_rational("-.5").unwrap(), BigRational::ratio(-1, 2));
        assert!(parse_rational("0.5x").is_none());
        assert!(parse_rational("1/0").is_none());
        assert!(parse_rational(".").is_none());
    }

    #[test]
    fn threshold_comparison_tolerates_float_rounding() {
        assert_eq!(cmp_threshold(&(10.0f64 / 11.0), 10, 11), Ordering::Equal);
        assert_eq!(cmp_threshold(&(2.0f64 / 3.0), 2, 3), Ordering::Equal);
        assert_eq!(cmp_threshold(&0.7f64, 2, 3), Ordering::Greater);
        let exact = BigRational::ratio(2, 3);
        assert_eq!(cmp_threshold(&exact, 2, 3), Ordering::Equal);
        let just_above = BigRational::ratio(2_000_000_001, 3_000_000_000);
        assert_eq!(cmp_threshold(&just_above, 2, 3), Ordering::Greater);
    }
}
