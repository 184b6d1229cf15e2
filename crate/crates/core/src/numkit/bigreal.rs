//! Binary floating-point reals of configurable precision built on `num-bigint`.
//!
//! A [`BigReal`] is `mantissa · 2^exponent` with `|mantissa| < 2^precision_bits`.
//! Every operation rounds its exact result once, to nearest with ties to even,
//! at the larger of the operand precisions. An `exact` flag records whether a
//! value is known to equal its mathematical definition (no rounding happened
//! anywhere in its history), which lets continued-fraction expansion treat
//! dyadic inputs such as `0.25` as exact rationals.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::NumError;

/// Default working precision.
pub const DEFAULT_PRECISION_BITS: u32 = 256;
/// Smallest precision accepted anywhere.
pub const MIN_PRECISION_BITS: u32 = 64;

/// Extra bits carried while evaluating constants before the final rounding.
const GUARD_BITS: u32 = 64;

#[derive(Clone, Debug)]
pub struct BigReal {
    mantissa: BigInt,
    exponent: i64,
    precision_bits: u32,
    exact: bool,
}

impl PartialEq for BigReal {
    fn eq(&self, other: &Self) -> bool {
        self.cmp_value(other) == Ordering::Equal
    }
}

impl BigReal {
    pub fn zero(precision_bits: u32) -> Self {
        Self {
            mantissa: BigInt::zero(),
            exponent: 0,
            precision_bits: precision_bits.max(MIN_PRECISION_BITS),
            exact: true,
        }
    }

    pub fn from_bigint(value: &BigInt, precision_bits: u32) -> Self {
        Self::round_from(value.clone(), 0, false, clamp(precision_bits), true)
    }

    pub fn from_i64(value: i64, precision_bits: u32) -> Self {
        Self::from_bigint(&BigInt::from(value), precision_bits)
    }

    /// Exact conversion of a finite `f64` (rounded only if `precision_bits < 53`,
    /// which the precision floor rules out).
    pub fn from_f64(value: f64, precision_bits: u32) -> Result<Self, NumError> {
        if !value.is_finite() {
            return Err(NumError::NonFinite);
        }
        if value == 0.0 {
            return Ok(Self::zero(precision_bits));
        }
        let bits = value.to_bits();
        let sign = if bits >> 63 == 1 { -1 } else { 1 };
        let raw_exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, exp) = if raw_exp == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), raw_exp - 1075)
        };
        Ok(Self::round_from(
            BigInt::from(mant) * sign,
            exp,
            false,
            clamp(precision_bits),
            true,
        ))
    }

    /// Correctly rounded `numerator / denominator`.
    pub fn from_ratio(
        numerator: &BigInt,
        denominator: &BigInt,
        precision_bits: u32,
    ) -> Result<Self, NumError> {
        if denominator.is_zero() {
            return Err(NumError::DivisionByZero);
        }
        Ok(Self::divide_integers(
            numerator.clone(),
            0,
            denominator.clone(),
            0,
            precision_bits.max(MIN_PRECISION_BITS),
            true,
        ))
    }

    pub fn precision_bits(&self) -> u32 {
        self.precision_bits
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.mantissa.sign() == Sign::Plus
    }

    pub fn is_negative(&self) -> bool {
        self.mantissa.sign() == Sign::Minus
    }

    /// Weight of the least significant mantissa bit at full precision.
    ///
    /// For a rounded value the rounding error is at most half of this.
    pub fn ulp_exponent(&self) -> i64 {
        let bits = self.mantissa.bits() as i64;
        self.exponent + bits - self.precision_bits as i64
    }

    /// Exact dyadic value as `(numerator, denominator)` with a power-of-two
    /// denominator (not necessarily reduced).
    pub fn to_ratio(&self) -> (BigInt, BigInt) {
        if self.exponent >= 0 {
            (&self.mantissa << self.exponent as usize, BigInt::one())
        } else {
            (
                self.mantissa.clone(),
                BigInt::one() << (-self.exponent) as usize,
            )
        }
    }

    pub fn with_precision(&self, precision_bits: u32) -> Self {
        Self::round_from(
            self.mantissa.clone(),
            self.exponent,
            false,
            clamp(precision_bits),
            self.exact,
        )
    }

    pub fn neg(&self) -> Self {
        Self {
            mantissa: -&self.mantissa,
            ..self.clone()
        }
    }

    pub fn abs(&self) -> Self {
        Self {
            mantissa: self.mantissa.abs(),
            ..self.clone()
        }
    }

    fn target(&self, other: &Self) -> u32 {
        self.precision_bits.max(other.precision_bits)
    }

    pub fn add(&self, other: &Self) -> Self {
        let prec = self.target(other);
        let exact = self.exact && other.exact;
        if self.is_zero() {
            return other.with_precision(prec).exact_and(exact);
        }
        if other.is_zero() {
            return self.with_precision(prec).exact_and(exact);
        }
        let e = self.exponent.min(other.exponent);
        let a = &self.mantissa << (self.exponent - e) as usize;
        let b = &other.mantissa << (other.exponent - e) as usize;
        Self::round_from(a + b, e, false, prec, exact)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self::round_from(
            &self.mantissa * &other.mantissa,
            self.exponent + other.exponent,
            false,
            self.target(other),
            self.exact && other.exact,
        )
    }

    pub fn div(&self, other: &Self) -> Result<Self, NumError> {
        if other.is_zero() {
            return Err(NumError::DivisionByZero);
        }
        Ok(Self::divide_integers(
            self.mantissa.clone(),
            self.exponent,
            other.mantissa.clone(),
            other.exponent,
            self.target(other),
            self.exact && other.exact,
        ))
    }

    pub fn sqrt(&self) -> Result<Self, NumError> {
        if self.is_negative() {
            return Err(NumError::NegativeSqrt);
        }
        if self.is_zero() {
            return Ok(self.clone());
        }
        let prec = self.precision_bits;
        let bits = self.mantissa.bits() as i64;
        let mut shift = (2 * prec as i64 + 4 - bits).max(0);
        if (self.exponent - shift).rem_euclid(2) != 0 {
            shift += 1;
        }
        let scaled = &self.mantissa << shift as usize;
        let root = scaled.sqrt();
        let sticky = &root * &root != scaled;
        Ok(Self::round_from(
            root,
            (self.exponent - shift) / 2,
            sticky,
            prec,
            self.exact && !sticky,
        ))
    }

    pub fn square(&self) -> Self {
        self.mul(self)
    }

    /// Multiply by an integer exactly, then round.
    pub fn mul_int(&self, k: &BigInt) -> Self {
        Self::round_from(
            &self.mantissa * k,
            self.exponent,
            false,
            self.precision_bits,
            self.exact,
        )
    }

    pub fn div_int(&self, k: &BigInt) -> Result<Self, NumError> {
        self.div(&Self::from_bigint(k, self.precision_bits))
    }

    /// Largest integer not exceeding the value.
    pub fn floor(&self) -> BigInt {
        if self.exponent >= 0 {
            &self.mantissa << self.exponent as usize
        } else {
            let den = BigInt::one() << (-self.exponent) as usize;
            self.mantissa.div_floor(&den)
        }
    }

    /// Fractional part in `[0, 1)`, rounded at the current precision.
    pub fn fract(&self) -> Self {
        let f = self.floor();
        self.sub(&Self::from_bigint(&f, self.precision_bits))
    }

    pub fn cmp_value(&self, other: &Self) -> Ordering {
        let e = self.exponent.min(other.exponent);
        let a = &self.mantissa << (self.exponent - e) as usize;
        let b = &other.mantissa << (other.exponent - e) as usize;
        a.cmp(&b)
    }

    /// Nearest `f64` (ties to even); saturates to infinity and flushes tiny
    /// magnitudes through the subnormal range.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let rounded = Self::round_from(self.mantissa.clone(), self.exponent, false, 53, true);
        let m = rounded.mantissa.to_f64().unwrap_or(f64::NAN);
        ldexp(m, rounded.exponent)
    }

    /// Natural logarithm of `|x|` to about double precision.
    pub fn ln_abs(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        let bits = self.mantissa.bits() as i64;
        let shift = bits - 60;
        let top = if shift > 0 {
            (&self.mantissa.abs() >> shift as usize).to_f64().unwrap_or(0.0)
        } else {
            self.mantissa.abs().to_f64().unwrap_or(0.0)
        };
        top.ln() + (self.exponent + shift.max(0)) as f64 * std::f64::consts::LN_2
    }

    fn exact_and(mut self, exact: bool) -> Self {
        self.exact = self.exact && exact;
        self
    }

    fn divide_integers(
        num: BigInt,
        num_exp: i64,
        den: BigInt,
        den_exp: i64,
        prec: u32,
        exact_in: bool,
    ) -> Self {
        let shift = (prec as i64 + 2 + den.bits() as i64 - num.bits() as i64).max(0);
        let scaled = num << shift as usize;
        let (q, r) = scaled.div_rem(&den);
        let sticky = !r.is_zero();
        Self::round_from(q, num_exp - den_exp - shift, sticky, prec, exact_in && !sticky)
    }

    /// Round `mantissa · 2^exponent` (plus an infinitesimal of the mantissa's
    /// sign when `sticky`) to `prec` bits.
    fn round_from(mantissa: BigInt, exponent: i64, sticky: bool, prec: u32, exact: bool) -> Self {
        if mantissa.is_zero() {
            return Self {
                mantissa,
                exponent: 0,
                precision_bits: prec,
                exact: exact && !sticky,
            };
        }
        let negative = mantissa.is_negative();
        let mut mag = mantissa.abs();
        let mut exp = exponent;
        let bits = mag.bits() as i64;
        let mut inexact = sticky;
        if bits > prec as i64 {
            let shift = (bits - prec as i64) as usize;
            let half = BigInt::one() << (shift - 1);
            let mask = (BigInt::one() << shift) - 1;
            let low = &mag & &mask;
            mag >>= shift;
            exp += shift as i64;
            let round_up = match low.cmp(&half) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => sticky || mag.is_odd(),
            };
            if !low.is_zero() {
                inexact = true;
            }
            if round_up {
                mag += 1;
                if mag.bits() as i64 > prec as i64 {
                    mag >>= 1;
                    exp += 1;
                }
            }
        } else if sticky {
            // Append guard bits so the sticky information is not lost on a
            // later re-rounding; the value itself is already within 1 ulp.
            inexact = true;
        }
        let mantissa = if negative { -mag } else { mag };
        Self {
            mantissa,
            exponent: exp,
            precision_bits: prec,
            exact: exact && !inexact,
        }
    }

    /// π correctly rounded (up to the usual guard-bit caveat) by Machin's formula.
    pub fn pi(precision_bits: u32) -> Self {
        let work = precision_bits as u64 + GUARD_BITS as u64;
        let scale = BigInt::one() << work as usize;
        let a = arctan_inverse(5, &scale);
        let b = arctan_inverse(239, &scale);
        let fixed = a * 16 - b * 4;
        Self::round_from(fixed, -(work as i64), true, clamp(precision_bits), false)
    }

    /// Euler's number via the factorial series.
    pub fn e(precision_bits: u32) -> Self {
        let work = precision_bits as u64 + GUARD_BITS as u64;
        let mut term = BigInt::one() << work as usize;
        let mut sum = term.clone();
        let mut k = 1u64;
        while !term.is_zero() {
            term /= k;
            sum += &term;
            k += 1;
        }
        Self::round_from(sum, -(work as i64), true, clamp(precision_bits), false)
    }

    /// ln 2 = Σ 1 / (k 2^k).
    pub fn ln2(precision_bits: u32) -> Self {
        let work = precision_bits as u64 + GUARD_BITS as u64;
        let one = BigInt::one() << work as usize;
        let mut sum = BigInt::zero();
        let mut k = 1u64;
        loop {
            let term = (&one >> k as usize) / k;
            if term.is_zero() {
                break;
            }
            sum += term;
            k += 1;
        }
        Self::round_from(sum, -(work as i64), true, clamp(precision_bits), false)
    }
}

impl fmt::Display for BigReal {
    /// Decimal rendering with about `precision_bits · log10(2)` significant digits.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let digits = ((self.precision_bits as f64) * std::f64::consts::LOG10_2).floor() as i64;
        let mag10 = (self.ln_abs() / std::f64::consts::LN_10).floor() as i64;
        let shift10 = digits - 1 - mag10;
        let (num, den) = self.to_ratio();
        let (num, den) = if shift10 >= 0 {
            (num * BigInt::from(10u32).pow(shift10 as u32), den)
        } else {
            (num, den * BigInt::from(10u32).pow((-shift10) as u32))
        };
        let twice_den: BigInt = den.clone() * 2;
        let numerator: BigInt = num * 2 + &den;
        let scaled: BigInt = numerator.div_floor(&twice_den);
        let sign = if scaled.is_negative() { "-" } else { "" };
        let s = scaled.abs().to_string();
        let point = s.len() as i64 - shift10;
        if point <= 0 {
            write!(f, "{sign}0.{}{}", "0".repeat((-point) as usize), s.trim_end_matches('0'))
        } else if point as usize >= s.len() {
            write!(f, "{sign}{}{}", s, "0".repeat(point as usize - s.len()))
        } else {
            let (int, frac) = s.split_at(point as usize);
            let frac = frac.trim_end_matches('0');
            if frac.is_empty() {
                write!(f, "{sign}{int}")
            } else {
                write!(f, "{sign}{int}.{frac}")
            }
        }
    }
}

fn clamp(precision_bits: u32) -> u32 {
    precision_bits.max(MIN_PRECISION_BITS)
}

fn arctan_inverse(x: u64, scale: &BigInt) -> BigInt {
    let x2 = BigInt::from(x * x);
    let mut power = scale / x;
    let mut sum = power.clone();
    let mut k = 1u64;
    loop {
        power /= &x2;
        if power.is_zero() {
            break;
        }
        let term = &power / (2 * k + 1);
        if k % 2 == 1 {
            sum -= term;
        } else {
            sum += term;
        }
        k += 1;
    }
    sum
}

/// `m · 2^e` without intermediate overflow for representable results.
pub(crate) fn ldexp(m: f64, e: i64) -> f64 {
    let mut value = m;
    let mut e = e;
    while e > 1000 {
        value *= 2f64.powi(1000);
        e -= 1000;
        if value.is_infinite() {
            return value;
        }
    }
    while e < -1000 {
        value *= 2f64.powi(-1000);
        e += 1000;
        if value == 0.0 {
            return value;
        }
    }
    value * 2f64.powi(e as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(x: f64) -> BigReal {
        BigReal::from_f64(x, 128).unwrap()
    }

    #[test]
    fn basic_arithmetic_is_exact_on_dyadics() {
        let x = r(0.75).add(&r(0.125));
        assert_eq!(x.to_f64(), 0.875);
        assert!(x.is_exact());
        let y = r(3.0).div(&r(4.0)).unwrap();
        assert!(y.is_exact());
        assert_eq!(y.to_f64(), 0.75);
        let z = r(1.0).div(&r(3.0)).unwrap();
        assert!(!z.is_exact());
        assert!((z.to_f64() - 1.0 / 3.0).abs() < 1e-17);
    }

    #[test]
    fn sqrt_two_squares_back() {
        let two = BigReal::from_i64(2, 256);
        let s = two.sqrt().unwrap();
        let back = s.square();
        let diff = back.sub(&two).abs();
        assert!(diff.ln_abs() < -250.0 * std::f64::consts::LN_2);
        assert!(!s.is_exact());
        assert!(BigReal::from_i64(9, 64).sqrt().unwrap().is_exact());
    }

    #[test]
    fn floor_and_fract() {
        let x = r(-2.5);
        assert_eq!(x.floor(), BigInt::from(-3));
        assert_eq!(x.fract().to_f64(), 0.5);
    }

    #[test]
    fn constants_match_f64() {
        assert_eq!(BigReal::pi(128).to_f64(), std::f64::consts::PI);
        assert_eq!(BigReal::e(128).to_f64(), std::f64::consts::E);
        assert_eq!(BigReal::ln2(128).to_f64(), std::f64::consts::LN_2);
    }

    #[test]
    fn display_prints_leading_digits() {
        let s = BigReal::pi(128).to_string();
        assert!(s.starts_with("3.14159265358979323846"), "{s}");
        assert_eq!(r(0.25).to_string(), "0.25");
    }

    #[test]
    fn to_f64_handles_extreme_exponents() {
        let tiny = BigReal::from_i64(1, 64).div(&BigReal::from_bigint(&(BigInt::one() << 1100usize), 64)).unwrap();
        assert_eq!(tiny.to_f64(), 0.0);
        assert!((tiny.ln_abs() + 1100.0 * std::f64::consts::LN_2).abs() < 1e-9);
        let big = BigReal::from_bigint(&(BigInt::one() << 1000usize), 64);
        assert_eq!(big.to_f64(), 2f64.powi(1000));
    }
}
