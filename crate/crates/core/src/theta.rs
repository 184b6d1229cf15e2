//! Jacobi theta functions
//!
//! ```text
//! ϑ₃(z, t) = Σ_n exp(iπt n²) exp(2izn)
//! ϑ₂(z, t) = Σ_n exp(iπt (n+½)²) exp(2iz(n+½))
//! ```
//!
//! evaluated in completed-square form around the dominant lattice point, so
//! that huge arguments `z = iB` stay finite in log scale.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkit::{CertifiedValue, ROUNDING_INFLATION};

const MAX_HALF_WIDTH: i64 = 50_000_000;
/// Largest `ln` magnitude that still fits in an `f64`.
pub const LN_F64_MAX: f64 = 709.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ThetaKind {
    Theta2,
    Theta3,
}

impl ThetaKind {
    fn offset(self) -> f64 {
        match self {
            ThetaKind::Theta2 => 0.5,
            ThetaKind::Theta3 => 0.0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThetaError {
    #[error("modulus must have positive imaginary part, got {0}")]
    NonPositiveModulus(f64),
    #[error("tolerance must be positive, got {0}")]
    NonPositiveTolerance(f64),
    #[error("non-finite argument")]
    NonFinite,
    #[error("magnitude e^{0} exceeds the floating-point range; use the scaled evaluation")]
    Overflow(f64),
    #[error("requested accuracy needs more than {MAX_HALF_WIDTH} terms per side")]
    TooManyTerms,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaQuery {
    pub kind: ThetaKind,
    pub z: Complex64,
    pub t: Complex64,
    pub tol: f64,
}

impl ThetaQuery {
    pub fn new(kind: ThetaKind, z: Complex64, t: Complex64, tol: f64) -> Self {
        Self { kind, z, t, tol }
    }

    /// `ϑ(iB, iA)`.
    pub fn imaginary(kind: ThetaKind, b: f64, a: f64, tol: f64) -> Self {
        Self::new(kind, Complex64::new(0.0, b), Complex64::new(0.0, a), tol)
    }

    /// `ϑ(x, iA)` with real `x`.
    pub fn real_arg(kind: ThetaKind, x: f64, a: f64, tol: f64) -> Self {
        Self::new(kind, Complex64::new(x, 0.0), Complex64::new(0.0, a), tol)
    }

    fn validate(&self) -> Result<(), ThetaError> {
        if !(self.z.re.is_finite() && self.z.im.is_finite() && self.t.re.is_finite() && self.t.im.is_finite()) {
            return Err(ThetaError::NonFinite);
        }
        if !(self.t.im > 0.0) {
            return Err(ThetaError::NonPositiveModulus(self.t.im));
        }
        if !(self.tol > 0.0) {
            return Err(ThetaError::NonPositiveTolerance(self.tol));
        }
        Ok(())
    }
}

/// `exp(ln_scale) · value`, with `value.tail_bound` relative to the scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledValue {
    pub ln_scale: f64,
    pub value: CertifiedValue,
}

impl ScaledValue {
    pub fn plain(value: CertifiedValue) -> Self {
        Self { ln_scale: 0.0, value }
    }

    /// Collapse to an ordinary value; `None` when it does not fit in an `f64`.
    pub fn to_plain(&self) -> Option<CertifiedValue> {
        if self.ln_scale > LN_F64_MAX {
            return None;
        }
        let s = self.ln_scale.exp();
        Some(CertifiedValue::new(
            self.value.value * s,
            self.value.tail_bound * s * ROUNDING_INFLATION,
            self.value.terms_used,
        ))
    }

    /// `ln |value|`.
    pub fn ln_abs(&self) -> f64 {
        self.ln_scale + self.value.abs().ln()
    }

    /// `ln` of an upper bound on the true modulus.
    pub fn ln_abs_upper(&self) -> f64 {
        self.ln_scale + self.value.abs_upper().ln()
    }

    /// `(ln |value|, arg value)`.
    pub fn log_phase(&self) -> (f64, f64) {
        (self.ln_abs(), self.value.value.arg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self {
            ln_scale: self.ln_scale + other.ln_scale,
            value: self.value.mul(&other.value),
        }
    }

    /// Sum of two scaled values, expressed on the larger scale.
    pub fn add(&self, other: &Self) -> Self {
        let ln_scale = self.ln_scale.max(other.ln_scale);
        let a = self.value.scale(Complex64::new((self.ln_scale - ln_scale).exp(), 0.0));
        let b = other.value.scale(Complex64::new((other.ln_scale - ln_scale).exp(), 0.0));
        Self {
            ln_scale,
            value: a.add(&b),
        }
    }

    /// Multiply by `exp(w)` for complex `w`.
    pub fn mul_exp(&self, w: Complex64) -> Self {
        Self {
            ln_scale: self.ln_scale + w.re,
            value: self.value.scale(Complex64::new(0.0, w.im).exp()),
        }
    }

    pub fn mul_complex(&self, c: Complex64) -> Self {
        Self {
            ln_scale: self.ln_scale,
            value: self.value.scale(c),
        }
    }
}

/// Location of the dominant term: the lattice point `k* = n* + offset`
/// nearest to the real-exponent peak `k0 = −Im z / (π Im t)`.
#[derive(Clone, Copy, Debug)]
struct Center {
    a: f64,
    k_star: f64,
    delta: f64,
    ln_scale: f64,
}

impl Center {
    fn new(kind: ThetaKind, z: Complex64, t: Complex64) -> Self {
        let a = t.im;
        let c = kind.offset();
        let k0 = -z.im / (PI * a);
        let n_star = (k0 - c).round();
        let k_star = n_star + c;
        let delta = k_star - k0;
        // −πA k² − 2 Im(z) k at k*, written as a completed square
        let ln_scale = z.im * z.im / (PI * a) - PI * a * delta * delta;
        Self {
            a,
            k_star,
            delta,
            ln_scale,
        }
    }

    fn term(&self, z: Complex64, t: Complex64, j: i64) -> (f64, Complex64) {
        let jf = j as f64;
        let k = self.k_star + jf;
        let magnitude = (-PI * self.a * (jf * jf + 2.0 * jf * self.delta)).exp();
        let phase = PI * t.re * k * k + 2.0 * z.re * k;
        (k, Complex64::from_polar(magnitude, phase))
    }
}

/// `ln Σ_{|j|≥M} exp(−πA(j² − 2d|j|))`, valid for `M > d`.
fn ln_lattice_tail(a: f64, d: f64, m: i64) -> f64 {
    let mf = m as f64;
    debug_assert!(mf > d);
    let head = -PI * a * (mf * mf - 2.0 * d * mf);
    let ratio = -PI * a * (2.0 * mf - 2.0 * d);
    std::f64::consts::LN_2 + head - (-ratio.exp()).ln_1p()
}

fn half_width_for(a: f64, d: f64, ln_target: f64, ln_prefactor: f64) -> Result<i64, ThetaError> {
    let mut n: i64 = (d.ceil() as i64).max(1);
    loop {
        if ln_prefactor + ln_lattice_tail(a, d, n + 1) <= ln_target {
            return Ok(n);
        }
        if n > MAX_HALF_WIDTH {
            return Err(ThetaError::TooManyTerms);
        }
        n = if n < 64 { n + 1 } else { n + n / 8 };
    }
}

fn summed(q: &ThetaQuery, center: &Center, ln_rel_tol: f64) -> Result<ScaledValue, ThetaError> {
    let n = half_width_for(center.a, 0.5, ln_rel_tol, 0.0)?;
    let mut sum = Complex64::new(0.0, 0.0);
    // add smallest terms first
    for j in (1..=n).rev() {
        sum += center.term(q.z, q.t, j).1 + center.term(q.z, q.t, -j).1;
    }
    sum += center.term(q.z, q.t, 0).1;
    let tail = ln_lattice_tail(center.a, 0.5, n + 1).exp() * ROUNDING_INFLATION;
    Ok(ScaledValue {
        ln_scale: center.ln_scale,
        value: CertifiedValue::new(sum, tail, (2 * n + 1) as usize),
    })
}

/// Certified `ϑ(z, t)` as an ordinary complex number; `tol` is absolute.
pub fn theta_eval(q: &ThetaQuery) -> Result<CertifiedValue, ThetaError> {
    q.validate()?;
    let center = Center::new(q.kind, q.z, q.t);
    if center.ln_scale > LN_F64_MAX {
        return Err(ThetaError::Overflow(center.ln_scale));
    }
    let scaled = summed(q, &center, q.tol.ln() - center.ln_scale)?;
    Ok(scaled.to_plain().expect("scale checked above"))
}

/// Certified `ϑ(z, t)` in scaled form; `tol` is relative to the peak term.
pub fn theta_eval_scaled(q: &ThetaQuery) -> Result<ScaledValue, ThetaError> {
    q.validate()?;
    let center = Center::new(q.kind, q.z, q.t);
    summed(q, &center, q.tol.ln())
}

/// Certified `ϑ(z + dz, t) − ϑ(z, t)` on the scale of `ϑ(z, t)`, summed
/// termwise as `term · expm1(2i·dz·k)` so that small shifts lose no digits.
pub fn theta_shift_diff_scaled(q: &ThetaQuery, dz: Complex64) -> Result<ScaledValue, ThetaError> {
    q.validate()?;
    if !(dz.re.is_finite() && dz.im.is_finite()) {
        return Err(ThetaError::NonFinite);
    }
    let center = Center::new(q.kind, q.z, q.t);
    let a = center.a;
    let ln_tol = q.tol.ln();
    let shifted_d = (center.delta + dz.im / (PI * a)).abs();
    let ln_shift_prefactor = -2.0 * dz.im * center.k_star;
    let n = half_width_for(a, 0.5, ln_tol - std::f64::consts::LN_2, 0.0)?.max(half_width_for(
        a,
        shifted_d,
        ln_tol - std::f64::consts::LN_2,
        ln_shift_prefactor,
    )?);
    let mut sum = Complex64::new(0.0, 0.0);
    for j in (1..=n).rev() {
        for jj in [j, -j] {
            let (k, term) = center.term(q.z, q.t, jj);
            sum += term * crate::numkit::expm1_complex(Complex64::new(0.0, 2.0) * dz * k);
        }
    }
    let (k, term) = center.term(q.z, q.t, 0);
    sum += term * crate::numkit::expm1_complex(Complex64::new(0.0, 2.0) * dz * k);
    let tail = (ln_lattice_tail(a, 0.5, n + 1).exp()
        + (ln_shift_prefactor + ln_lattice_tail(a, shifted_d, n + 1)).exp())
        * ROUNDING_INFLATION;
    Ok(ScaledValue {
        ln_scale: center.ln_scale,
        value: CertifiedValue::new(sum, tail, (2 * n + 1) as usize),
    })
}

/// `ϑ₃(0, iA) − 1 = 2 Σ_{n≥1} exp(−πAn²)` without cancellation.
pub fn theta3_minus_one(a: f64, tol: f64) -> Result<CertifiedValue, ThetaError> {
    if !(a > 0.0) {
        return Err(ThetaError::NonPositiveModulus(a));
    }
    if !(tol > 0.0) {
        return Err(ThetaError::NonPositiveTolerance(tol));
    }
    let mut n: u64 = 1;
    while crate::numkit::gaussian_tail_bound(a, n) > tol {
        n += 1;
        if n as i64 > MAX_HALF_WIDTH {
            return Err(ThetaError::TooManyTerms);
        }
    }
    let sum: f64 = (1..=n).rev().map(|k| 2.0 * (-PI * a * (k * k) as f64).exp()).sum();
    Ok(CertifiedValue::real(sum, crate::numkit::gaussian_tail_bound(a, n), n as usize))
}

fn check_growth_args(a: f64, b: f64) -> Result<(), ThetaError> {
    if !b.is_finite() || !a.is_finite() {
        return Err(ThetaError::NonFinite);
    }
    if !(a > 0.0) {
        return Err(ThetaError::NonPositiveModulus(a));
    }
    Ok(())
}

/// `ln[(1 + 1/√A) exp(B²/(πA))]`.
pub fn growth_ln_rhs(a: f64, b: f64) -> Result<f64, ThetaError> {
    check_growth_args(a, b)?;
    Ok((1.0 + 1.0 / a.sqrt()).ln() + b * b / (PI * a))
}

/// `(1 + 1/√A) exp(B²/(πA))`; `+∞` once it leaves the `f64` range.
pub fn growth_rhs(a: f64, b: f64) -> Result<f64, ThetaError> {
    Ok(growth_ln_rhs(a, b)?.exp())
}

/// Compare `ϑ(iB, iA)` against its Gaussian-peak envelope on log scale.
///
/// Returns `(ln upper bound of ϑ, ln rhs, lower bound of ϑ / scale)`; the
/// inequality holds when the first is ≤ the second and the third is > 0.
pub fn growth_compare(theta: &ScaledValue, a: f64, b: f64) -> Result<(f64, f64, f64), ThetaError> {
    let rhs = growth_ln_rhs(a, b)?;
    Ok((theta.ln_abs_upper(), rhs, theta.value.re_lower()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(kind: ThetaKind, z: Complex64, t: Complex64, tol: f64) -> CertifiedValue {
        theta_eval(&ThetaQuery::new(kind, z, t, tol)).unwrap()
    }

    fn naive(kind: ThetaKind, z: Complex64, t: Complex64, n: i64) -> Complex64 {
        let c = kind.offset();
        (-n..=n)
            .map(|k| {
                let k = k as f64 + c;
                (Complex64::i() * PI * t * k * k + Complex64::new(0.0, 2.0) * z * k).exp()
            })
            .sum()
    }

    #[test]
    fn large_modulus_keeps_only_the_constant_term() {
        let v = eval(ThetaKind::Theta3, Complex64::new(0.0, 0.0), Complex64::new(0.0, 1e6), 1e-15);
        assert!((v.value - 1.0).norm() <= 1e-15);
    }

    #[test]
    fn ratio_at_quarter_period_is_one_plus_sqrt2() {
        let t = Complex64::new(0.0, 0.5);
        let num = eval(ThetaKind::Theta3, Complex64::new(0.0, 0.0), t, 1e-16);
        let den = eval(ThetaKind::Theta3, Complex64::new(PI / 2.0, 0.0), t, 1e-16);
        assert!((num.value / den.value - (1.0 + 2f64.sqrt())).norm() < 1e-12);
    }

    #[test]
    fn theta2_vanishes_at_half_period() {
        let v = eval(ThetaKind::Theta2, Complex64::new(PI / 2.0, 0.0), Complex64::new(0.0, 0.7), 1e-14);
        assert!(v.value.norm() <= 1e-14 + v.tail_bound);
    }

    #[test]
    fn agrees_with_naive_sum_for_moderate_arguments() {
        let cases = [
            (ThetaKind::Theta3, Complex64::new(0.3, 0.7), Complex64::new(0.2, 0.9)),
            (ThetaKind::Theta2, Complex64::new(-1.1, 0.4), Complex64::new(-0.5, 1.3)),
            (ThetaKind::Theta2, Complex64::new(0.0, 2.5), Complex64::new(0.0, 0.4)),
            (ThetaKind::Theta3, Complex64::new(0.0, -3.0), Complex64::new(0.0, 2.0)),
        ];
        for (kind, z, t) in cases {
            let v = eval(kind, z, t, 1e-13);
            let n = naive(kind, z, t, 200);
            assert!((v.value - n).norm() <= 1e-12 * (1.0 + n.norm()), "{kind:?} {z} {t}: {} vs {n}", v.value);
        }
    }

    #[test]
    fn scaled_form_survives_huge_imaginary_argument() {
        let q = ThetaQuery::imaginary(ThetaKind::Theta3, 1e4, 0.5, 1e-14);
        assert!(matches!(theta_eval(&q), Err(ThetaError::Overflow(_))));
        let s = theta_eval_scaled(&q).unwrap();
        let expected = 1e8 / (PI * 0.5);
        assert!((s.ln_scale - expected).abs() <= PI * 0.5 * 0.25 + 1e-6);
        let (ln_mag, phase) = s.log_phase();
        assert!(ln_mag.is_finite() && phase.abs() < 1e-12);
    }

    #[test]
    fn modular_identity_at_zero() {
        for &a in &[0.3, 1.0, 2.7] {
            let lhs = eval(ThetaKind::Theta3, Complex64::new(0.0, 0.0), Complex64::new(0.0, a), 1e-14);
            let rhs = eval(ThetaKind::Theta3, Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0 / a), 1e-14);
            let scaled_rhs = rhs.value / a.sqrt();
            assert!((lhs.value - scaled_rhs).norm() <= 4e-14 + lhs.tail_bound + rhs.tail_bound / a.sqrt());
        }
    }

    #[test]
    fn shift_difference_matches_direct_difference() {
        let t = Complex64::new(0.0, 1.3);
        for kind in [ThetaKind::Theta2, ThetaKind::Theta3] {
            for dz in [Complex64::new(1e-3, 0.0), Complex64::new(0.0, 2e-3), Complex64::new(0.2, -0.1)] {
                let z = Complex64::new(0.4, 0.8);
                let q = ThetaQuery::new(kind, z, t, 1e-15);
                let diff = theta_shift_diff_scaled(&q, dz).unwrap().to_plain().unwrap();
                let direct = eval(kind, z + dz, t, 1e-15).value - eval(kind, z, t, 1e-15).value;
                assert!((diff.value - direct).norm() < 1e-13, "{kind:?} {dz}");
            }
        }
    }

    #[test]
    fn shift_difference_is_relatively_accurate_for_tiny_shifts() {
        let q = ThetaQuery::real_arg(ThetaKind::Theta2, 0.0, 2.0, 1e-16);
        let dz = Complex64::new(1e-12, 0.0);
        let diff = theta_shift_diff_scaled(&q, dz).unwrap().to_plain().unwrap();
        // ϑ₂ is even in z, so the difference is second order: ≈ ½ ϑ₂''(0) dz²
        assert!(diff.value.norm() < 1e-22);
    }

    #[test]
    fn theta3_minus_one_is_accurate_for_large_modulus() {
        let v = theta3_minus_one(20.0, 1e-300).unwrap();
        let expected = 2.0 * (-20.0 * PI).exp();
        assert!((v.re() - expected).abs() <= 1e-15 * expected);
    }

    #[test]
    fn growth_rhs_values() {
        assert_eq!(growth_rhs(1.0, 0.0).unwrap(), 2.0);
        assert_eq!(growth_rhs(4.0, 0.0).unwrap(), 1.5);
        assert!(growth_rhs(0.0, 1.0).is_err());
        assert!(growth_rhs(0.01, 100.0).unwrap().is_infinite());
    }

    #[test]
    fn rejects_invalid_queries() {
        let bad_t = ThetaQuery::new(ThetaKind::Theta3, Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), 1e-10);
        assert!(matches!(theta_eval(&bad_t), Err(ThetaError::NonPositiveModulus(_))));
        let bad_tol = ThetaQuery::real_arg(ThetaKind::Theta3, 0.0, 1.0, 0.0);
        assert!(matches!(theta_eval(&bad_tol), Err(ThetaError::NonPositiveTolerance(_))));
    }
}
