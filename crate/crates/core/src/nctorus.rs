//! Twisted polynomials over two unitaries `g₁, g₂` with `g₁g₂ = e(φ) g₂g₁`.
//!
//! An element is stored by its coefficients on the lattice unitaries
//! `π_(m,n) = g₂ⁿ g₁ᵐ`, which multiply as `π_u π_v = e(φ u₁ v₂) π_{u+v}`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::frame::FrameParams;
use crate::numkit::{unit_phase, BigReal, ROUNDING_INFLATION};

pub const PRUNE_FLOOR: f64 = 1e-18;
const TWIST_MATCH: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NcError {
    #[error("twists differ: {0} vs {1}")]
    TwistMismatch(f64, f64),
    #[error("moduli differ: {0:?} vs {1:?}")]
    ModulusMismatch(Option<u64>, Option<u64>),
    #[error("matrix is not Hermitian within {0}")]
    NotHermitian(f64),
    #[error("eigenvalue {0} is below −tol")]
    NegativeEigenvalue(f64),
    #[error("representation size must be at least 2")]
    RepresentationTooSmall,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwistedPoly {
    twist: f64,
    modulus: Option<u64>,
    coeffs: BTreeMap<(i64, i64), Complex64>,
    /// `ℓ¹` mass removed by pruning; added to every norm bound.
    discarded: f64,
}

fn wrap(twist: f64) -> f64 {
    let t = twist.rem_euclid(1.0);
    if t >= 1.0 {
        0.0
    } else {
        t
    }
}

impl TwistedPoly {
    pub fn new(twist: f64, modulus: Option<u64>) -> Self {
        Self {
            twist: wrap(twist),
            modulus,
            coeffs: BTreeMap::new(),
            discarded: 0.0,
        }
    }

    pub fn unit(twist: f64, modulus: Option<u64>) -> Self {
        Self::monomial(twist, modulus, 0, 0, Complex64::new(1.0, 0.0))
    }

    pub fn monomial(twist: f64, modulus: Option<u64>, m: i64, n: i64, c: Complex64) -> Self {
        let mut p = Self::new(twist, modulus);
        p.add_term(m, n, c);
        p
    }

    /// `g₁`.
    pub fn g1(twist: f64, modulus: Option<u64>) -> Self {
        Self::monomial(twist, modulus, 1, 0, Complex64::new(1.0, 0.0))
    }

    /// `g₂`.
    pub fn g2(twist: f64, modulus: Option<u64>) -> Self {
        Self::monomial(twist, modulus, 0, 1, Complex64::new(1.0, 0.0))
    }

    /// Build from coefficients of the ordered monomials `g₁ᵐ g₂ⁿ`.
    pub fn from_ordered<I>(twist: f64, modulus: Option<u64>, terms: I) -> Self
    where
        I: IntoIterator<Item = ((i64, i64), Complex64)>,
    {
        let mut p = Self::new(twist, modulus);
        for ((m, n), c) in terms {
            p.add_term(m, n, c * ordered_phase(p.twist, m, n));
        }
        p
    }

    pub fn twist(&self) -> f64 {
        self.twist
    }

    pub fn modulus(&self) -> Option<u64> {
        self.modulus
    }

    pub fn discarded(&self) -> f64 {
        self.discarded
    }

    pub fn add_discarded(&mut self, mass: f64) {
        self.discarded += mass;
    }

    pub fn coeffs(&self) -> &BTreeMap<(i64, i64), Complex64> {
        &self.coeffs
    }

    pub fn get(&self, m: i64, n: i64) -> Complex64 {
        let key = self.reduce(m, n);
        self.coeffs.get(&key).copied().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn reduce(&self, m: i64, n: i64) -> (i64, i64) {
        match self.modulus {
            Some(q) => (m.rem_euclid(q as i64), n.rem_euclid(q as i64)),
            None => (m, n),
        }
    }

    pub fn add_term(&mut self, m: i64, n: i64, c: Complex64) {
        let key = self.reduce(m, n);
        *self.coeffs.entry(key).or_default() += c;
    }

    /// Drop coefficients below `floor`, recording their mass.
    pub fn prune(&mut self, floor: f64) {
        let mut removed = 0.0;
        self.coeffs.retain(|_, c| {
            let keep = c.norm() >= floor;
            if !keep {
                removed += c.norm();
            }
            keep
        });
        self.discarded += removed;
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        for c in out.coeffs.values_mut() {
            *c *= s;
        }
        out.discarded *= s.norm();
        out
    }

    fn check_compatible(&self, other: &Self) -> Result<(), NcError> {
        let d = (self.twist - other.twist).abs();
        if d.min(1.0 - d) > TWIST_MATCH {
            return Err(NcError::TwistMismatch(self.twist, other.twist));
        }
        if self.modulus != other.modulus {
            return Err(NcError::ModulusMismatch(self.modulus, other.modulus));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, NcError> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (&(m, n), &c) in &other.coeffs {
            out.add_term(m, n, c);
        }
        out.discarded += other.discarded;
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, NcError> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Largest coefficient difference, for approximate equality.
    pub fn max_coeff_diff(&self, other: &Self) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, c) in &self.coeffs {
            worst = worst.max((c - other.coeffs.get(k).copied().unwrap_or_default()).norm());
        }
        for (k, c) in &other.coeffs {
            if !self.coeffs.contains_key(k) {
                worst = worst.max(c.norm());
            }
        }
        worst
    }
}

/// `e(φmn)`: the factor turning a coefficient of `g₁ᵐ g₂ⁿ` into one of `π_(m,n)`.
pub fn ordered_phase(twist: f64, m: i64, n: i64) -> Complex64 {
    unit_phase(twist * (m as f64) * (n as f64))
}

/// Twisted convolution.
pub fn tp_mul(x: &TwistedPoly, y: &TwistedPoly) -> Result<TwistedPoly, NcError> {
    x.check_compatible(y)?;
    let mut out = TwistedPoly::new(x.twist, x.modulus);
    for (&(m1, n1), &a) in &x.coeffs {
        for (&(m2, n2), &b) in &y.coeffs {
            out.add_term(m1 + m2, n1 + n2, a * b * unit_phase(x.twist * (m1 as f64) * (n2 as f64)));
        }
    }
    out.discarded = x.discarded * (tp_l1_exact(y) + y.discarded) + tp_l1_exact(x) * y.discarded;
    Ok(out)
}

/// `π_w* = e(φ w₁w₂) π_{−w}`.
pub fn tp_adjoint(x: &TwistedPoly) -> TwistedPoly {
    let mut out = TwistedPoly::new(x.twist, x.modulus);
    for (&(m, n), &c) in &x.coeffs {
        out.add_term(-m, -n, c.conj() * unit_phase(x.twist * (m as f64) * (n as f64)));
    }
    out.discarded = x.discarded;
    out
}

fn tp_l1_exact(x: &TwistedPoly) -> f64 {
    x.coeffs.values().map(|c| c.norm()).sum()
}

/// `Σ |coefficients|` plus pruned mass; bounds the operator norm.
pub fn tp_l1(x: &TwistedPoly) -> f64 {
    (tp_l1_exact(x) + x.discarded) * ROUNDING_INFLATION
}

/// `σ(π_w) = e(−φ w₁w₂) π_{Rw}` with `R(m, n) = (−n, m)`.
pub fn tp_fourier(x: &TwistedPoly) -> TwistedPoly {
    let mut out = TwistedPoly::new(x.twist, x.modulus);
    for (&(m, n), &c) in &x.coeffs {
        out.add_term(-n, m, c * unit_phase(-x.twist * (m as f64) * (n as f64)));
    }
    out.discarded = x.discarded;
    out
}

/// The flip `g_j ↦ g_j⁻¹`, taken as `σ²`; on lattice unitaries it is
/// `π_w ↦ π_{−w}` with no phase.
pub fn tp_flip(x: &TwistedPoly) -> TwistedPoly {
    let mut out = TwistedPoly::new(x.twist, x.modulus);
    for (&(m, n), &c) in &x.coeffs {
        out.add_term(-m, -n, c);
    }
    out.discarded = x.discarded;
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormReport {
    pub l1: f64,
    /// Heuristic; from a finite rational-angle representation.
    pub matrix_estimate: Option<f64>,
    pub matrix_modulus_used: Option<u64>,
    pub discarded: f64,
}

pub fn norm_report(x: &TwistedPoly, rep_modulus: Option<u64>) -> Result<NormReport, NcError> {
    let matrix_estimate = match rep_modulus {
        Some(n) => Some(clock_shift_norm(x, n)?),
        None => None,
    };
    Ok(NormReport {
        l1: tp_l1(x),
        matrix_estimate,
        matrix_modulus_used: rep_modulus,
        discarded: x.discarded,
    })
}

/// Image of `x` under `g₁ ↦ diag(ωʲᵏ)`, `g₂ ↦ shift`, `ω = e(1/N)`, with the
/// twist rounded to `k/N`.
pub fn clock_shift_matrix(x: &TwistedPoly, rep_modulus: u64) -> Result<DMatrix<Complex64>, NcError> {
    if rep_modulus < 2 {
        return Err(NcError::RepresentationTooSmall);
    }
    let size = rep_modulus as usize;
    let k = (x.twist * rep_modulus as f64).round() as i64;
    let nn = rep_modulus as i64;
    let mut mat = DMatrix::<Complex64>::zeros(size, size);
    for (&(m, n), &c) in &x.coeffs {
        // S^n C^m e_j = ω^{kmj} e_{j+n}
        for j in 0..nn {
            let phase = ((k * m).rem_euclid(nn) * j).rem_euclid(nn) as f64 / nn as f64;
            let row = (j + n).rem_euclid(nn) as usize;
            mat[(row, j as usize)] += c * unit_phase(phase);
        }
    }
    Ok(mat)
}

/// Largest singular value of [`clock_shift_matrix`] by power iteration on
/// the Gram matrix.
pub fn clock_shift_norm(x: &TwistedPoly, rep_modulus: u64) -> Result<f64, NcError> {
    let mat = clock_shift_matrix(x, rep_modulus)?;
    Ok(largest_singular_value(&mat, 1e-10))
}

pub fn largest_singular_value(mat: &DMatrix<Complex64>, tol: f64) -> f64 {
    let gram = mat.adjoint() * mat;
    let n = gram.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut v = DVector::<Complex64>::from_fn(n, |i, _| Complex64::new(1.0 + 0.1 * i as f64, 0.05 * (i % 7) as f64));
    v /= Complex64::new(v.norm(), 0.0);
    let mut lambda = 0.0;
    for _ in 0..100_000 {
        let w = &gram * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm;
        v = w / Complex64::new(norm, 0.0);
        if (next - lambda).abs() <= 1e-2 * tol * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.sqrt()
}

fn hermitian_eigen(mat: &DMatrix<Complex64>, tol: f64) -> Result<nalgebra::SymmetricEigen<Complex64, nalgebra::Dyn>, NcError> {
    let skew = (mat - mat.adjoint()).norm();
    if skew > tol {
        return Err(NcError::NotHermitian(tol));
    }
    let sym = (mat + mat.adjoint()) * Complex64::new(0.5, 0.0);
    Ok(sym.symmetric_eigen())
}

/// Hermitian positive square root via the eigendecomposition.
pub fn psd_sqrt(mat: &DMatrix<Complex64>, tol: f64) -> Result<DMatrix<Complex64>, NcError> {
    hermitian_function(mat, tol, |l| l.sqrt())
}

/// `f(mat)` for Hermitian PSD `mat`.
pub fn hermitian_function<F: Fn(f64) -> f64>(mat: &DMatrix<Complex64>, tol: f64, f: F) -> Result<DMatrix<Complex64>, NcError> {
    let eig = hermitian_eigen(mat, tol)?;
    if let Some(&l) = eig.eigenvalues.iter().find(|&&l| l < -tol) {
        return Err(NcError::NegativeEigenvalue(l));
    }
    let d = DMatrix::<Complex64>::from_diagonal(&eig.eigenvalues.map(|l| Complex64::new(f(l.max(0.0)), 0.0)));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.adjoint())
}

/// Operator norm of a Hermitian matrix.
pub fn hermitian_norm(mat: &DMatrix<Complex64>) -> f64 {
    let sym = (mat + mat.adjoint()) * Complex64::new(0.5, 0.0);
    sym.symmetric_eigen().eigenvalues.iter().fold(0.0f64, |a, l| a.max(l.abs()))
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn hermitian_min_eigenvalue(mat: &DMatrix<Complex64>) -> f64 {
    let sym = (mat + mat.adjoint()) * Complex64::new(0.5, 0.0);
    sym.symmetric_eigen().eigenvalues.iter().fold(f64::INFINITY, |a, &l| a.min(l))
}

/// A point `(s, k₁, k₂; t, l₁, l₂)` of `G = M × M̂`, `M = ℝ × ℤ_q × ℤ_q`.
#[derive(Clone, Debug, PartialEq)]
pub struct HeisenbergPoint {
    pub s: BigReal,
    pub k: [BigInt; 2],
    pub t: BigReal,
    pub l: [BigInt; 2],
}

impl HeisenbergPoint {
    pub fn scaled_sum(terms: &[(i64, &HeisenbergPoint)], precision_bits: u32) -> Self {
        let mut out = HeisenbergPoint {
            s: BigReal::zero(precision_bits),
            k: [BigInt::zero(), BigInt::zero()],
            t: BigReal::zero(precision_bits),
            l: [BigInt::zero(), BigInt::zero()],
        };
        for (c, p) in terms {
            let c_big = BigInt::from(*c);
            out.s = out.s.add(&p.s.mul_int(&c_big));
            out.t = out.t.add(&p.t.mul_int(&c_big));
            for i in 0..2 {
                out.k[i] += &c_big * &p.k[i];
                out.l[i] += &c_big * &p.l[i];
            }
        }
        out
    }
}

/// Phase of `⟨m_x, s_y⟩ = e(s_x t_y + (k_x · l_y)/q)`, in `[0, 1)`.
fn pairing_phase(x: &HeisenbergPoint, y: &HeisenbergPoint, q: &BigInt) -> BigReal {
    let prec = x.s.precision_bits();
    let real = x.s.mul(&y.t);
    let int = (&x.k[0] * &y.l[0] + &x.k[1] * &y.l[1]).mod_floor(q);
    real.add(&BigReal::from_ratio(&int, q, prec + 64).expect("q > 0")).fract()
}

/// Phase of `𝔥(x,y) conj 𝔥(y,x)` in `(−½, ½]`.
pub fn commutation_phase(x: &HeisenbergPoint, y: &HeisenbergPoint, q: &BigInt) -> f64 {
    let d = pairing_phase(x, y, q).sub(&pairing_phase(y, x, q)).fract().to_f64();
    if d > 0.5 {
        d - 1.0
    } else {
        d
    }
}

fn signed_mod1(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r > 0.5 {
        r - 1.0
    } else {
        r
    }
}

/// Bases of `D` (`ε₁, ε₂`) and `D^⊥` (`δ₁ … δ₄`).
pub fn lattice_bases(frame: &FrameParams) -> ([HeisenbergPoint; 2], [HeisenbergPoint; 4]) {
    let prec = frame.a.precision_bits();
    let zero = || BigReal::zero(prec);
    let zi = BigInt::zero;
    let pr = frame.sc.p_root.clone();
    let mp0 = -frame.p0.clone();
    let one = BigInt::from(1);
    let eps1 = HeisenbergPoint { s: frame.a.clone(), k: [pr.clone(), zi()], t: zero(), l: [zi(), zi()] };
    let eps2 = HeisenbergPoint { s: zero(), k: [zi(), zi()], t: frame.a.clone(), l: [pr, zi()] };
    let d1 = HeisenbergPoint { s: frame.beta_big.clone(), k: [mp0.clone(), zi()], t: zero(), l: [zi(), zi()] };
    let d2 = HeisenbergPoint { s: zero(), k: [zi(), zi()], t: frame.beta_big.clone(), l: [mp0, zi()] };
    let d3 = HeisenbergPoint { s: zero(), k: [zi(), one.clone()], t: zero(), l: [zi(), zi()] };
    let d4 = HeisenbergPoint { s: zero(), k: [zi(), zi()], t: zero(), l: [zi(), one] };
    ([eps1, eps2], [d1, d2, d3, d4])
}

/// Commutation phases of the lattice generators, each compared with its
/// expected value; every `*_error` should vanish.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CommutationReport {
    /// Phase of `𝔥𝔥̄*(ε₁, ε₂)`, expected `θ`.
    pub d_phase: f64,
    pub d_error: f64,
    /// Largest `|phase|` of `𝔥𝔥̄*(εᵢ, δⱼ)`, expected 0 (annihilation).
    pub annihilation_error: f64,
    /// `(δ₁, δ₂)` against `μ`.
    pub mu_error: f64,
    /// `(δ₃, δ₄)` against `1/q`.
    pub inv_q_error: f64,
    /// Largest phase among pairs from `{δ₁, δ₂}` × `{δ₃, δ₄}`, expected 0.
    pub cross_error: f64,
    /// Phase for the combinations behind `W₁, W₂`, expected `β²`.
    pub w_error: f64,
}

pub fn commutation_report(frame: &FrameParams) -> CommutationReport {
    let q = &frame.sc.q;
    let prec = frame.a.precision_bits();
    let ([e1, e2], d) = lattice_bases(frame);
    let d_phase = commutation_phase(&e1, &e2, q);
    let d_error = signed_mod1(d_phase - frame.lambda_phase).abs();
    let mut annihilation_error: f64 = 0.0;
    for e in [&e1, &e2] {
        for dj in &d {
            annihilation_error = annihilation_error.max(commutation_phase(e, dj, q).abs());
        }
    }
    let mu_error = signed_mod1(commutation_phase(&d[0], &d[1], q) - frame.mu_mod1).abs();
    let q_inv = 1.0 / frame.q_f64();
    let inv_q_error = signed_mod1(commutation_phase(&d[2], &d[3], q) - q_inv).abs();
    let mut cross_error: f64 = 0.0;
    for i in 0..2 {
        for j in 2..4 {
            cross_error = cross_error.max(commutation_phase(&d[i], &d[j], q).abs());
        }
    }
    // W₁ = V₁V₃^{−p₀}, W₂ = V₂V₄^{p₀} with V_j = π_{−δ_j}
    let p0 = frame.p0.to_i64();
    let w_error = match p0 {
        Some(p0) => {
            let w1 = HeisenbergPoint::scaled_sum(&[(-1, &d[0]), (p0, &d[2])], prec);
            let w2 = HeisenbergPoint::scaled_sum(&[(-1, &d[1]), (-p0, &d[3])], prec);
            let beta_sq_mod1 = (2.0 * frame.gp.half_beta_sq_mod2).rem_euclid(1.0);
            signed_mod1(commutation_phase(&w1, &w2, q) - beta_sq_mod1).abs()
        }
        None => {
            // the same identity, assembled from the pairwise phases
            let beta_sq_mod1 = (2.0 * frame.gp.half_beta_sq_mod2).rem_euclid(1.0);
            let p0_sq = (&frame.p0 * &frame.p0).mod_floor(q);
            let p0_term = BigReal::from_ratio(&p0_sq, q, prec).expect("q > 0").to_f64();
            signed_mod1(frame.mu_mod1 - p0_term - beta_sq_mod1).abs()
        }
    };
    CommutationReport {
        d_phase,
        d_error,
        annihilation_error,
        mu_error,
        inv_q_error,
        cross_error,
        w_error,
    }
}
