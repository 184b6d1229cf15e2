//! The Gaussian theta frame: parameters `(α, β, t_α)`, the functions `h`,
//! `ĥ`, `H`, `Γ`, `ψₙ`, and quadrature cross-checks.
//!
//! `h(x) = e^{−παx²} e^{πα/4} ϑ₂(πβx/2, iα)` and
//!
//! ```text
//! H(s,t) = ∫ conj h(x) h(x+s) e(xt) dx
//!        = (2α)^{−½} e(−st/2) e^{−παs²/2} e^{−πt²/(2α)} Γ(t/β, s/β)
//! ```

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::diophantine::{mod_inverse, DiophantineError, SquareConvergent};
use crate::numkit::{
    expm1_complex, gaussian_tail_bound, integrate_decaying, unit_phase, BigReal, CertifiedValue, Envelope,
    NumError, QuadratureSettings, ROUNDING_INFLATION,
};
use crate::theta::{theta_eval, theta_eval_scaled, theta_shift_diff_scaled, ScaledValue, ThetaError, ThetaKind, ThetaQuery};

/// Relative accuracy used for lattice evaluations; theta series converge so
/// fast that this costs only a few extra terms.
pub const LATTICE_REL_TOL: f64 = 1e-200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("β = {0} must exceed 2")]
    BetaTooSmall(f64),
    #[error("θ must lie strictly above p/q; use the complement convergent")]
    WrongSide,
    #[error("q = {0} is below 4")]
    QTooSmall(BigInt),
    #[error("{0} exceeds the floating-point range")]
    OutOfRange(&'static str),
    #[error("coefficient box of {0} terms is too large")]
    SupportTooLarge(usize),
    #[error("grid must have at least 256 points, got {0}")]
    GridTooSmall(usize),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Theta(#[from] ThetaError),
    #[error(transparent)]
    Diophantine(#[from] DiophantineError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GaussParams {
    pub alpha: f64,
    pub beta: f64,
    pub beta_sq: f64,
    pub t_alpha: f64,
    /// `β²/2 mod 2`, kept separately so lattice phases survive large β².
    pub half_beta_sq_mod2: f64,
}

impl GaussParams {
    pub fn from_beta(beta: f64) -> Result<Self, FrameError> {
        if !(beta.is_finite() && beta > 2.0) {
            return Err(FrameError::BetaTooSmall(beta));
        }
        let beta_sq = beta * beta;
        Ok(Self::assemble(beta, beta_sq, (beta_sq / 2.0).rem_euclid(2.0)))
    }

    pub fn from_alpha(alpha: f64) -> Result<Self, FrameError> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(FrameError::BetaTooSmall(2.0));
        }
        Self::from_beta(2.0 * (alpha * alpha + 1.0).sqrt())
    }

    /// From an extended-precision `β²`; the reduction mod 2 is done exactly.
    pub fn from_beta_sq(beta_sq: &BigReal) -> Result<Self, FrameError> {
        let bsq = beta_sq.to_f64();
        if !(bsq.is_finite()) {
            return Err(FrameError::OutOfRange("β²"));
        }
        if !(bsq > 4.0) {
            return Err(FrameError::BetaTooSmall(bsq.max(0.0).sqrt()));
        }
        let half = beta_sq.div_int(&BigInt::from(2))?;
        let two = BigInt::from(2);
        let q = half.floor();
        let k = num_integer::Integer::mod_floor(&q, &two);
        let mod2 = half.fract().add(&BigReal::from_bigint(&k, half.precision_bits())).to_f64();
        Ok(Self::assemble(bsq.sqrt(), bsq, mod2))
    }

    fn assemble(beta: f64, beta_sq: f64, half_beta_sq_mod2: f64) -> Self {
        let alpha = (beta_sq / 4.0 - 1.0).sqrt();
        Self {
            alpha,
            beta,
            beta_sq,
            t_alpha: 4.0 * alpha + 2.0 / alpha,
            half_beta_sq_mod2,
        }
    }

    /// Gaussian rate of `H(s, t)` in `t`: `|H| ≲ e^{−πκt²}`.
    pub fn kappa(&self) -> f64 {
        self.alpha / (2.0 * (2.0 * self.alpha * self.alpha + 1.0))
    }

    /// Rate in `n` of the lattice values `H(mβ, nβ)` and of the ψ coefficients.
    pub fn lattice_rate_n(&self) -> f64 {
        self.beta_sq * self.kappa()
    }

    /// Rate in `m` of the lattice values `H(mβ, nβ)`.
    pub fn lattice_rate_m(&self) -> f64 {
        self.alpha * self.beta_sq / 2.0
    }

    /// `K_Γ` with `|Γ(u, v)| ≤ K_Γ e^{B²/(π t_α)}`, `B = πβ²u/(2α)`.
    pub fn gamma_constant(&self) -> Result<f64, FrameError> {
        let a = 2.0 * self.alpha;
        let t2 = theta_eval(&ThetaQuery::real_arg(ThetaKind::Theta2, 0.0, a, 1e-15))?;
        let t3 = theta_eval(&ThetaQuery::real_arg(ThetaKind::Theta3, 0.0, a, 1e-15))?;
        Ok((1.0 + 1.0 / self.t_alpha.sqrt())
            * (PI * self.alpha / 2.0).exp()
            * (t2.re_upper() + t3.re_upper())
            * ROUNDING_INFLATION)
    }

    /// `H₀` with `|h(x)| ≤ H₀ e^{−παx²}`.
    pub fn h_constant(&self) -> Result<f64, FrameError> {
        let t2 = theta_eval(&ThetaQuery::real_arg(ThetaKind::Theta2, 0.0, self.alpha, 1e-15))?;
        Ok((PI * self.alpha / 4.0).exp() * t2.re_upper() * ROUNDING_INFLATION)
    }

    /// Constant with `|ĥ(y)| ≤ Ĥ₀` for all `y` (from the Gaussian-peak bound).
    pub fn h_hat_constant(&self) -> f64 {
        (PI * self.alpha / 4.0).exp() / self.alpha.sqrt() * (1.0 + (2.0 / self.t_alpha).sqrt()) * ROUNDING_INFLATION
    }

    /// `ϑ₃(0, 2iα)`.
    pub fn theta3_at_2ia(&self) -> Result<f64, FrameError> {
        Ok(theta_eval(&ThetaQuery::real_arg(ThetaKind::Theta3, 0.0, 2.0 * self.alpha, 1e-15))?.re())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FrameParams {
    #[serde(serialize_with = "ser_display")]
    pub theta: BigReal,
    pub sc: SquareConvergent,
    #[serde(serialize_with = "ser_display")]
    pub p0: BigInt,
    /// `(θ − p/q)^{1/2}`.
    #[serde(serialize_with = "ser_display")]
    pub a: BigReal,
    /// `1/(qa)`.
    #[serde(serialize_with = "ser_display")]
    pub beta_big: BigReal,
    /// `q(qθ − p)`.
    #[serde(serialize_with = "ser_display")]
    pub trace: BigReal,
    pub gp: GaussParams,
    /// `θ mod 1`, the phase of `e(θ)`.
    pub lambda_phase: f64,
    /// `μ = β² + p₀²/q mod 1`.
    pub mu_mod1: f64,
    /// `βa = 1/q`.
    pub beta_a: f64,
    pub a_f64: f64,
}

fn ser_display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

impl FrameParams {
    pub fn q_f64(&self) -> f64 {
        self.sc.q_f64()
    }
}

/// Builds the frame attached to a square convergent below θ.
pub fn make_frame(theta: &BigReal, sc: &SquareConvergent) -> Result<FrameParams, FrameError> {
    if sc.q < BigInt::from(4) {
        return Err(FrameError::QTooSmall(sc.q.clone()));
    }
    let prec = theta.precision_bits();
    let work = prec + 64;
    let th = theta.with_precision(work);
    let pq = BigReal::from_ratio(&sc.p, &sc.q, work)?;
    let diff = th.sub(&pq);
    if !diff.is_positive() {
        return Err(FrameError::WrongSide);
    }
    let a = diff.sqrt()?;
    let q_big = BigReal::from_bigint(&sc.q, work);
    let beta_big = BigReal::from_i64(1, work).div(&q_big.mul(&a))?;
    // q(qθ − p) without going through a
    let trace = th.mul_int(&sc.q).sub(&BigReal::from_bigint(&sc.p, work)).mul_int(&sc.q);
    let beta_sq = BigReal::from_i64(1, work).div(&trace)?;
    let gp = GaussParams::from_beta_sq(&beta_sq)?;
    let p0 = mod_inverse(&sc.p_root, &sc.q)?;
    let p0_sq_over_q = BigReal::from_ratio(&(&p0 * &p0 % &sc.q), &sc.q, work)?;
    let mu_mod1 = beta_sq.add(&p0_sq_over_q).fract().to_f64();
    let a_f64 = a.to_f64();
    if a_f64 == 0.0 || !a_f64.is_finite() {
        return Err(FrameError::OutOfRange("a"));
    }
    let beta_a = 1.0 / sc.q_f64();
    if beta_a == 0.0 {
        return Err(FrameError::OutOfRange("1/q"));
    }
    Ok(FrameParams {
        theta: theta.clone(),
        sc: sc.clone(),
        p0,
        a: a.with_precision(prec),
        beta_big: beta_big.with_precision(prec),
        trace: trace.with_precision(prec),
        gp,
        lambda_phase: theta.fract().to_f64(),
        mu_mod1,
        beta_a,
        a_f64,
    })
}

/// `h(x)`, real and even.
pub fn h_eval(x: f64, gp: &GaussParams, tol: f64) -> Result<CertifiedValue, FrameError> {
    let ln_pref = -PI * gp.alpha * x * x + PI * gp.alpha / 4.0;
    let theta_tol = (tol * (-ln_pref).exp()).min(1.0);
    let th = theta_eval(&ThetaQuery::real_arg(ThetaKind::Theta2, PI * gp.beta * x / 2.0, gp.alpha, theta_tol))?;
    let v = th.scale(Complex64::new(ln_pref.exp(), 0.0));
    debug_assert!(v.value.im.abs() <= v.tail_bound + 1e-12 * v.value.norm());
    Ok(CertifiedValue::real(v.value.re, v.tail_bound, v.terms_used))
}

/// `ĥ(y) = ∫ h(x) e(−xy) dx`, summed termwise from the Gaussian transform pair:
/// `α^{−½} e^{πα/4} e^{−πy²/α} ϑ₂(−iπβy/(2α), i t_α/2)`.
pub fn h_hat_eval(y: f64, gp: &GaussParams, tol: f64) -> Result<CertifiedValue, FrameError> {
    let ln_pref = PI * gp.alpha / 4.0 - PI * y * y / gp.alpha - 0.5 * gp.alpha.ln();
    let q = ThetaQuery::imaginary(ThetaKind::Theta2, -PI * gp.beta * y / (2.0 * gp.alpha), gp.t_alpha / 2.0, tol);
    let scaled = theta_eval_scaled(&ThetaQuery { tol: 1e-17, ..q })?;
    let v = scaled.mul_exp(Complex64::new(ln_pref, 0.0));
    let plain = v.to_plain().ok_or(FrameError::OutOfRange("ĥ"))?;
    Ok(CertifiedValue::real(plain.value.re, plain.tail_bound, plain.terms_used))
}

/// `ϑ₂(z_v, 2iα) ϑ₃(i b_u, it_α) + ϑ₃(z_v, 2iα) ϑ₂(i b_u, it_α)` times `e^{πα/2}`.
fn gamma_core(zv: f64, bu: f64, gp: &GaussParams, rel_tol: f64) -> Result<ScaledValue, FrameError> {
    let [v2, v3, u2, u3] = gamma_factors(zv, bu, gp, rel_tol)?;
    Ok(v2.mul(&u3).add(&v3.mul(&u2)).mul_exp(Complex64::new(PI * gp.alpha / 2.0, 0.0)))
}

fn gamma_factors(zv: f64, bu: f64, gp: &GaussParams, rel_tol: f64) -> Result<[ScaledValue; 4], FrameError> {
    let a = 2.0 * gp.alpha;
    let v2 = theta_eval_scaled(&ThetaQuery::real_arg(ThetaKind::Theta2, zv, a, rel_tol))?;
    let v3 = theta_eval_scaled(&ThetaQuery::real_arg(ThetaKind::Theta3, zv, a, rel_tol))?;
    let u2 = theta_eval_scaled(&ThetaQuery::imaginary(ThetaKind::Theta2, bu, gp.t_alpha, rel_tol))?;
    let u3 = theta_eval_scaled(&ThetaQuery::imaginary(ThetaKind::Theta3, bu, gp.t_alpha, rel_tol))?;
    Ok([v2, v3, u2, u3])
}

/// `Γ(u, v)` in scaled form.
pub fn gamma_scaled(u: f64, v: f64, gp: &GaussParams, rel_tol: f64) -> Result<ScaledValue, FrameError> {
    gamma_core(
        PI * gp.beta_sq * v / 2.0,
        PI * gp.beta_sq * u / (2.0 * gp.alpha),
        gp,
        rel_tol,
    )
}

/// `Γ(u, v)`, real; errors with `OutOfRange` when it overflows.
pub fn gamma_eval(u: f64, v: f64, gp: &GaussParams, tol: f64) -> Result<CertifiedValue, FrameError> {
    let s = gamma_scaled(u, v, gp, 1e-17)?;
    let rel = (tol * (-s.ln_scale).exp()).clamp(f64::MIN_POSITIVE, 1e-3);
    let s = gamma_scaled(u, v, gp, rel)?;
    let plain = s.to_plain().ok_or(FrameError::OutOfRange("Γ"))?;
    Ok(CertifiedValue::real(plain.value.re, plain.tail_bound, plain.terms_used))
}

/// Right-hand side of the envelope `|Γ(u,v)| ≤ ϑ₃(0,2iα)[2ϑ₃(iB, it_α) + e^{πα/2}ϑ₂(iB, it_α)]`,
/// `B = πβ²u/(2α)`.
pub fn gamma_envelope(u: f64, gp: &GaussParams) -> Result<f64, FrameError> {
    let bu = PI * gp.beta_sq * u / (2.0 * gp.alpha);
    let t3 = gp.theta3_at_2ia()?;
    let u3 = theta_eval(&ThetaQuery::imaginary(ThetaKind::Theta3, bu, gp.t_alpha, 1e-15))?;
    let u2 = theta_eval(&ThetaQuery::imaginary(ThetaKind::Theta2, bu, gp.t_alpha, 1e-15))?;
    Ok(t3 * (2.0 * u3.re() + (PI * gp.alpha / 2.0).exp() * u2.re()))
}

fn scaled_to_plain(s: &ScaledValue, what: &'static str) -> Result<CertifiedValue, FrameError> {
    s.to_plain().ok_or(FrameError::OutOfRange(what))
}

/// `H(s, t)` from the closed form.
#[allow(non_snake_case)]
pub fn H_closed(s: f64, t: f64, gp: &GaussParams, tol: f64) -> Result<CertifiedValue, FrameError> {
    let ln_pref = Complex64::new(
        -0.5 * (2.0 * gp.alpha).ln() - PI * gp.alpha * s * s / 2.0 - PI * t * t / (2.0 * gp.alpha),
        -PI * s * t,
    );
    let g = gamma_core(
        PI * gp.beta * s / 2.0,
        PI * gp.beta * t / (2.0 * gp.alpha),
        gp,
        (tol * 1e-3).min(1e-6),
    )?;
    scaled_to_plain(&g.mul_exp(ln_pref), "H")
}

/// `H(s, t)` by quadrature of its defining integral.
#[allow(non_snake_case)]
pub fn H_quad(s: f64, t: f64, gp: &GaussParams, tol: f64) -> Result<CertifiedValue, FrameError> {
    let h0 = gp.h_constant()?;
    let pt_tol = tol * 1e-3;
    let f = |x: f64| -> Complex64 {
        let a = h_eval(x, gp, pt_tol).map(|v| v.re()).unwrap_or(f64::NAN);
        let b = h_eval(x + s, gp, pt_tol).map(|v| v.re()).unwrap_or(f64::NAN);
        a * b * unit_phase(x * t)
    };
    let mut settings = QuadratureSettings::new(Envelope::new(gp.alpha, h0 * h0), tol);
    settings.pointwise_error = pt_tol * (2.0 * h0 + pt_tol);
    Ok(integrate_decaying(f, settings)?)
}

/// A lattice point `(mβ + σ, nβ + τ)` with small offsets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticePoint {
    pub m: i64,
    pub n: i64,
    pub sigma: f64,
    pub tau: f64,
}

impl LatticePoint {
    pub fn new(m: i64, n: i64) -> Self {
        Self { m, n, sigma: 0.0, tau: 0.0 }
    }
}

/// `ln` of the prefactor of `H` (including the phase) at a lattice point,
/// with `β²mn` reduced exactly.
fn lattice_ln_prefactor(pt: &LatticePoint, gp: &GaussParams) -> Complex64 {
    let (m, n) = (pt.m as f64, pt.n as f64);
    let (b, s, t) = (gp.beta, pt.sigma, pt.tau);
    let s_sq = gp.beta_sq * m * m + 2.0 * m * b * s + s * s;
    let t_sq = gp.beta_sq * n * n + 2.0 * n * b * t + t * t;
    // e(−st/2) with st = β²mn + β(mτ + nσ) + στ
    let lattice = (gp.half_beta_sq_mod2 * (pt.m as f64) * (pt.n as f64)).rem_euclid(1.0);
    let phase = -2.0 * PI * lattice - PI * (b * (m * t + n * s) + s * t);
    Complex64::new(
        -0.5 * (2.0 * gp.alpha).ln() - PI * gp.alpha * s_sq / 2.0 - PI * t_sq / (2.0 * gp.alpha),
        phase,
    )
}

fn lattice_zv(m: i64, sigma: f64, gp: &GaussParams) -> f64 {
    PI * ((gp.half_beta_sq_mod2 * m as f64).rem_euclid(2.0) + gp.beta * sigma / 2.0)
}

fn lattice_bu(n: i64, tau: f64, gp: &GaussParams) -> f64 {
    PI * (gp.beta_sq * n as f64 + gp.beta * tau) / (2.0 * gp.alpha)
}

/// `H(mβ + σ, nβ + τ)` in scaled form.
#[allow(non_snake_case)]
pub fn H_lattice_scaled(pt: &LatticePoint, gp: &GaussParams, rel_tol: f64) -> Result<ScaledValue, FrameError> {
    let g = gamma_core(lattice_zv(pt.m, pt.sigma, gp), lattice_bu(pt.n, pt.tau, gp), gp, rel_tol)?;
    Ok(g.mul_exp(lattice_ln_prefactor(pt, gp)))
}

/// `H(mβ + σ, nβ + τ)`; values too small for an `f64` come back as zero
/// with their (tiny) error bound.
#[allow(non_snake_case)]
pub fn H_lattice(pt: &LatticePoint, gp: &GaussParams) -> Result<CertifiedValue, FrameError> {
    let s = H_lattice_scaled(pt, gp, LATTICE_REL_TOL)?;
    scaled_to_plain(&s, "H")
}

/// Which argument of `H` receives the perturbation `a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Shift {
    /// `H(mβ + a, nβ)`.
    S,
    /// `H(mβ, nβ + a)`.
    T,
}

/// `H` at the shifted lattice point minus `H(mβ, nβ)`, computed as
/// `P[expm1(Δ ln P)·Γ′ + ΔΓ]` so that differences far below the size of `H`
/// are resolved. `beta_a = βa`.
#[allow(non_snake_case)]
pub fn H_lattice_shift_diff(
    m: i64,
    n: i64,
    shift: Shift,
    a: f64,
    beta_a: f64,
    gp: &GaussParams,
) -> Result<CertifiedValue, FrameError> {
    let base = LatticePoint::new(m, n);
    let ln_p = lattice_ln_prefactor(&base, gp);
    let zv = lattice_zv(m, 0.0, gp);
    let bu = lattice_bu(n, 0.0, gp);
    let [v2, v3, u2, u3] = gamma_factors(zv, bu, gp, LATTICE_REL_TOL)?;
    let (mf, nf) = (m as f64, n as f64);
    let (dlog, dgamma) = match shift {
        Shift::S => {
            let dz = Complex64::new(PI * beta_a / 2.0, 0.0);
            let a2 = 2.0 * gp.alpha;
            let d2 = theta_shift_diff_scaled(&ThetaQuery::real_arg(ThetaKind::Theta2, zv, a2, LATTICE_REL_TOL), dz)?;
            let d3 = theta_shift_diff_scaled(&ThetaQuery::real_arg(ThetaKind::Theta3, zv, a2, LATTICE_REL_TOL), dz)?;
            let dlog = Complex64::new(
                -PI * gp.alpha * (2.0 * mf * beta_a + a * a) / 2.0,
                -PI * nf * beta_a,
            );
            (dlog, d2.mul(&u3).add(&d3.mul(&u2)))
        }
        Shift::T => {
            let dz = Complex64::new(0.0, PI * beta_a / (2.0 * gp.alpha));
            let d2 = theta_shift_diff_scaled(
                &ThetaQuery::imaginary(ThetaKind::Theta2, bu, gp.t_alpha, LATTICE_REL_TOL),
                dz,
            )?;
            let d3 = theta_shift_diff_scaled(
                &ThetaQuery::imaginary(ThetaKind::Theta3, bu, gp.t_alpha, LATTICE_REL_TOL),
                dz,
            )?;
            let dlog = Complex64::new(
                -PI * (2.0 * nf * beta_a + a * a) / (2.0 * gp.alpha),
                -PI * mf * beta_a,
            );
            (dlog, v2.mul(&d3).add(&v3.mul(&d2)))
        }
    };
    let e = Complex64::new(PI * gp.alpha / 2.0, 0.0);
    let gamma = v2.mul(&u3).add(&v3.mul(&u2)).mul_exp(e);
    let dgamma = dgamma.mul_exp(e);
    let shifted_gamma = gamma.add(&dgamma);
    let total = shifted_gamma.mul_complex(expm1_complex(dlog)).add(&dgamma).mul_exp(ln_p);
    scaled_to_plain(&total, "ΔH")
}

/// Coefficients of `ψₙ(t) = Σ_m e(β²mn/2) e^{−πβ²m²/(2α)} Γ(m, n) e(mt)`.
#[derive(Clone, Debug, Serialize)]
pub struct PsiSeries {
    pub n: i64,
    pub coeffs: Vec<(i64, Complex64)>,
    /// Bound on the sum of discarded coefficient magnitudes plus evaluation error.
    pub tail: f64,
}

impl PsiSeries {
    pub fn eval(&self, t: f64) -> Complex64 {
        self.coeffs.iter().map(|&(m, c)| c * unit_phase(m as f64 * t)).sum()
    }

    /// `Σ 2π|m||c_m|`, a Lipschitz constant for `ψₙ` and `|ψₙ|`.
    pub fn lipschitz(&self) -> f64 {
        self.coeffs.iter().map(|&(m, c)| 2.0 * PI * (m.abs() as f64) * c.norm()).sum::<f64>() * ROUNDING_INFLATION
    }

    pub fn sup_coefficient_sum(&self) -> f64 {
        self.coeffs.iter().map(|(_, c)| c.norm()).sum::<f64>() + self.tail
    }
}

pub fn psi_series(n: i64, gp: &GaussParams, tol: f64) -> Result<PsiSeries, FrameError> {
    let rate = gp.lattice_rate_n();
    let k = gp.gamma_constant()?;
    let mut big_m: u64 = 0;
    while k * gaussian_tail_bound(rate, big_m) > tol / 2.0 {
        big_m += 1;
    }
    let zv = PI * (gp.half_beta_sq_mod2 * n as f64).rem_euclid(2.0);
    let mut coeffs = Vec::with_capacity(2 * big_m as usize + 1);
    let mut eval_err = 0.0;
    for m in -(big_m as i64)..=(big_m as i64) {
        let mf = m as f64;
        let bu = PI * gp.beta_sq * mf / (2.0 * gp.alpha);
        let g = gamma_core(zv, bu, gp, LATTICE_REL_TOL)?;
        let phase = 2.0 * PI * (gp.half_beta_sq_mod2 * mf * n as f64).rem_euclid(1.0);
        let s = g.mul_exp(Complex64::new(-PI * gp.beta_sq * mf * mf / (2.0 * gp.alpha), phase));
        let c = scaled_to_plain(&s, "ψ coefficient")?;
        eval_err += c.tail_bound;
        coeffs.push((m, c.value));
    }
    Ok(PsiSeries {
        n,
        coeffs,
        tail: (k * gaussian_tail_bound(rate, big_m) + eval_err) * ROUNDING_INFLATION,
    })
}

pub fn psi_eval(n: i64, t: f64, gp: &GaussParams, tol: f64) -> Result<CertifiedValue, FrameError> {
    let s = psi_series(n, gp, tol)?;
    Ok(CertifiedValue::new(s.eval(t), s.tail, s.coeffs.len()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PsiExtrema {
    /// Lower bound for `inf ψ₀` (n = 0) or `inf |ψₙ|`.
    pub inf_bound: f64,
    /// Upper bound for `sup ψ₀` or `sup |ψₙ|`.
    pub sup_bound: f64,
    pub grid_min: f64,
    pub grid_max: f64,
    pub slack: f64,
}

/// Certified extrema over one period from a grid plus Lipschitz slack.
pub fn psi_extrema(n: i64, gp: &GaussParams, grid: usize) -> Result<PsiExtrema, FrameError> {
    psi_extrema_shifted(n, gp, grid, 0.0)
}

/// As [`psi_extrema`] for `t ↦ ψₙ(t − shift)`.
pub fn psi_extrema_shifted(n: i64, gp: &GaussParams, grid: usize, shift: f64) -> Result<PsiExtrema, FrameError> {
    let series = psi_series(n, gp, 1e-14)?;
    extrema_of(&series, grid, shift)
}

pub fn extrema_of(series: &PsiSeries, grid: usize, shift: f64) -> Result<PsiExtrema, FrameError> {
    if grid < 256 {
        return Err(FrameError::GridTooSmall(grid));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for j in 0..grid {
        let t = j as f64 / grid as f64 - shift;
        let v = series.eval(t);
        let x = if series.n == 0 { v.re } else { v.norm() };
        lo = lo.min(x);
        hi = hi.max(x);
    }
    let slack = (series.lipschitz() / (2.0 * grid as f64) + series.tail) * ROUNDING_INFLATION + 4.0 * f64::EPSILON * hi.abs();
    Ok(PsiExtrema {
        inf_bound: (lo - slack).max(if series.n == 0 { f64::NEG_INFINITY } else { 0.0 }),
        sup_bound: hi + slack,
        grid_min: lo,
        grid_max: hi,
        slack,
    })
}

/// Which function stands in for `h` in [`orthogonality_residual_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Window {
    Theta,
    /// `e^{−πx²}`, its own transform; the negative control.
    PlainGaussian,
}

/// `∫ conj h(x) ĥ(x + βm) e(βnx) dx`, which vanishes for every `m, n`.
pub fn orthogonality_residual(m: i64, n: i64, gp: &GaussParams, tol: f64) -> Result<CertifiedValue, FrameError> {
    orthogonality_residual_with(Window::Theta, m, n, gp, tol)
}

pub fn orthogonality_residual_with(
    window: Window,
    m: i64,
    n: i64,
    gp: &GaussParams,
    tol: f64,
) -> Result<CertifiedValue, FrameError> {
    let shift = gp.beta * m as f64;
    let freq = gp.beta * n as f64;
    match window {
        Window::Theta => {
            let (h0, hh0) = (gp.h_constant()?, gp.h_hat_constant());
            let pt_tol = tol * 1e-3;
            let f = |x: f64| -> Complex64 {
                let a = h_eval(x, gp, pt_tol).map(|v| v.re()).unwrap_or(f64::NAN);
                let b = h_hat_eval(x + shift, gp, pt_tol).map(|v| v.re()).unwrap_or(f64::NAN);
                a * b * unit_phase(freq * x)
            };
            let mut settings = QuadratureSettings::new(Envelope::new(gp.alpha, h0 * hh0), tol);
            settings.pointwise_error = pt_tol * (h0 + hh0 + pt_tol);
            Ok(integrate_decaying(f, settings)?)
        }
        Window::PlainGaussian => {
            let f = |x: f64| (-PI * (x * x + (x + shift).powi(2))).exp() * unit_phase(freq * x);
            Ok(integrate_decaying(f, QuadratureSettings::new(Envelope::new(1.0, 1.0), tol))?)
        }
    }
}

/// `q` as a big integer convenience for tests and reports.
pub fn q_of(frame: &FrameParams) -> BigInt {
    frame.sc.q.clone()
}

/// `β·q·a − 1`, which vanishes by definition.
pub fn definitional_residual(frame: &FrameParams) -> f64 {
    let q = BigReal::from_bigint(&frame.sc.q, frame.a.precision_bits());
    frame.beta_big.mul(&q).mul(&frame.a).sub(&BigReal::from_i64(1, frame.a.precision_bits())).to_f64()
}

/// `β² − 4α² − 4` in floating point.
pub fn coupling_residual(gp: &GaussParams) -> f64 {
    gp.beta_sq - 4.0 * gp.alpha * gp.alpha - 4.0
}

/// Whether `β > √q`.
pub fn beta_exceeds_sqrt_q(frame: &FrameParams) -> bool {
    let prec = frame.beta_big.precision_bits();
    let b2 = frame.beta_big.square();
    b2.cmp_value(&BigReal::from_bigint(&frame.sc.q, prec)).is_gt()
}
