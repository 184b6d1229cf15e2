//! Estimate engine: the elements `b`, `X`, `Y` and `⟨f,f⟩_D` as twisted
//! polynomials, and every norm bound built from them.

use std::f64::consts::{PI, SQRT_2};

use num_bigint::BigInt;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::frame::{
    extrema_of, psi_series, FrameError, FrameParams, GaussParams, H_closed, H_lattice, H_lattice_shift_diff,
    LatticePoint, PsiExtrema, Shift,
};
use crate::nctorus::{tp_l1, TwistedPoly, PRUNE_FLOOR};
use crate::numkit::{
    gaussian_moment_tail_bound, gaussian_sum_bound, gaussian_tail_bound, shifted_gaussian_tail_bound, BigReal,
    ROUNDING_INFLATION,
};
use crate::theta::{theta3_minus_one, theta_eval, theta_eval_scaled, ThetaKind, ThetaQuery};

/// Largest coefficient box accepted for `⟨f,f⟩_D`.
pub const MAX_BOX_TERMS: usize = 4_000_000;
/// Grid used for the extrema of `ψ₀` in the spectral window.
pub const WINDOW_GRID: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Perturbation {
    /// `X = √(2α) Σ H(mβ + a, nβ) W₁ᵐ W₂ⁿ`.
    X,
    /// `Y = √(2α) Σ H(mβ, nβ + a) W₁ᵐ W₂ⁿ`.
    Y,
}

impl Perturbation {
    fn shift(self) -> Shift {
        match self {
            Perturbation::X => Shift::S,
            Perturbation::Y => Shift::T,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Generator {
    U1,
    U2,
}

/// A twisted polynomial with its truncation box and certified tail.
#[derive(Clone, Debug, Serialize)]
pub struct BuiltPoly {
    pub poly: TwistedPoly,
    /// `ℓ¹` mass outside the box (already included in `poly.discarded()`).
    pub truncation: f64,
    pub box_m: i64,
    pub box_n: i64,
}

/// `frac(β²)`, the twist of `W₁W₂ = e(β²) W₂W₁`.
pub fn b_twist(gp: &GaussParams) -> f64 {
    (2.0 * gp.half_beta_sq_mod2).rem_euclid(1.0)
}

struct LatticeBox {
    m: i64,
    n: i64,
    tail: f64,
}

/// Smallest box with `K·Σ_{outside} e^{−π(r_m m² + r_n n²)} ≤ budget`.
fn lattice_box(rate_m: f64, rate_n: f64, k: f64, budget: f64, shift_m: bool, shift_n: bool) -> LatticeBox {
    let tail = |rate: f64, n: u64, shifted: bool| {
        if shifted {
            shifted_gaussian_tail_bound(rate, n)
        } else {
            gaussian_tail_bound(rate, n)
        }
    };
    let (sm, sn) = (gaussian_sum_bound(rate_m), gaussian_sum_bound(rate_n));
    let mut m = 0u64;
    while k * tail(rate_m, m, shift_m) * sn > budget / 2.0 {
        m += 1;
    }
    let mut n = 0u64;
    while k * tail(rate_n, n, shift_n) * sm > budget / 2.0 {
        n += 1;
    }
    LatticeBox {
        m: m as i64,
        n: n as i64,
        tail: k * (tail(rate_m, m, shift_m) * sn + sm * tail(rate_n, n, shift_n)) * ROUNDING_INFLATION,
    }
}

fn finish(mut poly: TwistedPoly, eval_err: f64, bx: &LatticeBox) -> BuiltPoly {
    poly.prune(PRUNE_FLOOR);
    poly.add_discarded(eval_err + bx.tail);
    BuiltPoly {
        poly,
        truncation: bx.tail,
        box_m: bx.m,
        box_n: bx.n,
    }
}

fn lattice_poly<F>(gp: &GaussParams, twist: f64, bx: &LatticeBox, coeff: F) -> Result<(TwistedPoly, f64), FrameError>
where
    F: Fn(i64, i64) -> Result<(Complex64, f64), FrameError> + Sync,
{
    let rows: Vec<Result<Vec<((i64, i64), Complex64, f64)>, FrameError>> = (-bx.m..=bx.m)
        .into_par_iter()
        .map(|m| {
            (-bx.n..=bx.n)
                .map(|n| coeff(m, n).map(|(c, e)| ((m, n), c, e)))
                .collect()
        })
        .collect();
    let _ = gp;
    let mut poly = TwistedPoly::new(twist, None);
    let mut err = 0.0;
    for row in rows {
        for ((m, n), c, e) in row? {
            poly.add_term(m, n, c * crate::nctorus::ordered_phase(twist, m, n));
            err += e;
        }
    }
    Ok((poly, err))
}

/// `b = √(2α) Σ H(n₁β, n₂β) W₁^{n₁} W₂^{n₂}` with twist `frac(β²)`.
pub fn build_b(frame: &FrameParams, tol: f64) -> Result<BuiltPoly, FrameError> {
    build_b_from(&frame.gp, tol)
}

pub fn build_b_from(gp: &GaussParams, tol: f64) -> Result<BuiltPoly, FrameError> {
    let k = gp.gamma_constant()?;
    let bx = lattice_box(gp.lattice_rate_m(), gp.lattice_rate_n(), k, tol / 10.0, false, false);
    let scale = (2.0 * gp.alpha).sqrt();
    let (poly, err) = lattice_poly(gp, b_twist(gp), &bx, |m, n| {
        let h = H_lattice(&LatticePoint::new(m, n), gp)?;
        Ok((h.value * scale, h.tail_bound * scale))
    })?;
    Ok(finish(poly, err, &bx))
}

fn perturbed_box(gp: &GaussParams, which: Perturbation, tol: f64) -> Result<LatticeBox, FrameError> {
    let k = gp.gamma_constant()?;
    let (sm, sn) = match which {
        Perturbation::X => (true, false),
        Perturbation::Y => (false, true),
    };
    let plain = lattice_box(gp.lattice_rate_m(), gp.lattice_rate_n(), k, tol / 20.0, false, false);
    let shifted = lattice_box(gp.lattice_rate_m(), gp.lattice_rate_n(), k, tol / 20.0, sm, sn);
    Ok(LatticeBox {
        m: plain.m.max(shifted.m),
        n: plain.n.max(shifted.n),
        tail: plain.tail + shifted.tail,
    })
}

/// `X` or `Y`.
pub fn build_perturbed(frame: &FrameParams, which: Perturbation, tol: f64) -> Result<BuiltPoly, FrameError> {
    build_perturbed_from(&frame.gp, frame.a_f64, which, tol)
}

pub fn build_perturbed_from(gp: &GaussParams, a: f64, which: Perturbation, tol: f64) -> Result<BuiltPoly, FrameError> {
    let bx = perturbed_box(gp, which, tol)?;
    let scale = (2.0 * gp.alpha).sqrt();
    let (poly, err) = lattice_poly(gp, b_twist(gp), &bx, |m, n| {
        let mut pt = LatticePoint::new(m, n);
        match which {
            Perturbation::X => pt.sigma = a,
            Perturbation::Y => pt.tau = a,
        }
        let h = H_lattice(&pt, gp)?;
        Ok((h.value * scale, h.tail_bound * scale))
    })?;
    Ok(finish(poly, err, &bx))
}

/// `X − b` or `Y − b`, each coefficient computed as a difference directly.
pub fn perturbed_minus_b(frame: &FrameParams, which: Perturbation, tol: f64) -> Result<BuiltPoly, FrameError> {
    perturbed_minus_b_from(&frame.gp, frame.a_f64, frame.beta_a, which, tol)
}

pub fn perturbed_minus_b_from(
    gp: &GaussParams,
    a: f64,
    beta_a: f64,
    which: Perturbation,
    tol: f64,
) -> Result<BuiltPoly, FrameError> {
    let bx = perturbed_box(gp, which, tol)?;
    let scale = (2.0 * gp.alpha).sqrt();
    let (poly, err) = lattice_poly(gp, b_twist(gp), &bx, |m, n| {
        let d = H_lattice_shift_diff(m, n, which.shift(), a, beta_a, gp)?;
        Ok((d.value * scale, d.tail_bound * scale))
    })?;
    Ok(finish(poly, err, &bx))
}

/// `C_q = 3[ϑ₃(0, iαβ²/2) − 1]`, with its natural logarithm (the value
/// itself underflows for large β and is then reported as `f64::MIN_POSITIVE`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CqValue {
    pub value: f64,
    pub ln_value: f64,
}

pub fn c_q(frame: &FrameParams) -> Result<CqValue, FrameError> {
    c_q_from(&frame.gp)
}

pub fn c_q_from(gp: &GaussParams) -> Result<CqValue, FrameError> {
    let a = gp.alpha * gp.beta_sq / 2.0;
    // ϑ₃(0, iA) − 1 = 2e^{−πA}(1 + Σ_{n≥2} e^{−πA(n²−1)})
    let rest = theta3_minus_one(a, 1e-300)?;
    let ln_value = if a < 100.0 {
        (3.0 * rest.re()).ln()
    } else {
        let correction: f64 = (2..6).map(|n: i64| (-PI * a * ((n * n - 1) as f64)).exp()).sum();
        (6.0f64).ln() - PI * a + correction.ln_1p()
    };
    Ok(CqValue {
        // rounded up rather than flushed to zero
        value: (3.0 * rest.re()).max(f64::MIN_POSITIVE),
        ln_value,
    })
}

/// `6e^{−παβ²/2}`, the leading term of `C_q`.
pub fn c_q_leading(gp: &GaussParams) -> f64 {
    6.0 * (-PI * gp.alpha * gp.beta_sq / 2.0).exp()
}

/// Spectrum enclosure for `b` from its `ψ₀(W₂)` part and the rest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralWindow {
    pub psi0: PsiExtrema,
    /// `ℓ¹` mass of the rows `n₁ ≠ 0` of `b`, plus pruned and truncated mass.
    pub delta_rows_l1: f64,
    /// `Σ_{m≠0} e^{−παβ²m²/2} sup|ψ_m|`, with tail.
    pub delta_psi: f64,
    /// `min` of the two, the bound used for `‖b − ψ₀(W₂)‖`.
    pub delta: f64,
    pub lo: f64,
    pub hi: f64,
}

impl SpectralWindow {
    fn endpoint_max<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        f(self.lo).abs().max(f(self.hi).abs()) * ROUNDING_INFLATION
    }

    pub fn b_norm(&self) -> f64 {
        self.hi
    }

    pub fn b_inv_norm(&self) -> f64 {
        1.0 / self.lo * ROUNDING_INFLATION
    }

    pub fn b_invhalf_norm(&self) -> f64 {
        1.0 / self.lo.sqrt() * ROUNDING_INFLATION
    }

    /// `‖b^{½} − 2^{½}‖` by spectral mapping (monotone, so endpoints suffice).
    pub fn b_half_minus_sqrt2(&self) -> f64 {
        self.endpoint_max(|l| l.sqrt() - SQRT_2)
    }

    pub fn b_invhalf_minus_invsqrt2(&self) -> f64 {
        self.endpoint_max(|l| 1.0 / l.sqrt() - 1.0 / SQRT_2)
    }

    pub fn b_minus_2(&self) -> f64 {
        self.endpoint_max(|l| l - 2.0)
    }

    /// `‖b‖(‖b^{−½}‖ + 2^{−½})‖b^{−½} − 2^{−½}‖`, bounding `‖e − ½⟨f,f⟩_D‖`.
    pub fn e_approx_error(&self) -> f64 {
        self.b_norm() * (self.b_invhalf_norm() + 1.0 / SQRT_2) * self.b_invhalf_minus_invsqrt2() * ROUNDING_INFLATION
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum WindowError {
    #[error("perturbation bound {delta} reaches inf ψ₀ = {inf}; q is too small to certify invertibility")]
    NotInvertible { delta: f64, inf: f64 },
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// `Σ_{m≠0} e^{−παβ²m²/2} sup|ψ_m|` with certified tail, plus the ratios
/// `sup|ψ_m| / inf ψ₀` that were used.
pub fn psi_row_sum(gp: &GaussParams, grid: usize) -> Result<(f64, Vec<(i64, f64)>), FrameError> {
    let rate = gp.lattice_rate_m();
    let k = gp.gamma_constant()?;
    // sup|ψ_m| ≤ Σ|coefficients| ≤ K_Γ · gaussian_sum_bound(c_b)
    let sup_bound = k * gaussian_sum_bound(gp.lattice_rate_n());
    let mut rows = 0u64;
    while gaussian_tail_bound(rate, rows) * sup_bound > 1e-300 && rows < 64 {
        rows += 1;
    }
    let mut total = 0.0;
    let mut sups = Vec::new();
    for m in 1..=rows as i64 {
        let weight = (-PI * rate * (m * m) as f64).exp();
        let ext = extrema_of(&psi_series(m, gp, 1e-14)?, grid, 0.0)?;
        sups.push((m, ext.sup_bound));
        // ψ_{−m}(t) = conj ψ_m(−t), so both signs share a sup
        total += 2.0 * weight * ext.sup_bound;
    }
    total += gaussian_tail_bound(rate, rows) * sup_bound;
    // terms that underflowed to zero are each below the smallest subnormal
    Ok(((total * ROUNDING_INFLATION).max(f64::MIN_POSITIVE), sups))
}

pub fn spectral_window(frame: &FrameParams, b: &BuiltPoly) -> Result<SpectralWindow, WindowError> {
    spectral_window_from(&frame.gp, b)
}

pub fn spectral_window_from(gp: &GaussParams, b: &BuiltPoly) -> Result<SpectralWindow, WindowError> {
    let psi0 = extrema_of(&psi_series(0, gp, 1e-14)?, WINDOW_GRID, 0.0)?;
    let rows_l1: f64 = b
        .poly
        .coeffs()
        .iter()
        .filter(|((m, _), _)| *m != 0)
        .map(|(_, c)| c.norm())
        .sum::<f64>()
        + b.poly.discarded();
    let (delta_psi, _) = psi_row_sum(gp, WINDOW_GRID)?;
    let delta_rows_l1 = rows_l1 * ROUNDING_INFLATION;
    let delta = delta_rows_l1.min(delta_psi);
    window_with_delta(psi0, delta_rows_l1, delta_psi, delta)
}

/// The window for an explicit `Δ`; `Δ = 0` gives `[inf ψ₀, sup ψ₀]`.
pub fn window_with_delta(psi0: PsiExtrema, delta_rows_l1: f64, delta_psi: f64, delta: f64) -> Result<SpectralWindow, WindowError> {
    if delta >= psi0.inf_bound {
        return Err(WindowError::NotInvertible {
            delta,
            inf: psi0.inf_bound,
        });
    }
    Ok(SpectralWindow {
        psi0,
        delta_rows_l1,
        delta_psi,
        delta,
        lo: psi0.inf_bound - delta,
        hi: psi0.sup_bound + delta,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CutdownReport {
    pub which: Generator,
    pub perturbed_minus_b_l1: f64,
    pub b_inv_norm_bound: f64,
    pub b_invhalf_norm_bound: f64,
    pub b_half_minus_sqrt2: f64,
    pub b_invhalf_minus_invsqrt2: f64,
    pub total: f64,
}

impl CutdownReport {
    pub fn from_parts(
        which: Generator,
        perturbed_minus_b_l1: f64,
        b_inv_norm_bound: f64,
        b_invhalf_norm_bound: f64,
        b_half_minus_sqrt2: f64,
        b_invhalf_minus_invsqrt2: f64,
    ) -> Self {
        let total = b_inv_norm_bound * perturbed_minus_b_l1
            + b_invhalf_norm_bound * b_half_minus_sqrt2
            + SQRT_2 * b_invhalf_minus_invsqrt2;
        Self {
            which,
            perturbed_minus_b_l1,
            b_inv_norm_bound,
            b_invhalf_norm_bound,
            b_half_minus_sqrt2,
            b_invhalf_minus_invsqrt2,
            total,
        }
    }

    /// Recomputes `total` from the parts; exact equality is expected.
    pub fn accounting_holds(&self) -> bool {
        let again = Self::from_parts(
            self.which,
            self.perturbed_minus_b_l1,
            self.b_inv_norm_bound,
            self.b_invhalf_norm_bound,
            self.b_half_minus_sqrt2,
            self.b_invhalf_minus_invsqrt2,
        );
        again.total == self.total
    }
}

/// Bound on the distance of the compressed generator from `V₃^{p′}` (U1,
/// through `X`) or `V₄^{−p′}` (U2, through `Y`).
pub fn cutdown_bound(frame: &FrameParams, which: Generator, window: &SpectralWindow, tol: f64) -> Result<CutdownReport, FrameError> {
    let pert = match which {
        Generator::U1 => Perturbation::X,
        Generator::U2 => Perturbation::Y,
    };
    let diff = perturbed_minus_b(frame, pert, tol)?;
    Ok(cutdown_from_diff(which, tp_l1(&diff.poly), window))
}

pub fn cutdown_from_diff(which: Generator, diff_l1: f64, window: &SpectralWindow) -> CutdownReport {
    CutdownReport::from_parts(
        which,
        diff_l1,
        window.b_inv_norm(),
        window.b_invhalf_norm(),
        window.b_half_minus_sqrt2(),
        window.b_invhalf_minus_invsqrt2(),
    )
}

/// `⟨f,f⟩_D = (√(2α)/β²) Σ conj H(m/β, n/β) U₂^{qn} U₁^{qm}` in the
/// coordinates `(m, n)` of `(U₁^q, U₂^q)`, twist `frac(q²θ) = 1/β²`.
/// Also returns the centrality sums, which share the box.
#[derive(Clone, Debug, Serialize)]
pub struct DdInner {
    pub built: BuiltPoly,
    /// `(√(2α)/β²) Σ |H(m/β, n/β)|`, including the tail.
    pub l1_mass: f64,
    pub eps1_numeric: f64,
    pub eps2_numeric: f64,
}

pub fn dd_inner_coeffs(frame: &FrameParams, tol: f64) -> Result<DdInner, FrameError> {
    dd_inner_from(&frame.gp, frame.beta_a / frame.gp.beta_sq, tol)
}

/// `x = qθ − p = 1/(qβ²)`.
pub fn dd_inner_from(gp: &GaussParams, x: f64, tol: f64) -> Result<DdInner, FrameError> {
    let k = gp.gamma_constant()? / gp.beta_sq;
    let rate_m = gp.alpha / (2.0 * gp.beta_sq);
    let rate_n = gp.kappa() / gp.beta_sq;
    let bx = lattice_box(rate_m, rate_n, k, tol / 10.0, false, false);
    let terms = ((2 * bx.m + 1) as usize).saturating_mul((2 * bx.n + 1) as usize);
    if terms > MAX_BOX_TERMS {
        return Err(FrameError::SupportTooLarge(terms));
    }
    let scale = (2.0 * gp.alpha).sqrt() / gp.beta_sq;
    let twist = 1.0 / gp.beta_sq;
    let rows: Vec<Result<Vec<((i64, i64), Complex64, f64)>, FrameError>> = (-bx.m..=bx.m)
        .into_par_iter()
        .map(|m| {
            (-bx.n..=bx.n)
                .map(|n| {
                    let h = H_closed(m as f64 / gp.beta, n as f64 / gp.beta, gp, 1e-16)?;
                    Ok(((m, n), h.value.conj() * scale, h.tail_bound * scale))
                })
                .collect()
        })
        .collect();
    let mut poly = TwistedPoly::new(twist, None);
    let (mut l1, mut e1, mut e2, mut err) = (0.0, 0.0, 0.0, 0.0);
    for row in rows {
        for ((m, n), c, e) in row? {
            let mag = c.norm();
            l1 += mag;
            e1 += (mag + e) * 2.0 * (PI * n as f64 * x).sin().abs();
            e2 += (mag + e) * 2.0 * (PI * m as f64 * x).sin().abs();
            err += e;
            poly.add_term(m, n, c);
        }
    }
    // |e(t) − 1| ≤ 2π|t| for the tails
    let moment_tail = |rate_a: f64, rate_b: f64, na: i64, nb: i64| {
        gaussian_sum_bound(rate_b) * gaussian_moment_tail_bound(rate_a, na as u64)
            + gaussian_tail_bound(rate_b, nb as u64) * gaussian_moment_tail_bound(rate_a, 0)
    };
    let e1_tail = k * 2.0 * PI * x * moment_tail(rate_n, rate_m, bx.n, bx.m);
    let e2_tail = k * 2.0 * PI * x * moment_tail(rate_m, rate_n, bx.m, bx.n);
    let built = finish(poly, err, &bx);
    Ok(DdInner {
        l1_mass: (l1 + err + bx.tail) * ROUNDING_INFLATION,
        eps1_numeric: (e1 + e1_tail) * ROUNDING_INFLATION,
        eps2_numeric: (e2 + e2_tail) * ROUNDING_INFLATION,
        built,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct CentralityReport {
    pub eps1_numeric: f64,
    pub eps2_numeric: f64,
    pub A1_direct: f64,
    pub B1_direct: f64,
    pub A2_direct: f64,
    pub B2_direct: f64,
    pub A1_bound: f64,
    pub B1_bound: f64,
    pub A2_bound: f64,
    pub B2_bound: f64,
    pub eps1_analytic: f64,
    pub eps2_analytic: f64,
}

/// `Σ_{n≥start} w(n) e^{−πn²/(2αβ²)} ϑ(iπn/(2α), it_α)` with `w(n) = n` or 1.
fn theta_weighted_sum(gp: &GaussParams, kind: ThetaKind, weighted: bool, start: i64) -> Result<f64, FrameError> {
    let c = 1.0 / (2.0 * gp.alpha * gp.beta_sq);
    // net Gaussian rate after the theta growth, see the A₁ estimate
    let net = gp.kappa() / gp.beta_sq;
    let peak = (1.0 + 1.0 / gp.t_alpha.sqrt()) * ROUNDING_INFLATION;
    let mut n_max = start.max(1) as u64;
    loop {
        let t = if weighted {
            gaussian_moment_tail_bound(net, n_max)
        } else {
            gaussian_tail_bound(net, n_max)
        };
        if peak * t / 2.0 < 1e-15 {
            break;
        }
        n_max += 1;
    }
    let mut total = 0.0;
    for n in start..=n_max as i64 {
        let nf = n as f64;
        let th = theta_eval_scaled(&ThetaQuery::imaginary(kind, PI * nf / (2.0 * gp.alpha), gp.t_alpha, 1e-17))?;
        let ln = th.ln_abs() - PI * c * nf * nf;
        total += if weighted { nf } else { 1.0 } * ln.exp();
    }
    let tail = if weighted {
        gaussian_moment_tail_bound(net, n_max)
    } else {
        gaussian_tail_bound(net, n_max)
    };
    Ok(total + peak * tail / 2.0)
}

pub fn centrality_bounds(frame: &FrameParams, tol: f64) -> Result<CentralityReport, FrameError> {
    let dd = dd_inner_coeffs(frame, tol)?;
    centrality_from(&frame.gp, frame.q_f64(), dd.eps1_numeric, dd.eps2_numeric)
}

#[allow(non_snake_case)]
pub fn centrality_from(gp: &GaussParams, q: f64, eps1_numeric: f64, eps2_numeric: f64) -> Result<CentralityReport, FrameError> {
    let (alpha, beta, bsq) = (gp.alpha, gp.beta, gp.beta_sq);
    let e_half = (PI * alpha / 2.0).exp();
    let t3_2ia = gp.theta3_at_2ia()?;
    let t2_2ia = theta_eval(&ThetaQuery::real_arg(ThetaKind::Theta2, 0.0, 2.0 * alpha, 1e-16))?.re();
    let t2_ita = theta_eval(&ThetaQuery::real_arg(ThetaKind::Theta2, 0.0, gp.t_alpha, 1e-16))?.re();
    let t3_4i = theta_eval(&ThetaQuery::real_arg(ThetaKind::Theta3, 0.0, 4.0, 1e-16))?.re();

    let A1_direct = theta_weighted_sum(gp, ThetaKind::Theta3, true, 1)?;
    let B1_direct = e_half * theta_weighted_sum(gp, ThetaKind::Theta2, true, 1)?;
    let t3_ita = theta_eval(&ThetaQuery::real_arg(ThetaKind::Theta3, 0.0, gp.t_alpha, 1e-16))?.re();
    let A2_direct = t3_ita + 2.0 * theta_weighted_sum(gp, ThetaKind::Theta3, false, 1)?;
    let B2_direct = e_half * (t2_ita + 2.0 * theta_weighted_sum(gp, ThetaKind::Theta2, false, 1)?);

    let A1_bound = 9.0 * bsq * (2.0 * alpha * alpha + 1.0) / (2.0 * PI * alpha);
    let B1_bound = 12.0 / PI * alpha * bsq * t3_2ia + 6.0 * bsq * (2.0 + beta * (2.0 * alpha).sqrt());
    let A2_bound = t3_4i + 9.0 * bsq * (2.0 * alpha * alpha + 1.0) / (PI * alpha);
    // the second term of B₂ is only estimated approximately; 10% slack
    let B2_bound = 1.1 * (e_half * t2_ita + 2.0 * beta * (2.0 * alpha).sqrt() * e_half * t2_2ia);

    let lead = 4.0 * PI / (q * bsq * bsq) * t3_2ia;
    let eps1_analytic = lead * (1.0 + beta * SQRT_2 / alpha.sqrt()) * (2.0 * A1_bound + B1_bound);
    let m_sum = bsq / (PI * alpha) + 2.0 * beta / (PI * std::f64::consts::E * alpha).sqrt();
    let eps2_analytic = lead * m_sum * (2.0 * A2_bound + B2_bound);
    Ok(CentralityReport {
        eps1_numeric,
        eps2_numeric,
        A1_direct,
        B1_direct,
        A2_direct,
        B2_direct,
        A1_bound,
        B1_bound,
        A2_bound,
        B2_bound,
        eps1_analytic,
        eps2_analytic,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OmegaMode {
    Formula,
    Brute,
}

fn divides(q: i64, k: i64) -> bool {
    k.rem_euclid(q) == 0
}

/// `Σ_{n,m ∈ ℤ_q} e(−n n₂p₀/q + m n₄/q) conj φ(n,m) φ(n − n₁p₀, m + n₃)` with
/// `φ(n, m) = [q | n − m]`; equals `q [q | n₁p₀ + n₃] [q | n₂p₀ − n₄]`.
pub fn omega(n: [i64; 4], p0: i64, q: i64, mode: OmegaMode) -> Complex64 {
    assert!(q >= 1, "q must be positive");
    let [n1, n2, n3, n4] = n;
    match mode {
        OmegaMode::Formula => {
            if divides(q, n1 * p0 + n3) && divides(q, n2 * p0 - n4) {
                Complex64::new(q as f64, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }
        OmegaMode::Brute => {
            let phi = |a: i64, b: i64| if divides(q, a - b) { 1.0 } else { 0.0 };
            let mut sum = Complex64::new(0.0, 0.0);
            for nn in 0..q {
                for mm in 0..q {
                    let w = phi(nn, mm) * phi(nn - n1 * p0, mm + n3);
                    if w != 0.0 {
                        let k = (-nn * n2 * p0 + mm * n4).rem_euclid(q);
                        sum += crate::numkit::unit_phase(k as f64 / q as f64) * w;
                    }
                }
            }
            sum
        }
    }
}

/// `τ(e) = q(qθ − p)`.
pub fn trace_e(frame: &FrameParams) -> BigReal {
    frame.trace.clone()
}

/// `(a q)²`, the covolume computed through `a`.
pub fn covolume(frame: &FrameParams) -> BigReal {
    let q = BigReal::from_bigint(&frame.sc.q, frame.a.precision_bits());
    frame.a.mul(&q).square()
}

/// `1/β²` from the extended-precision β.
pub fn inverse_beta_sq(frame: &FrameParams) -> BigReal {
    let prec = frame.beta_big.precision_bits();
    BigReal::from_i64(1, prec).div(&frame.beta_big.square()).expect("β > 0")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MomentSumCheck {
    pub lhs: f64,
    /// Upper bound on `lhs` including the summation tail.
    pub lhs_upper: f64,
    pub rhs: f64,
}

impl MomentSumCheck {
    pub fn holds(&self) -> bool {
        self.lhs_upper < self.rhs
    }
}

/// `Σ_{n≥1} n e^{−πa(n+b)²}` against `√(2/(πa)) + 1/(πa) + 2|b| + |b|/√a`
/// (or `1/(2πa) + 2/√(2πea)` when `b = 0`).
pub fn moment_sum_check(a: f64, b: f64) -> MomentSumCheck {
    assert!(a > 0.0 && b.is_finite(), "need a > 0 and finite b");
    let f = |n: f64| n * (-PI * a * (n + b).powi(2)).exp();
    let x0 = 0.5 * ((b * b + 2.0 / (PI * a)).sqrt() - b);
    let mut n_max = (x0.ceil() as i64).max(1) + 1;
    let tail = |n: i64| {
        let y = n as f64 + b;
        let g = (-PI * a * y * y).exp();
        g / (2.0 * PI * a) + b.abs() * g / (2.0 * PI * a * y)
    };
    while (n_max as f64 + b) <= 0.0 || tail(n_max) > 1e-18 {
        n_max += 1;
    }
    let lhs: f64 = (1..=n_max).rev().map(|n| f(n as f64)).sum();
    let rhs = if b == 0.0 {
        1.0 / (2.0 * PI * a) + 2.0 / (2.0 * PI * std::f64::consts::E * a).sqrt()
    } else {
        (2.0 / (PI * a)).sqrt() + 1.0 / (PI * a) + 2.0 * b.abs() + b.abs() / a.sqrt()
    };
    MomentSumCheck {
        lhs,
        lhs_upper: (lhs + tail(n_max)) * ROUNDING_INFLATION,
        rhs,
    }
}

/// Independent upper bound on `‖X − b‖₁` or `‖Y − b‖₁` assembled from the
/// row decomposition: the unshifted row is summed exactly, the others are
/// enveloped through the `Γ` bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PerturbationEnvelope {
    /// The row (`n = 0` for X, `m = 0` for Y) summed directly.
    pub a_row: f64,
    pub m_factor: f64,
    pub n_factor: f64,
    pub total: f64,
}

pub fn perturbation_envelope(frame: &FrameParams, which: Perturbation) -> Result<PerturbationEnvelope, FrameError> {
    perturbation_envelope_from(&frame.gp, frame.a_f64, frame.beta_a, which)
}

pub fn perturbation_envelope_from(
    gp: &GaussParams,
    a: f64,
    beta_a: f64,
    which: Perturbation,
) -> Result<PerturbationEnvelope, FrameError> {
    let (alpha, bsq) = (gp.alpha, gp.beta_sq);
    let scale = (2.0 * alpha).sqrt();
    let t3 = gp.theta3_at_2ia()?;
    let e_half = (PI * alpha / 2.0).exp();
    let rate_m = alpha * bsq / 2.0;
    let rate_n = bsq / (2.0 * alpha);
    let range = |rate: f64| -> i64 {
        let mut r = 1i64;
        while PI * rate * ((r * r) as f64) < 800.0 {
            r += 1;
        }
        r
    };
    let (rm, rn) = (range(rate_m), range(rate_n.min(gp.lattice_rate_n())));
    // 2ϑ₃(iB, it_α) + e^{πα/2}ϑ₂(iB, it_α) in log scale, B = πβ²u/(2α)
    let g_ln = |u: f64| -> Result<f64, FrameError> {
        let b = PI * bsq * u / (2.0 * alpha);
        let s3 = theta_eval_scaled(&ThetaQuery::imaginary(ThetaKind::Theta3, b, gp.t_alpha, 1e-17))?;
        let s2 = theta_eval_scaled(&ThetaQuery::imaginary(ThetaKind::Theta2, b, gp.t_alpha, 1e-17))?;
        let (l3, l2) = (s3.ln_abs_upper() + 2f64.ln(), s2.ln_abs_upper() + e_half.ln());
        let hi = l3.max(l2);
        Ok(hi + ((l3 - hi).exp() + (l2 - hi).exp()).ln())
    };
    match which {
        Perturbation::X => {
            let mut a_row = 0.0;
            for m in -rm..=rm {
                a_row += scale * H_lattice_shift_diff(m, 0, Shift::S, a, beta_a, gp)?.abs_upper();
            }
            let m_factor: f64 = (-rm..=rm)
                .map(|m| {
                    let mf = m as f64;
                    (-PI * rate_m * mf * mf).exp() * ((-PI * alpha * a * a / 2.0 - PI * alpha * mf * beta_a).exp() + 1.0)
                })
                .sum();
            let mut n_factor = 0.0;
            for n in 1..=rn {
                let nf = n as f64;
                n_factor += (g_ln(nf)? - PI * rate_n * nf * nf).exp();
            }
            let total = (a_row + 2.0 * t3 * m_factor * n_factor) * 1.0001;
            Ok(PerturbationEnvelope { a_row, m_factor, n_factor, total })
        }
        Perturbation::Y => {
            let mut a_row = 0.0;
            for n in -rn..=rn {
                a_row += scale * H_lattice_shift_diff(0, n, Shift::T, a, beta_a, gp)?.abs_upper();
            }
            let m_factor: f64 = (1..=rm).map(|m| (-PI * rate_m * (m * m) as f64).exp()).sum();
            let mut n_factor = 0.0;
            for n in -rn..=rn {
                let nf = n as f64;
                let shifted = nf + a / gp.beta;
                n_factor += (g_ln(shifted)? - PI * rate_n * nf * nf - PI * a * a / (2.0 * alpha) - PI * beta_a * nf / alpha).exp()
                    + (g_ln(nf)? - PI * rate_n * nf * nf).exp();
            }
            let total = (a_row + 2.0 * t3 * m_factor * n_factor) * 1.0001;
            Ok(PerturbationEnvelope { a_row, m_factor, n_factor, total })
        }
    }
}

/// Whether `q` fits the integer range used by the `Ω` enumeration.
pub fn small_q(q: &BigInt) -> Option<i64> {
    use num_traits::ToPrimitive;
    q.to_i64().filter(|&v| v <= 1 << 20)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::psi_extrema;
    use crate::nctorus::{tp_adjoint, tp_flip};

    fn gp(beta: f64) -> GaussParams {
        GaussParams::from_beta(beta).unwrap()
    }

    #[test]
    fn b_is_self_adjoint_flip_invariant_and_positive_at_origin() {
        let g = gp(3.4);
        let b = build_b_from(&g, 1e-12).unwrap();
        assert!(tp_adjoint(&b.poly).max_coeff_diff(&b.poly) < 1e-12);
        assert!(tp_flip(&b.poly).max_coeff_diff(&b.poly) < 1e-12);
        let c00 = b.poly.get(0, 0);
        let gamma00 = crate::frame::gamma_eval(0.0, 0.0, &g, 1e-14).unwrap().re();
        assert!((c00.re - gamma00).abs() < 1e-12 && c00.im.abs() < 1e-15 && c00.re > 0.0);
    }

    #[test]
    fn b_row_zero_is_psi0() {
        let g = gp(2.6);
        let b = build_b_from(&g, 1e-13).unwrap();
        let psi = psi_series(0, &g, 1e-14).unwrap();
        for &(m, c) in &psi.coeffs {
            assert!((b.poly.get(0, m) - c).norm() < 1e-13, "m={m}");
        }
    }

    #[test]
    fn unshifted_perturbation_is_b() {
        let g = gp(3.0);
        let b = build_b_from(&g, 1e-12).unwrap();
        for which in [Perturbation::X, Perturbation::Y] {
            let x = build_perturbed_from(&g, 0.0, which, 1e-12).unwrap();
            assert!(x.poly.max_coeff_diff(&b.poly) < 1e-15);
            let d = perturbed_minus_b_from(&g, 0.0, 0.0, which, 1e-12).unwrap();
            assert!(d.poly.coeffs().values().all(|c| c.norm() == 0.0));
        }
    }

    #[test]
    fn difference_matches_subtraction_for_moderate_shift() {
        let g = gp(3.0);
        let a = 0.02;
        let b = build_b_from(&g, 1e-13).unwrap();
        for which in [Perturbation::X, Perturbation::Y] {
            let x = build_perturbed_from(&g, a, which, 1e-13).unwrap();
            let d = perturbed_minus_b_from(&g, a, g.beta * a, which, 1e-13).unwrap();
            let sub = x.poly.sub(&b.poly).unwrap();
            assert!(sub.max_coeff_diff(&d.poly) < 1e-13);
            let env = perturbation_envelope_from(&g, a, g.beta * a, which).unwrap();
            assert!(tp_l1(&d.poly) - d.poly.discarded() <= env.total, "{which:?}");
        }
    }

    #[test]
    fn c_q_properties() {
        let mut last = f64::INFINITY;
        for beta in [2.5, 3.0, 4.0, 6.0] {
            let g = gp(beta);
            let c = c_q_from(&g).unwrap();
            assert!(c.value > 0.0 && c.value < last);
            last = c.value;
            if g.alpha * g.beta_sq / 2.0 > 3.0 {
                let r = c.value / c_q_leading(&g);
                assert!((0.9..=1.1).contains(&r));
            }
        }
        let big = c_q_from(&gp(40.0)).unwrap();
        assert!(big.ln_value < -1000.0 && big.ln_value.is_finite());
    }

    #[test]
    fn window_and_chain() {
        let g = gp(2.6);
        let b = build_b_from(&g, 1e-12).unwrap();
        let w = spectral_window_from(&g, &b).unwrap();
        assert!(w.lo > 0.0 && w.hi < 5.0 + w.delta);
        let cq = c_q_from(&g).unwrap().value;
        assert!(w.delta_psi < cq * w.psi0.sup_bound && cq * w.psi0.sup_bound < 5.0 * cq);
        let zero = window_with_delta(psi_extrema(0, &g, 1024).unwrap(), 0.0, 0.0, 0.0).unwrap();
        assert!(zero.lo > 1.0 && zero.hi < 5.0);
    }

    #[test]
    fn cutdown_accounting_is_exact() {
        let g = gp(3.0);
        let b = build_b_from(&g, 1e-12).unwrap();
        let w = spectral_window_from(&g, &b).unwrap();
        let r = cutdown_from_diff(Generator::U1, 0.0123, &w);
        assert!(r.accounting_holds());
        let expected = r.b_inv_norm_bound * r.perturbed_minus_b_l1
            + r.b_invhalf_norm_bound * r.b_half_minus_sqrt2
            + SQRT_2 * r.b_invhalf_minus_invsqrt2;
        assert_eq!(r.total, expected);
    }

    #[test]
    fn dd_inner_is_self_adjoint_and_mass_matches() {
        let g = gp(3.0);
        let dd = dd_inner_from(&g, 1e-3, 1e-10).unwrap();
        assert!(tp_adjoint(&dd.built.poly).max_coeff_diff(&dd.built.poly) < 1e-12);
        // oversummation oracle on a larger box
        let scale = (2.0 * g.alpha).sqrt() / g.beta_sq;
        let (bm, bn) = (dd.built.box_m + 6, dd.built.box_n + 6);
        let mut direct = 0.0;
        for m in -bm..=bm {
            for n in -bn..=bn {
                direct += scale * H_closed(m as f64 / g.beta, n as f64 / g.beta, &g, 1e-16).unwrap().abs();
            }
        }
        assert!((direct - dd.l1_mass).abs() < 1e-9);
        assert!(direct <= dd.l1_mass);
    }

    #[test]
    fn centrality_sums_within_envelopes() {
        for beta in [3.0, 4.5] {
            let g = gp(beta);
            let x = 1.0 / (1e4 * g.beta_sq);
            let dd = dd_inner_from(&g, x, 1e-12).unwrap();
            let r = centrality_from(&g, 1e4, dd.eps1_numeric, dd.eps2_numeric).unwrap();
            assert!(r.A1_direct < r.A1_bound);
            assert!(r.B1_direct < r.B1_bound);
            assert!(r.A2_direct < r.A2_bound);
            assert!(r.B2_direct < r.B2_bound);
            assert!(r.eps1_numeric <= r.eps1_analytic + 1e-9);
            assert!(r.eps2_numeric <= r.eps2_analytic + 1e-9);
        }
    }

    #[test]
    fn omega_small_cases() {
        for q in 1..=7 {
            for p0 in 1..q.max(2) {
                for n1 in -2..=2 {
                    for n3 in -2..=2 {
                        for (n2, n4) in [(0, 0), (1, p0), (2, 1), (-1, 3)] {
                            let t = [n1, n2, n3, n4];
                            let d = omega(t, p0, q, OmegaMode::Brute) - omega(t, p0, q, OmegaMode::Formula);
                            assert!(d.norm() < 1e-10, "{t:?} p0={p0} q={q}");
                        }
                    }
                }
            }
        }
        assert_eq!(omega([3, -1, 4, 2], 1, 1, OmegaMode::Formula), Complex64::new(1.0, 0.0));
        assert_eq!(omega([1, 0, 0, 0], 2, 5, OmegaMode::Formula), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn moment_sum_cases() {
        let c = moment_sum_check(1.0, 0.0);
        assert!(c.holds());
        assert!((c.rhs - (1.0 / (2.0 * PI) + 2.0 / (2.0 * PI * std::f64::consts::E).sqrt())).abs() < 1e-15);
        assert!(moment_sum_check(0.3, 2.5).holds());
        assert!(moment_sum_check(5.0, -1.0).holds());
    }
}
