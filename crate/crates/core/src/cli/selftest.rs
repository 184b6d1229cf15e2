//! Property suites over every module, runnable from the command line.
//!
//! Theta-dependent suites take the evaluator as a parameter so that a
//! deliberately broken backend can be shown to be caught.

use std::f64::consts::{PI, SQRT_2};
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::{
    build_b_from, centrality_from, dd_inner_from, moment_sum_check, omega, perturbation_envelope_from,
    perturbed_minus_b_from, OmegaMode, Perturbation,
};
use crate::diophantine::{engineered_theta, square_convergents};
use crate::frame::{
    make_frame, orthogonality_residual, orthogonality_residual_with, psi_extrema, GaussParams, H_closed, H_quad,
    Window,
};
use crate::nctorus::{
    commutation_report, hermitian_min_eigenvalue, hermitian_norm, psd_sqrt, tp_flip, tp_fourier, tp_l1, tp_mul,
    TwistedPoly,
};
use crate::theta::{growth_compare, theta_eval_scaled, ScaledValue, ThetaError, ThetaKind, ThetaQuery};

/// A theta evaluator with the signature of [`theta_eval_scaled`].
pub type ThetaBackend = dyn Fn(&ThetaQuery) -> Result<ScaledValue, ThetaError> + Sync;

/// Faults that `selftest --inject-fault` can plant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Flip the sign of every `ϑ₂` value.
    Theta2Sign,
}

impl std::str::FromStr for Fault {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "theta2-sign" => Ok(Fault::Theta2Sign),
            other => Err(format!("unknown fault {other:?}; known: theta2-sign")),
        }
    }
}

pub fn faulty_backend(fault: Fault) -> Box<ThetaBackend> {
    match fault {
        Fault::Theta2Sign => Box::new(|q: &ThetaQuery| {
            let mut v = theta_eval_scaled(q)?;
            if q.kind == ThetaKind::Theta2 {
                v.value.value = -v.value.value;
            }
            Ok(v)
        }),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteOutcome {
    pub name: &'static str,
    /// What the suite checks, in one line.
    pub property: &'static str,
    pub checked: usize,
    pub violations: usize,
    /// The first few violations.
    pub examples: Vec<String>,
    pub seconds: f64,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.checked > 0
    }
}

struct Tally {
    checked: usize,
    violations: usize,
    examples: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Self {
            checked: 0,
            violations: 0,
            examples: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.violations += 1;
            if self.examples.len() < 5 {
                self.examples.push(what());
            }
        }
    }

    fn finish(self, name: &'static str, property: &'static str, start: Instant) -> SuiteOutcome {
        SuiteOutcome {
            name,
            property,
            checked: self.checked,
            violations: self.violations,
            examples: self.examples,
            seconds: start.elapsed().as_secs_f64(),
        }
    }
}

fn fail<E: std::fmt::Display>(t: &mut Tally, label: &str, e: E) {
    t.check(false, || format!("{label}: {e}"));
}

pub fn suite_theta_special_value(backend: &ThetaBackend) -> SuiteOutcome {
    let start = Instant::now();
    let mut t = Tally::new();
    let lhs = backend(&ThetaQuery::real_arg(ThetaKind::Theta3, 0.0, 0.5, 1e-16));
    let rhs = backend(&ThetaQuery::real_arg(ThetaKind::Theta3, PI / 2.0, 0.5, 1e-16));
    match (lhs.map(|v| v.to_plain()), rhs.map(|v| v.to_plain())) {
        (Ok(Some(l)), Ok(Some(r))) => {
            let d = (l.value - r.value * (1.0 + SQRT_2)).norm();
            t.check(d < 1e-12, || format!("|ϑ₃(0,i/2) − (1+√2)ϑ₃(π/2,i/2)| = {d:e}"));
        }
        _ => fail(&mut t, "evaluation", "failed"),
    }
    t.finish("theta-special-value", "ϑ₃(0, i/2) = (1+√2) ϑ₃(π/2, i/2)", start)
}

pub const GROWTH_A: [f64; 5] = [0.1, 0.3, 1.0, 3.0, 10.0];

pub fn suite_theta_growth(backend: &ThetaBackend) -> SuiteOutcome {
    let start = Instant::now();
    let mut t = Tally::new();
    for &a in &GROWTH_A {
        for k in -20..=20 {
            let b = 0.5 * k as f64;
            for kind in [ThetaKind::Theta2, ThetaKind::Theta3] {
                let v = match backend(&ThetaQuery::imaginary(kind, b, a, 1e-15)) {
                    Ok(v) => v,
                    Err(e) => {
                        fail(&mut t, "evaluation", e);
                        continue;
                    }
                };
                match growth_compare(&v, a, b) {
                    Ok((lhs, rhs, lower)) => t.check(lhs <= rhs && lower > 0.0, || {
                        format!("{kind:?}(i{b}, i{a}): ln value {lhs:.6} vs ln bound {rhs:.6}, real part lower {lower:e}")
                    }),
                    Err(e) => fail(&mut t, "bound", e),
                }
            }
        }
    }
    t.finish(
        "theta-growth-bound",
        "0 < ϑ₂,₃(iB, iA) ≤ (1 + 1/√A) e^{B²/(πA)}",
        start,
    )
}

pub fn suite_gaussian_moment_sum() -> SuiteOutcome {
    let start = Instant::now();
    let mut t = Tally::new();
    for a in [0.3, 1.0, 5.0] {
        for b in [-2.5, 0.0, 1.0, 7.0] {
            let c = moment_sum_check(a, b);
            t.check(c.holds(), || format!("a={a} b={b}: {} ≥ {}", c.lhs_upper, c.rhs));
        }
    }
    t.finish("gaussian-moment-sum", "Σ n e^{−πa(n+b)²} below its closed bound", start)
}

fn random_hpd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<Complex64> {
    let g = DMatrix::<Complex64>::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let shift = rng.gen_range(0.05..2.0);
    &g * g.adjoint() + DMatrix::<Complex64>::identity(n, n) * Complex64::new(shift, 0.0)
}

pub fn suite_sqrt_lipschitz(seed: u64, pairs: usize) -> SuiteOutcome {
    let start = Instant::now();
    let mut t = Tally::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..pairs {
        let n = rng.gen_range(2..=8);
        let x = random_hpd(&mut rng, n);
        let y = if rng.gen_bool(0.5) {
            random_hpd(&mut rng, n)
        } else {
            // nearby pairs probe the small-difference regime
            let e = random_hpd(&mut rng, n) * Complex64::new(1e-3, 0.0);
            &x + e
        };
        let (sx, sy) = match (psd_sqrt(&x, 1e-9), psd_sqrt(&y, 1e-9)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => {
                fail(&mut t, "sqrt", i);
                continue;
            }
        };
        let m = hermitian_min_eigenvalue(&x).min(hermitian_min_eigenvalue(&y));
        let big_m = hermitian_norm(&x).max(hermitian_norm(&y));
        let lhs = hermitian_norm(&(&sx - &sy));
        let rhs = SQRT_2 * m.powi(-2) * big_m.powf(1.5) * hermitian_norm(&(&x - &y));
        t.check(lhs <= rhs + 1e-9, || format!("pair {i} (n={n}): {lhs:e} > {rhs:e}"));
    }
    t.finish(
        "sqrt-lipschitz",
        "‖x^½ − y^½‖ ≤ √2 m⁻² M^{3/2} ‖x − y‖ for positive matrices",
        start,
    )
}

pub fn suite_closed_form() -> SuiteOutcome {
    let start = Instant::now();
    let mut t = Tally::new();
    for alpha in [0.5, 1.0, 2.0] {
        let gp = match GaussParams::from_alpha(alpha) {
            Ok(g) => g,
            Err(e) => {
                fail(&mut t, "params", e);
                continue;
            }
        };
        for s in -2..=2 {
            for tt in -2..=2 {
                let (s, tt) = (s as f64, tt as f64);
                match (H_closed(s, tt, &gp, 1e-14), H_quad(s, tt, &gp, 1e-11)) {
                    (Ok(c), Ok(q)) => {
                        let d = (c.value - q.value).norm();
                        t.check(d < 1e-8, || format!("α={alpha} (s,t)=({s},{tt}): {d:e}"));
                    }
                    (Err(e), _) | (_, Err(e)) => fail(&mut t, "evaluation", e),
                }
            }
        }
    }
    t.finish("closed-form-vs-quadrature", "theta closed form of H equals its defining integral", start)
}

pub fn suite_orthogonality() -> SuiteOutcome {
    let start = Instant::now();
    let mut t = Tally::new();
    let mut control_max = 0.0f64;
    for beta in [3.0, 5.0] {
        let gp = match GaussParams::from_beta(beta) {
            Ok(g) => g,
            Err(e) => {
                fail(&mut t, "params", e);
                continue;
            }
        };
        let mut worst = 0.0f64;
        for m in -3..=3i64 {
            for n in -3..=3i64 {
                match orthogonality_residual(m, n, &gp, 1e-10) {
                    Ok(v) => worst = worst.max(v.abs()),
                    Err(e) => fail(&mut t, "quadrature", e),
                }
                if let Ok(v) = orthogonality_residual_with(Window::PlainGaussian, m, n, &gp, 1e-10) {
                    control_max = control_max.max(v.abs());
                }
            }
        }
        t.check(worst < 1e-8, || format!("β={beta}: max residual {worst:e}"));
    }
    t.check(control_max > 1e-3, || format!("plain Gaussian control only reached {control_max:e}"));
    t.finish(
        "orthogonality",
        "h is orthogonal to its lattice translates and modulations; a plain Gaussian is not",
        start,
    )
}

pub const WINDOW_BETAS: [f64; 5] = [2.1, 2.5, 3.0, 4.0, 6.0];

pub fn suite_psi_window() -> SuiteOutcome {
    let start = Instant::now();
    let mut t = Tally::new();
    let mut prev: Option<(f64, f64)> = None;
    for beta in WINDOW_BETAS {
        let gp = match GaussParams::from_beta(beta) {
            Ok(g) => g,
            Err(e) => {
                fail(&mut t, "params", e);
                continue;
            }
        };
        let p0 = match psi_extrema(0, &gp, 1024) {
            Ok(p) => p,
            Err(e) => {
                fail(&mut t, "extrema", e);
                continue;
            }
        };
        t.check(1.0 < p0.inf_bound && p0.inf_bound <= p0.sup_bound && p0.sup_bound < 5.0, || {
            format!("β={beta}: ψ₀ ∈ [{}, {}]", p0.inf_bound, p0.sup_bound)
        });
        for n in (-10..=10).filter(|&n| n != 0) {
            match psi_extrema(n, &gp, 1024) {
                Ok(pn) => t.check(pn.sup_bound / p0.inf_bound < 3.0, || {
                    format!("β={beta} n={n}: sup|ψₙ|/inf ψ₀ = {}", pn.sup_bound / p0.inf_bound)
                }),
                Err(e) => fail(&mut t, "extrema", e),
            }
        }
        let dev = ((p0.grid_max - 2.0).abs(), (p0.grid_min - 2.0).abs());
        if let Some((s, i)) = prev {
            t.check(dev.0 < s && dev.1 < i, || format!("β={beta}: deviation from 2 did not shrink"));
        }
        prev = Some(dev);
    }
    t.finish(
        "psi-window",
        "1 < ψ₀ < 5, sup|ψₙ| < 3 inf ψ₀, and ψ₀ → 2 as β grows",
        start,
    )
}

pub fn suite_omega(seed: u64, random: usize) -> SuiteOutcome {
    let start = Instant::now();
    let mut t = Tally::new();
    let check = |t: &mut Tally, n: [i64; 4], p0: i64, q: i64| {
        let d = (omega(n, p0, q, OmegaMode::Brute) - omega(n, p0, q, OmegaMode::Formula)).norm();
        t.check(d < 1e-10, || format!("n={n:?} p0={p0} q={q}: {d:e}"));
    };
    for q in 1..=12i64 {
        for p0 in 0..q {
            for n1 in 0..q {
                for n2 in 0..q {
                    for n3 in 0..q {
                        for n4 in 0..q {
                            check(&mut t, [n1, n2, n3, n4], p0, q);
                        }
                    }
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random {
        let q = rng.gen_range(1..=50);
        let p0 = rng.gen_range(0..q);
        let n = [0; 4].map(|_: i64| rng.gen_range(-200..=200));
        check(&mut t, n, p0, q);
    }
    t.finish("omega-equivalence", "brute-force Ω equals q·δ·δ", start)
}

fn random_poly(rng: &mut ChaCha8Rng, twist: f64, terms: usize) -> TwistedPoly {
    let mut p = TwistedPoly::new(twist, None);
    for _ in 0..terms {
        p.add_term(
            rng.gen_range(-4..=4),
            rng.gen_range(-4..=4),
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
        );
    }
    p
}

pub fn suite_algebra(seed: u64) -> SuiteOutcome {
    let start = Instant::now();
    let mut t = Tally::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..50 {
        let phi: f64 = rng.gen_range(0.0..1.0);
        let (x, y, z) = (
            random_poly(&mut rng, phi, 5),
            random_poly(&mut rng, phi, 5),
            random_poly(&mut rng, phi, 5),
        );
        let (xy, yz) = (tp_mul(&x, &y).unwrap(), tp_mul(&y, &z).unwrap());
        let d = tp_mul(&xy, &z).unwrap().max_coeff_diff(&tp_mul(&x, &yz).unwrap());
        t.check(d < 1e-12, || format!("associativity #{i}: {d:e}"));
        let mut s = x.clone();
        for _ in 0..4 {
            s = tp_fourier(&s);
        }
        let d = s.max_coeff_diff(&x);
        t.check(d < 1e-12, || format!("σ⁴ #{i}: {d:e}"));
        let d = tp_fourier(&tp_fourier(&x)).max_coeff_diff(&tp_flip(&x));
        t.check(d < 1e-12, || format!("σ² vs flip #{i}: {d:e}"));
        let (l, r) = (tp_l1(&xy), tp_l1(&x) * tp_l1(&y));
        t.check(l <= r, || format!("ℓ¹ submultiplicativity #{i}: {l} > {r}"));
        let d = tp_fourier(&TwistedPoly::g1(phi, None)).max_coeff_diff(&TwistedPoly::g2(phi, None));
        t.check(d == 0.0, || format!("σ(g₁) ≠ g₂ at φ={phi}"));
    }
    for beta in [2.5, 3.5, 6.0] {
        match GaussParams::from_beta(beta).and_then(|g| build_b_from(&g, 1e-12)) {
            Ok(b) => {
                let d = tp_flip(&b.poly).max_coeff_diff(&b.poly);
                t.check(d < 1e-12, || format!("flip(b) ≠ b at β={beta}: {d:e}"));
            }
            Err(e) => fail(&mut t, "b", e),
        }
    }
    let frame = engineered_theta(&[3.5, 6.0], 256).map_err(|e| e.to_string()).and_then(|eng| {
        let recs = square_convergents(&eng.theta, 2, 2.0).map_err(|e| e.to_string())?.records;
        recs.iter()
            .map(|r| make_frame(&eng.theta, r).map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()
    });
    match frame {
        Ok(frames) if !frames.is_empty() => {
            for f in frames {
                let c = commutation_report(&f);
                let worst = [c.d_error, c.annihilation_error, c.mu_error, c.inv_q_error, c.cross_error, c.w_error]
                    .into_iter()
                    .fold(0.0f64, f64::max);
                t.check(worst < 1e-12, || format!("commutation phases at q={}: {worst:e}", f.sc.q));
            }
        }
        Ok(_) => fail(&mut t, "frames", "none built"),
        Err(e) => fail(&mut t, "frames", e),
    }
    t.finish(
        "twisted-algebra",
        "associativity, σ⁴ = id, σ² = flip, σ(g₁) = g₂, flip(b) = b, ℓ¹ submultiplicativity, lattice phases",
        start,
    )
}

/// Direct `‖X − b‖₁`, `‖Y − b‖₁` against the row envelope, and the
/// centrality sums against their closed bounds.
pub fn suite_envelopes() -> SuiteOutcome {
    let start = Instant::now();
    let mut t = Tally::new();
    for (beta, q) in [(2.8, 100.0), (3.5, 1e4), (5.0, 1e8)] {
        let gp = match GaussParams::from_beta(beta) {
            Ok(g) => g,
            Err(e) => {
                fail(&mut t, "params", e);
                continue;
            }
        };
        let beta_a = 1.0 / q;
        let a = beta_a / beta;
        for which in [Perturbation::X, Perturbation::Y] {
            match (
                perturbed_minus_b_from(&gp, a, beta_a, which, 1e-12),
                perturbation_envelope_from(&gp, a, beta_a, which),
            ) {
                (Ok(d), Ok(env)) => {
                    let direct = tp_l1(&d.poly) - d.poly.discarded();
                    t.check(direct <= env.total, || format!("{which:?} β={beta}: {direct:e} > {:e}", env.total));
                }
                (Err(e), _) | (_, Err(e)) => fail(&mut t, "perturbation", e),
            }
        }
        match dd_inner_from(&gp, 1.0 / (q * gp.beta_sq), 1e-12)
            .and_then(|dd| centrality_from(&gp, q, dd.eps1_numeric, dd.eps2_numeric))
        {
            Ok(r) => {
                let pairs = [
                    ("A1", r.A1_direct, r.A1_bound),
                    ("B1", r.B1_direct, r.B1_bound),
                    ("A2", r.A2_direct, r.A2_bound),
                    ("B2", r.B2_direct, r.B2_bound),
                    ("eps1", r.eps1_numeric, r.eps1_analytic),
                    ("eps2", r.eps2_numeric, r.eps2_analytic),
                ];
                for (name, direct, bound) in pairs {
                    t.check(direct <= bound, || format!("{name} β={beta}: {direct:e} > {bound:e}"));
                }
            }
            Err(e) => fail(&mut t, "centrality", e),
        }
    }
    t.finish("envelopes", "direct sums stay below their analytic envelopes", start)
}

#[derive(Clone, Debug, Serialize)]
pub struct SelftestSummary {
    pub suites: Vec<SuiteOutcome>,
}

impl SelftestSummary {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteOutcome::passed)
    }

    pub fn failed_names(&self) -> Vec<&'static str> {
        self.suites.iter().filter(|s| !s.passed()).map(|s| s.name).collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.suites {
            out.push_str(&format!(
                "{} {:<28} {:>8} checks {:>4} violations {:>7.2}s  {}\n",
                if s.passed() { "PASS" } else { "FAIL" },
                s.name,
                s.checked,
                s.violations,
                s.seconds,
                s.property
            ));
            for e in &s.examples {
                out.push_str(&format!("       {e}\n"));
            }
        }
        out
    }
}

pub fn selftest() -> SelftestSummary {
    selftest_with(&theta_eval_scaled)
}

pub fn selftest_with(backend: &ThetaBackend) -> SelftestSummary {
    SelftestSummary {
        suites: vec![
            suite_theta_special_value(backend),
            suite_theta_growth(backend),
            suite_gaussian_moment_sum(),
            suite_sqrt_lipschitz(7, 200),
            suite_closed_form(),
            suite_orthogonality(),
            suite_psi_window(),
            suite_omega(13, 500),
            suite_algebra(17),
            suite_envelopes(),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn growth_suite_catches_sign_fault() {
        assert!(suite_theta_growth(&theta_eval_scaled).passed());
        let bad = faulty_backend(Fault::Theta2Sign);
        let out = suite_theta_growth(bad.as_ref());
        assert!(!out.passed());
        assert_eq!(out.violations, GROWTH_A.len() * 41);
        assert!(suite_theta_special_value(bad.as_ref()).passed());
    }

    #[test]
    fn fault_names_parse() {
        assert_eq!("theta2-sign".parse::<Fault>().unwrap(), Fault::Theta2Sign);
        assert!("nope".parse::<Fault>().is_err());
    }

    #[test]
    fn cheap_suites_pass() {
        assert!(suite_gaussian_moment_sum().passed());
        assert!(suite_sqrt_lipschitz(1, 40).passed());
    }
}
