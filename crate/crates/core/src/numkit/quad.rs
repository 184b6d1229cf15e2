use std::f64::consts::PI;

use num_complex::Complex64;

use super::{CertifiedValue, NumError, ROUNDING_INFLATION};

pub const MAX_REFINEMENTS: u32 = 40;
const INITIAL_PANELS: usize = 64;
const MIN_REFINEMENTS: u32 = 3;

/// Gaussian envelope `|f(x)| ≤ constant · exp(−π decay_rate x²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Envelope {
    pub decay_rate: f64,
    /// `None` asks the integrator to estimate the constant by sampling.
    pub constant: Option<f64>,
}

impl Envelope {
    pub fn new(decay_rate: f64, constant: f64) -> Self {
        Self {
            decay_rate,
            constant: Some(constant),
        }
    }

    pub fn estimated(decay_rate: f64) -> Self {
        Self {
            decay_rate,
            constant: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSettings {
    pub envelope: Envelope,
    pub tol: f64,
    /// Extra absolute error per integrand evaluation (e.g. a truncated series inside it).
    pub pointwise_error: f64,
}

impl QuadratureSettings {
    pub fn new(envelope: Envelope, tol: f64) -> Self {
        Self {
            envelope,
            tol,
            pointwise_error: 0.0,
        }
    }
}

/// `∫_ℝ f(x) dx` for an integrand with Gaussian decay, by composite Simpson
/// on `[−L, L]` with interval halving.
///
/// The returned `tail_bound` covers the truncation of the real line, the
/// last Simpson refinement step and `pointwise_error · 2L`.
pub fn integrate_decaying<F>(f: F, settings: QuadratureSettings) -> Result<CertifiedValue, NumError>
where
    F: Fn(f64) -> Complex64,
{
    let QuadratureSettings {
        envelope,
        tol,
        pointwise_error,
    } = settings;
    let c = envelope.decay_rate;
    if !(c > 0.0 && c.is_finite()) {
        return Err(NumError::InvalidArgument(format!("decay rate {c}")));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(NumError::InvalidArgument(format!("tolerance {tol}")));
    }

    let mut half_width = (1.0f64).max(-tol.ln() / (PI * c)).sqrt() + 1.0;
    let constant = match envelope.constant {
        Some(k) => k,
        None => estimate_envelope(&f, c, half_width),
    };
    // ∫_{|x|>L} K e^{−πcx²} ≤ K e^{−πcL²} / (πcL)
    let outside = |l: f64| constant * (-PI * c * l * l).exp() / (PI * c * l);
    while outside(half_width) > tol / 4.0 {
        half_width += 0.25;
    }
    let truncation = outside(half_width);

    let a = -half_width;
    let width = 2.0 * half_width;
    let mut panels = INITIAL_PANELS;
    let mut h = width / panels as f64;
    let ends = f(a) + f(half_width);
    let mut interior_sum = Complex64::new(0.0, 0.0);
    for i in 1..panels {
        interior_sum += f(a + i as f64 * h);
    }
    // Trapezoid sums T_n reuse every sample; Simpson is (4 T_{2n} − T_n) / 3.
    let mut trapezoid = h * (0.5 * ends + interior_sum);
    let mut previous: Option<Complex64> = None;
    let mut last_change = f64::INFINITY;
    for refinement in 0..=MAX_REFINEMENTS {
        let new_h = h / 2.0;
        let mut midpoints = Complex64::new(0.0, 0.0);
        for i in 0..panels {
            midpoints += f(a + (2 * i + 1) as f64 * new_h);
        }
        interior_sum += midpoints;
        let refined = new_h * (0.5 * ends + interior_sum);
        let simpson = (4.0 * refined - trapezoid) / 3.0;
        if let Some(prev) = previous {
            last_change = (simpson - prev).norm();
            if refinement >= MIN_REFINEMENTS && last_change < tol / 2.0 {
                let tail = (last_change + truncation + pointwise_error * width) * ROUNDING_INFLATION;
                return Ok(CertifiedValue::new(simpson, tail, 2 * panels + 1));
            }
        }
        previous = Some(simpson);
        trapezoid = refined;
        panels *= 2;
        h = new_h;
    }
    Err(NumError::NoConvergence {
        refinements: MAX_REFINEMENTS,
        last_change,
    })
}

fn estimate_envelope<F: Fn(f64) -> Complex64>(f: &F, c: f64, half_width: f64) -> f64 {
    let samples = 512;
    let mut k: f64 = 0.0;
    for i in 0..=samples {
        let x = -half_width + 2.0 * half_width * i as f64 / samples as f64;
        k = k.max(f(x).norm() * (PI * c * x * x).exp());
    }
    // sampling can miss the peak; the factor is a heuristic safety margin
    2.0 * k.max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::unit_phase;

    fn gaussian_settings(tol: f64) -> QuadratureSettings {
        QuadratureSettings::new(Envelope::new(1.0, 1.0), tol)
    }

    #[test]
    fn gaussian_normalization() {
        let v = integrate_decaying(|x| Complex64::new((-PI * x * x).exp(), 0.0), gaussian_settings(1e-12)).unwrap();
        assert!((v.value - 1.0).norm() <= 1e-12);
        assert!(v.tail_bound <= 1e-12);
    }

    #[test]
    fn gaussian_fourier_pair() {
        let v = integrate_decaying(|x| (-PI * x * x).exp() * unit_phase(x), gaussian_settings(1e-12)).unwrap();
        assert!((v.value - (-PI).exp()).norm() <= 1e-12);
    }

    #[test]
    fn odd_integrand_vanishes() {
        let settings = QuadratureSettings::new(Envelope::new(0.5, 1.0), 1e-12);
        let v = integrate_decaying(|x| Complex64::new(x * (-PI * x * x).exp(), 0.0), settings).unwrap();
        assert!(v.value.norm() <= 1e-12);
    }

    #[test]
    fn estimated_envelope_works() {
        let settings = QuadratureSettings::new(Envelope::estimated(2.0), 1e-10);
        let v = integrate_decaying(|x| Complex64::new(3.0 * (-2.0 * PI * x * x).exp(), 0.0), settings).unwrap();
        assert!((v.value.re - 3.0 / 2f64.sqrt()).abs() <= 1e-10);
    }

    #[test]
    fn tolerance_refinement_is_consistent() {
        let f = |x: f64| (-PI * 0.7 * x * x).exp() * unit_phase(0.3 * x) * (1.0 + x * x);
        let s = |tol| QuadratureSettings::new(Envelope::new(0.5, 4.0), tol);
        for &tol in &[1e-6, 1e-8, 1e-10] {
            let a = integrate_decaying(f, s(tol)).unwrap();
            let b = integrate_decaying(f, s(tol / 10.0)).unwrap();
            assert!((a.value - b.value).norm() <= 1.1 * tol);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let f = |x: f64| Complex64::new((-PI * x * x).exp(), 0.0);
        assert!(integrate_decaying(f, gaussian_settings(0.0)).is_err());
        let bad = QuadratureSettings::new(Envelope::new(-1.0, 1.0), 1e-6);
        assert!(integrate_decaying(f, bad).is_err());
    }
}
