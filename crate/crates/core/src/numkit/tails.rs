use std::f64::consts::PI;

/// Multiplicative slack applied to every floating-point tail bound.
pub const ROUNDING_INFLATION: f64 = 1.0 + 1e-12;

/// Upper bound for `Σ_{|n|>N} exp(−π c n²)`.
///
/// Uses `e^{−πcM²} + ∫_M^∞ e^{−πcx²} dx ≤ e^{−πcM²}(1 + 1/(2πcM))` with `M = N+1`.
pub fn gaussian_tail_bound(c: f64, n: u64) -> f64 {
    assert!(c > 0.0, "decay rate must be positive");
    let m = n as f64 + 1.0;
    2.0 * (-PI * c * m * m).exp() * (1.0 + 1.0 / (2.0 * PI * c * m)) * ROUNDING_INFLATION
}

/// Upper bound for `Σ_{|n|>N} exp(−π c (n+δ)²)` valid for every `|δ| ≤ 1/2`.
pub fn shifted_gaussian_tail_bound(c: f64, n: u64) -> f64 {
    assert!(c > 0.0, "decay rate must be positive");
    let m = n as f64 + 0.5;
    2.0 * (-PI * c * m * m).exp() * (1.0 + 1.0 / (2.0 * PI * c * m)) * ROUNDING_INFLATION
}

/// Upper bound for the full lattice sum `Σ_n exp(−π c (n+δ)²)`, any real `δ`.
pub fn gaussian_sum_bound(c: f64) -> f64 {
    assert!(c > 0.0, "decay rate must be positive");
    (1.0 + 1.0 / c.sqrt()) * ROUNDING_INFLATION
}

/// Upper bound for `Σ_{|n|>N} |n| exp(−π c n²)`.
pub fn gaussian_moment_tail_bound(c: f64, n: u64) -> f64 {
    assert!(c > 0.0, "decay rate must be positive");
    let m = n as f64 + 1.0;
    let peak = 1.0 / (2.0 * PI * c).sqrt();
    let g = (-PI * c * m * m).exp();
    let one_side = if m >= peak {
        // x e^{−πcx²} is decreasing past the peak: first term plus integral
        g * (m + 1.0 / (2.0 * PI * c))
    } else {
        peak * (-0.5f64).exp() + g / (2.0 * PI * c)
    };
    2.0 * one_side * ROUNDING_INFLATION
}
