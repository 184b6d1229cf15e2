//! Scalar plumbing shared by every other module: extended-precision reals,
//! certified values, Gaussian tail bounds and a Gaussian-envelope quadrature.

mod bigreal;
mod parse;
mod quad;
mod tails;

pub use bigreal::{BigReal, DEFAULT_PRECISION_BITS, MIN_PRECISION_BITS};
pub use parse::{parse_real, parse_unit_interval, NAMED_CONSTANTS};
pub use quad::{integrate_decaying, Envelope, QuadratureSettings, MAX_REFINEMENTS};
pub use tails::{
    gaussian_moment_tail_bound, gaussian_sum_bound, gaussian_tail_bound,
    shifted_gaussian_tail_bound, ROUNDING_INFLATION,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumError {
    #[error("cannot parse real expression {0:?}")]
    Unparsable(String),
    #[error("value {0} is outside the open unit interval")]
    OutsideUnitInterval(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of a negative number")]
    NegativeSqrt,
    #[error("non-finite input")]
    NonFinite,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("quadrature did not converge after {refinements} refinements (last change {last_change:e}); the integrand probably violates its envelope")]
    NoConvergence { refinements: u32, last_change: f64 },
}

/// A value paired with a bound on its truncation error.
///
/// `|true value − value| ≤ tail_bound`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifiedValue {
    pub value: Complex64,
    pub tail_bound: f64,
    pub terms_used: usize,
}

impl CertifiedValue {
    pub fn new(value: Complex64, tail_bound: f64, terms_used: usize) -> Self {
        debug_assert!(tail_bound >= 0.0);
        Self {
            value,
            tail_bound,
            terms_used,
        }
    }

    pub fn real(value: f64, tail_bound: f64, terms_used: usize) -> Self {
        Self::new(Complex64::new(value, 0.0), tail_bound, terms_used)
    }

    pub fn re(&self) -> f64 {
        self.value.re
    }

    pub fn im(&self) -> f64 {
        self.value.im
    }

    pub fn abs(&self) -> f64 {
        self.value.norm()
    }

    /// Upper bound on the modulus of the true value.
    pub fn abs_upper(&self) -> f64 {
        self.value.norm() + self.tail_bound
    }

    /// Lower bound on the real part of the true value.
    pub fn re_lower(&self) -> f64 {
        self.value.re - self.tail_bound
    }

    pub fn re_upper(&self) -> f64 {
        self.value.re + self.tail_bound
    }

    /// Product with error propagation `|a||eb| + |b||ea| + ea·eb`.
    pub fn mul(&self, other: &Self) -> Self {
        let tail = self.abs() * other.tail_bound
            + other.abs() * self.tail_bound
            + self.tail_bound * other.tail_bound;
        Self::new(
            self.value * other.value,
            tail * ROUNDING_INFLATION,
            self.terms_used + other.terms_used,
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(
            self.value + other.value,
            (self.tail_bound + other.tail_bound) * ROUNDING_INFLATION,
            self.terms_used + other.terms_used,
        )
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self::new(
            self.value * factor,
            self.tail_bound * factor.norm() * ROUNDING_INFLATION,
            self.terms_used,
        )
    }

    /// Whether `other`'s true value can coincide with ours within `slack`.
    pub fn agrees_with(&self, other: &Self, slack: f64) -> bool {
        (self.value - other.value).norm() <= self.tail_bound + other.tail_bound + slack
    }
}

/// `e(x) = exp(2πix)`.
pub fn unit_phase(x: f64) -> Complex64 {
    let angle = std::f64::consts::TAU * x.rem_euclid(1.0);
    Complex64::new(angle.cos(), angle.sin())
}

/// `exp(w) − 1` without cancellation for small complex `w`.
pub fn expm1_complex(w: Complex64) -> Complex64 {
    let em1 = w.re.exp_m1();
    let half = (w.im * 0.5).sin();
    let cos_m1 = -2.0 * half * half;
    let re = em1 * w.im.cos() + cos_m1;
    let im = (em1 + 1.0) * w.im.sin();
    Complex64::new(re, im)
}
