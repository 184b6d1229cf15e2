//! Python bindings for `rotalg`.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use rotalg::bounds::{self, OmegaMode, Perturbation};
use rotalg::cli::{self, selftest, Format, VerifyConfig};
use rotalg::diophantine;
use rotalg::frame::{self, FrameParams, GaussParams};
use rotalg::nctorus::{self, TwistedPoly};
use rotalg::theta::{theta_eval, ThetaKind, ThetaQuery};

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn kind_of(kind: u8) -> PyResult<ThetaKind> {
    match kind {
        2 => Ok(ThetaKind::Theta2),
        3 => Ok(ThetaKind::Theta3),
        k => Err(PyValueError::new_err(format!("theta kind must be 2 or 3, got {k}"))),
    }
}

/// ϑ₂ or ϑ₃ at `z` with `τ = i·t`; returns `(value, error_bound)`.
#[pyfunction]
#[pyo3(signature = (kind, z, t, tol=1e-15))]
fn theta(kind: u8, z: Complex64, t: f64, tol: f64) -> PyResult<(Complex64, f64)> {
    let q = ThetaQuery::new(kind_of(kind)?, z, Complex64::new(0.0, t), tol);
    let v = theta_eval(&q).map_err(value_err)?;
    Ok((v.value, v.tail_bound))
}

#[pyclass(name = "GaussParams", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGaussParams {
    inner: GaussParams,
}

#[pymethods]
impl PyGaussParams {
    #[staticmethod]
    fn from_beta(beta: f64) -> PyResult<Self> {
        Ok(Self {
            inner: GaussParams::from_beta(beta).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn from_alpha(alpha: f64) -> PyResult<Self> {
        Ok(Self {
            inner: GaussParams::from_alpha(alpha).map_err(value_err)?,
        })
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn t_alpha(&self) -> f64 {
        self.inner.t_alpha
    }

    #[pyo3(signature = (x, tol=1e-14))]
    fn h(&self, x: f64, tol: f64) -> PyResult<f64> {
        Ok(frame::h_eval(x, &self.inner, tol).map_err(value_err)?.re())
    }

    #[pyo3(signature = (s, t, tol=1e-14))]
    #[allow(non_snake_case)]
    fn H(&self, s: f64, t: f64, tol: f64) -> PyResult<Complex64> {
        Ok(frame::H_closed(s, t, &self.inner, tol).map_err(value_err)?.value)
    }

    #[pyo3(signature = (s, t, tol=1e-10))]
    #[allow(non_snake_case)]
    fn H_quad(&self, s: f64, t: f64, tol: f64) -> PyResult<Complex64> {
        Ok(frame::H_quad(s, t, &self.inner, tol).map_err(value_err)?.value)
    }

    /// `(inf, sup)` bounds of ψₙ (of |ψₙ| when n ≠ 0).
    #[pyo3(signature = (n, grid=1024))]
    fn psi_extrema(&self, n: i64, grid: usize) -> PyResult<(f64, f64)> {
        let e = frame::psi_extrema(n, &self.inner, grid).map_err(value_err)?;
        Ok((e.inf_bound, e.sup_bound))
    }

    #[pyo3(signature = (m, n, tol=1e-10))]
    fn orthogonality_residual(&self, m: i64, n: i64, tol: f64) -> PyResult<f64> {
        Ok(frame::orthogonality_residual(m, n, &self.inner, tol).map_err(value_err)?.abs())
    }

    fn c_q(&self) -> PyResult<f64> {
        Ok(bounds::c_q_from(&self.inner).map_err(value_err)?.value)
    }

    /// The element `b` as a twisted polynomial.
    #[pyo3(signature = (tol=1e-12))]
    fn build_b(&self, tol: f64) -> PyResult<PyTwistedPoly> {
        let b = bounds::build_b_from(&self.inner, tol).map_err(value_err)?;
        Ok(PyTwistedPoly { inner: b.poly })
    }

    fn __repr__(&self) -> String {
        format!("GaussParams(alpha={}, beta={})", self.inner.alpha, self.inner.beta)
    }
}

#[pyclass(name = "TwistedPoly", skip_from_py_object)]
#[derive(Clone)]
struct PyTwistedPoly {
    inner: TwistedPoly,
}

#[pymethods]
impl PyTwistedPoly {
    #[new]
    #[pyo3(signature = (twist, modulus=None))]
    fn new(twist: f64, modulus: Option<u64>) -> Self {
        Self {
            inner: TwistedPoly::new(twist, modulus),
        }
    }

    fn add_term(&mut self, m: i64, n: i64, c: Complex64) {
        self.inner.add_term(m, n, c);
    }

    fn get(&self, m: i64, n: i64) -> Complex64 {
        self.inner.get(m, n)
    }

    fn coeffs(&self) -> Vec<((i64, i64), Complex64)> {
        self.inner.coeffs().iter().map(|(k, v)| (*k, *v)).collect()
    }

    #[getter]
    fn twist(&self) -> f64 {
        self.inner.twist()
    }

    fn __mul__(&self, other: &Self) -> PyResult<Self> {
        Ok(Self {
            inner: nctorus::tp_mul(&self.inner, &other.inner).map_err(value_err)?,
        })
    }

    fn __add__(&self, other: &Self) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.add(&other.inner).map_err(value_err)?,
        })
    }

    fn __sub__(&self, other: &Self) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.sub(&other.inner).map_err(value_err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn adjoint(&self) -> Self {
        Self {
            inner: nctorus::tp_adjoint(&self.inner),
        }
    }

    /// The Fourier automorphism σ.
    fn fourier(&self) -> Self {
        Self {
            inner: nctorus::tp_fourier(&self.inner),
        }
    }

    fn flip(&self) -> Self {
        Self {
            inner: nctorus::tp_flip(&self.inner),
        }
    }

    fn l1(&self) -> f64 {
        nctorus::tp_l1(&self.inner)
    }

    fn max_coeff_diff(&self, other: &Self) -> f64 {
        self.inner.max_coeff_diff(&other.inner)
    }

    fn __repr__(&self) -> String {
        format!("TwistedPoly(twist={}, terms={})", self.inner.twist(), self.inner.len())
    }
}

#[pyclass(name = "Frame", frozen)]
struct PyFrame {
    inner: FrameParams,
}

#[pymethods]
impl PyFrame {
    #[getter]
    fn q(&self) -> String {
        self.inner.sc.q.to_string()
    }

    #[getter]
    fn p(&self) -> String {
        self.inner.sc.p.to_string()
    }

    #[getter]
    fn p0(&self) -> String {
        self.inner.p0.to_string()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.gp.alpha
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.gp.beta
    }

    #[getter]
    fn a(&self) -> f64 {
        self.inner.a_f64
    }

    #[getter]
    fn trace(&self) -> String {
        self.inner.trace.to_string()
    }

    #[getter]
    fn params(&self) -> PyGaussParams {
        PyGaussParams { inner: self.inner.gp }
    }

    /// Largest deviation of the lattice commutation phases from their targets.
    fn commutation_error(&self) -> f64 {
        let c = nctorus::commutation_report(&self.inner);
        [c.d_error, c.annihilation_error, c.mu_error, c.inv_q_error, c.cross_error, c.w_error]
            .into_iter()
            .fold(0.0, f64::max)
    }

    /// `ℓ¹` bound on `X − b` (`which = "X"`) or `Y − b`.
    #[pyo3(signature = (which, tol=1e-10))]
    fn perturbation_l1(&self, which: &str, tol: f64) -> PyResult<f64> {
        let w = match which {
            "X" => Perturbation::X,
            "Y" => Perturbation::Y,
            _ => return Err(PyValueError::new_err("which must be \"X\" or \"Y\"")),
        };
        let d = bounds::perturbed_minus_b(&self.inner, w, tol).map_err(value_err)?;
        Ok(nctorus::tp_l1(&d.poly))
    }

    /// All report columns for this frame, as a JSON object.
    #[pyo3(signature = (tol=1e-10))]
    fn evaluate(&self, tol: f64) -> PyResult<String> {
        let s = cli::evaluate_frame(&self.inner, tol).map_err(value_err)?;
        serde_json::to_string(&s.row()).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("Frame(q={}, beta={})", self.inner.sc.q, self.inner.gp.beta)
    }
}

/// Frames for the first `count` square convergents of θ.
#[pyfunction]
#[pyo3(signature = (theta, count=4, exponent=3.0, precision_bits=256))]
fn frames(theta: &str, count: usize, exponent: f64, precision_bits: u32) -> PyResult<Vec<PyFrame>> {
    let (value, _) = cli::resolve_theta(theta, precision_bits).map_err(value_err)?;
    let recs = diophantine::square_convergents(&value, count, exponent)
        .map_err(value_err)?
        .require(count)
        .map_err(value_err)?;
    recs.iter()
        .map(|r| {
            frame::make_frame(&cli::record_target(&value, r), r)
                .map(|inner| PyFrame { inner })
                .map_err(value_err)
        })
        .collect()
}

/// Square convergents of θ as `(p, q)` decimal strings, without requiring
/// that `count` are found.
#[pyfunction]
#[pyo3(signature = (theta, count=4, exponent=3.0, precision_bits=256))]
fn square_convergents(theta: &str, count: usize, exponent: f64, precision_bits: u32) -> PyResult<Vec<(String, String)>> {
    let (value, _) = cli::resolve_theta(theta, precision_bits).map_err(value_err)?;
    let s = diophantine::square_convergents(&value, count, exponent).map_err(value_err)?;
    Ok(s.records.iter().map(|r| (r.p.to_string(), r.q.to_string())).collect())
}

#[pyfunction]
#[pyo3(signature = (n, p0, q, brute=false))]
fn omega(n: [i64; 4], p0: i64, q: i64, brute: bool) -> PyResult<Complex64> {
    if q < 1 {
        return Err(PyValueError::new_err("q must be positive"));
    }
    let mode = if brute { OmegaMode::Brute } else { OmegaMode::Formula };
    Ok(bounds::omega(n, p0, q, mode))
}

/// Run the verification pipeline; returns the report rendered as `format`.
#[pyfunction]
#[pyo3(signature = (theta="pi-3", count=4, exponent=3.0, tol=1e-10, precision_bits=256, format="json", parallel=false))]
fn verify(
    theta: &str,
    count: usize,
    exponent: f64,
    tol: f64,
    precision_bits: u32,
    format: &str,
    parallel: bool,
) -> PyResult<String> {
    let fmt: Format = format.parse().map_err(value_err)?;
    let cfg = VerifyConfig {
        theta_expr: theta.into(),
        precision_bits,
        count,
        exponent,
        tol,
        formats: vec![fmt],
        output_path: None,
        parallel,
    };
    let report = cli::run_verify(&cfg).map_err(|e| PyRuntimeError::new_err(format!("{e} (exit code {})", e.exit_code())))?;
    Ok(cli::render(&report, fmt))
}

/// Runs every property suite; returns `(passed, summary text)`.
#[pyfunction]
fn run_selftest() -> (bool, String) {
    let s = selftest::selftest();
    (s.passed(), s.render())
}

#[pymodule]
pub fn rotalg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", cli::VERSION)?;
    m.add_class::<PyGaussParams>()?;
    m.add_class::<PyTwistedPoly>()?;
    m.add_class::<PyFrame>()?;
    m.add_function(wrap_pyfunction!(theta, m)?)?;
    m.add_function(wrap_pyfunction!(frames, m)?)?;
    m.add_function(wrap_pyfunction!(square_convergents, m)?)?;
    m.add_function(wrap_pyfunction!(omega, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(run_selftest, m)?)?;
    Ok(())
}
