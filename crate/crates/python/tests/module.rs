use pyo3::prelude::*;
use pyo3::types::PyComplex;
use pyo3::wrap_pymodule;

fn with_module<F: FnOnce(&Bound<'_, PyModule>) -> PyResult<()>>(f: F) {
    Python::initialize();
    Python::attach(|py| {
        let m = wrap_pymodule!(rotalg_py::rotalg_py)(py);
        let m = m.bind(py).cast::<PyModule>().expect("module").clone();
        f(&m).unwrap_or_else(|e| panic!("{e}"));
    });
}

#[test]
fn theta_and_params() {
    with_module(|m| {
        let (v, err): (num_complex::Complex64, f64) = m.getattr("theta")?.call1((3u8, PyComplex::from_doubles(m.py(), 0.0, 0.0), 1.0))?.extract()?;
        assert!((v.re - 1.0864348112133080).abs() < 1e-14 && err < 1e-14);
        let gp = m.getattr("GaussParams")?.call_method1("from_beta", (3.0,))?;
        let alpha: f64 = gp.getattr("alpha")?.extract()?;
        assert!((9.0 - 4.0 * (alpha * alpha + 1.0)).abs() < 1e-12);
        assert!(m.getattr("GaussParams")?.call_method1("from_beta", (1.5,)).is_err());
        Ok(())
    });
}

#[test]
fn twisted_poly_operations() {
    with_module(|m| {
        let cls = m.getattr("TwistedPoly")?;
        let g = cls.call1((0.25,))?;
        g.call_method1("add_term", (1i64, 0i64, PyComplex::from_doubles(m.py(), 1.0, 0.0)))?;
        let s = g.call_method0("fourier")?;
        let c: num_complex::Complex64 = s.call_method1("get", (0i64, 1i64))?.extract()?;
        assert_eq!(c, num_complex::Complex64::new(1.0, 0.0));
        let sq = g.call_method1("__mul__", (&g,))?;
        assert_eq!(sq.len()?, 1);
        let l1: f64 = sq.call_method0("l1")?.extract()?;
        assert!(l1 >= 1.0 && l1 < 1.0 + 1e-9);
        Ok(())
    });
}

#[test]
fn frames_and_verify() {
    with_module(|m| {
        let frames = m.getattr("frames")?.call1(("engineered:3.5", 1usize, 2.0))?;
        let f = frames.get_item(0)?;
        let q: String = f.getattr("q")?.extract()?;
        assert_eq!(q, "25");
        let err: f64 = f.call_method0("commutation_error")?.extract()?;
        assert!(err < 1e-12);
        let csv: String = m
            .getattr("verify")?
            .call1(("engineered:3.5", 1usize, 2.0, 1e-10, 256u32, "csv"))?
            .extract()?;
        assert_eq!(csv.lines().count(), 2);
        assert!(m.getattr("verify")?.call1(("pi-3", 0usize)).is_err());
        Ok(())
    });
}
