//! Python bindings. Thin wrappers around the core types plus a few one-call
//! entry points (run a config, measure kernel slopes) for notebook use.

use std::f64::consts::PI;
use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use whitham_lab::config::SolverConfig;
use whitham_lab::norms;
use whitham_lab::operators::{kernel_norm_study, whitham_m, Symbol};
use whitham_lab::picard;
use whitham_lab::spectral;

fn to_py(err: whitham_lab::Error) -> PyErr {
    PyValueError::new_err(err.to_string())
}

/// Uniform periodic grid on [-half_length, half_length).
#[pyclass(name = "Grid", frozen)]
struct PyGrid {
    inner: Arc<spectral::Grid>,
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(n: usize, half_length: f64) -> PyResult<Self> {
        Ok(PyGrid { inner: spectral::Grid::new(n, half_length).map_err(to_py)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn half_length(&self) -> f64 {
        self.inner.half_length()
    }

    #[getter]
    fn dx(&self) -> f64 {
        self.inner.dx()
    }

    fn points(&self) -> Vec<f64> {
        self.inner.points()
    }

    fn freqs(&self) -> Vec<f64> {
        self.inner.freqs().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("Grid(n={}, half_length={})", self.inner.n(), self.inner.half_length())
    }
}

/// Real field with cached spectral coefficients.
#[pyclass(name = "Field")]
struct PyField {
    inner: spectral::SpectralField,
}

#[pymethods]
impl PyField {
    #[new]
    fn new(grid: PyRef<'_, PyGrid>, samples: Vec<f64>) -> PyResult<Self> {
        let inner = spectral::SpectralField::from_samples(&grid.inner, samples).map_err(to_py)?;
        Ok(PyField { inner })
    }

    fn samples(&mut self) -> Vec<f64> {
        self.inner.samples().to_vec()
    }

    /// Coefficients as (re, im) pairs in grid slot order.
    fn coeffs(&mut self) -> Vec<(f64, f64)> {
        self.inner.coeffs().iter().map(|c| (c.re, c.im)).collect()
    }

    fn l2_norm(&mut self) -> f64 {
        self.inner.l2_norm()
    }

    fn max_abs(&mut self) -> f64 {
        self.inner.max_abs()
    }

    fn tail_fraction(&mut self) -> f64 {
        self.inner.tail_fraction()
    }

    fn hs_norm(&mut self, sigma: f64) -> f64 {
        norms::hs_norm(&mut self.inner, sigma)
    }

    fn n_norm(&mut self) -> f64 {
        norms::n_norm(&mut self.inner)
    }
}

/// Dispersion symbol sqrt((1 + xi^2) tanh(xi) / xi).
#[pyfunction]
fn symbol(xi: f64) -> f64 {
    whitham_m(xi)
}

/// Gaussian spectral mollification with width eps; eps = 0 is the identity.
#[pyfunction]
fn mollify(field: PyRef<'_, PyField>, eps: f64) -> PyResult<PyField> {
    Ok(PyField { inner: picard::mollify(&field.inner, eps).map_err(to_py)? })
}

/// L^2, dissipation, sup, and homogeneous Sobolev norms in one dict.
#[pyfunction]
fn field_norms<'py>(
    py: Python<'py>,
    mut field: PyRefMut<'_, PyField>,
    exponents: Vec<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let report = norms::compute_norms(&mut field.inner, &exponents);
    let d = PyDict::new(py);
    d.set_item("l2", report.l2)?;
    d.set_item("n_norm", report.n_norm)?;
    d.set_item("linf", report.linf)?;
    d.set_item("hs", report.hs)?;
    Ok(d)
}

/// Ratio of ||f||_{Hdot^s} to the L^2/Hdot^{1/2} interpolation bound.
#[pyfunction]
fn interpolation_ratio(mut field: PyRefMut<'_, PyField>, s: f64) -> PyResult<f64> {
    norms::check_interpolation_s(&mut field.inner, s).map_err(to_py)
}

/// Parse a TOML config, run it, and return the observable series.
#[pyfunction]
fn run_from_toml<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyDict>> {
    let cfg = SolverConfig::from_toml(text).map_err(to_py)?;
    let record = whitham_lab::evolve::run(&cfg).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("final_time", record.final_time)?;
    d.set_item("steps", record.steps)?;
    d.set_item("times", record.series.iter().map(|p| p.t).collect::<Vec<_>>())?;
    d.set_item("l2", record.series.iter().map(|p| p.norms.l2).collect::<Vec<_>>())?;
    d.set_item("linf", record.series.iter().map(|p| p.norms.linf).collect::<Vec<_>>())?;
    d.set_item("nonlin_residual_max", record.nonlin_residual_max)?;
    d.set_item("tail_fraction_max", record.tail_fraction_max)?;
    let last = record.snapshots.last();
    d.set_item("final_samples", last.map(|s| s.samples.clone()).unwrap_or_default())?;
    Ok(d)
}

/// Log-log decay rate of semigroup kernel L^2 norms over tau in
/// [1e-4, 1e-1], measured on a grid that resolves the smallest tau.
#[pyfunction]
fn kernel_slope<'py>(
    py: Python<'py>,
    generator: &str,
    derivative_order: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let gen = match generator {
        "quartic" => Symbol::Quartic,
        "heat" => Symbol::HeatSq,
        "hyperviscous" => Symbol::HyperviscousL,
        other => return Err(PyValueError::new_err(format!("unknown generator '{other}'"))),
    };
    let grid = spectral::Grid::new(4096, 32.0 * PI).map_err(to_py)?;
    let taus: Vec<f64> = (0..13).map(|i| 1e-4 * 10f64.powf(3.0 * i as f64 / 12.0)).collect();
    let study = kernel_norm_study(&grid, gen, derivative_order, &taus).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("slope", study.slope_l2)?;
    d.set_item("const", study.const_l2)?;
    d.set_item("max_l1", study.max_l1)?;
    Ok(d)
}

/// Largest horizon on which the contraction hypotheses hold.
#[pyfunction]
fn admissible_horizon(eps: f64, delta: f64, c_lin: f64, c_bil: f64) -> PyResult<f64> {
    picard::admissible_horizon(eps, delta, c_lin, c_bil).map_err(to_py)
}

/// Measured constant in the linear space-time bound for a given grid.
#[pyfunction]
fn duality_constant(grid: PyRef<'_, PyGrid>) -> f64 {
    picard::duality_constant(&grid.inner)
}

#[pymodule]
fn whitham_lab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyField>()?;
    m.add_function(wrap_pyfunction!(symbol, m)?)?;
    m.add_function(wrap_pyfunction!(mollify, m)?)?;
    m.add_function(wrap_pyfunction!(field_norms, m)?)?;
    m.add_function(wrap_pyfunction!(interpolation_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(run_from_toml, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_slope, m)?)?;
    m.add_function(wrap_pyfunction!(admissible_horizon, m)?)?;
    m.add_function(wrap_pyfunction!(duality_constant, m)?)?;
    Ok(())
}
