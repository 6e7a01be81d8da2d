//! Python bindings. Configurations are passed as the same JSON documents the
//! command-line tool reads.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use dirac_sea::action::{action_extended, action_quartic};
use dirac_sea::cli::problem_for;
use dirac_sea::kernels;
use dirac_sea::model::{Resolved, RunConfig};
use dirac_sea::oracle::{run_suite, KernelSet, SuiteOptions};
use dirac_sea::solve::{minimize_action, solve_critical, Mode};
use dirac_sea::variation;
use dirac_sea::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Validation { .. } | Error::Domain(_) | Error::Seam { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn resolve(config: &str) -> PyResult<(RunConfig, Resolved)> {
    let rc = RunConfig::from_json(config).map_err(to_py)?;
    let r = rc.resolve().map_err(to_py)?;
    Ok((rc, r))
}

/// Derived scalars and actions of a configuration.
#[pyfunction]
fn evaluate<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyDict>> {
    let (_, r) = resolve(config)?;
    let s = r.cfg.scalars();
    let d = PyDict::new(py);
    d.set_item("m3", s.m3)?;
    d.set_item("m5", s.m5)?;
    d.set_item("T", s.t)?;
    d.set_item("a_max", r.params.a_max)?;
    d.set_item("S_quartic", action_quartic(&r.cfg, r.params.a_max, &r.quad).map_err(to_py)?)?;
    d.set_item("S_ext", action_extended(&r.cfg, &r.params, &r.quad).map_err(to_py)?)?;
    Ok(d)
}

/// `V(m)` at each test mass; seams are evaluated as limits.
#[pyfunction]
fn variation_density(config: &str, masses: Vec<f64>) -> PyResult<Vec<f64>> {
    let (_, r) = resolve(config)?;
    py_map(&masses, |m| variation::seam_limit_density(m, &r.cfg, &r.params, &r.quad))
}

fn py_map(xs: &[f64], f: impl Fn(f64) -> dirac_sea::Result<f64>) -> PyResult<Vec<f64>> {
    xs.iter().map(|&x| f(x).map_err(to_py)).collect()
}

/// Critical points (or the minimizer when `minimize`) as JSON records.
#[pyfunction]
#[pyo3(signature = (config, minimize = false, seed = None))]
fn solve(py: Python<'_>, config: &str, minimize: bool, seed: Option<u64>) -> PyResult<Vec<String>> {
    let (rc, r) = resolve(config)?;
    let mode = if minimize { Mode::Minimize } else { Mode::CriticalPoint };
    let problem = problem_for(&rc, &r, mode, seed, None).map_err(to_py)?;
    let records = py
        .detach(|| match mode {
            Mode::CriticalPoint => solve_critical(&problem),
            Mode::Minimize => minimize_action(&problem).map(|r| vec![r]),
        })
        .map_err(to_py)?;
    Ok(records.iter().map(|r| r.to_json()).collect())
}

/// Oracle suite; returns `(passed, report_json)`.
#[pyfunction]
#[pyo3(signature = (seed = None))]
fn verify(py: Python<'_>, seed: Option<u64>) -> (bool, String) {
    let mut opts = SuiteOptions::default();
    if let Some(s) = seed {
        opts.seed = s;
    }
    let report = py.detach(|| run_suite(&KernelSet::standard(), &opts));
    (report.passed, report.to_json())
}

#[pyfunction]
fn j_kernel(a: f64, x: f64, y: f64) -> f64 {
    kernels::j_fn(a, x, y)
}

#[pyfunction]
fn k_kernel(a: f64, x: f64, y: f64) -> f64 {
    kernels::k_fn(a, x, y)
}

#[pyfunction]
fn h_kernel(a: f64, x: f64, y: f64) -> PyResult<f64> {
    kernels::h_fn(a, x, y).map_err(to_py)
}

#[pymodule]
fn dirac_sea_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(variation_density, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(j_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(k_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(h_kernel, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
