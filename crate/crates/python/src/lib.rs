//! Python bindings: configuration, the offline/online pipeline and a few
//! standalone numerical helpers.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use romcut::pipeline::{self, Config};
use romcut::RomError;

create_exception!(romcut_py, ConfigError, PyValueError, "Invalid configuration, missing model or store problem.");
create_exception!(romcut_py, NumericalError, PyRuntimeError, "Numerical failure during a solve or compression.");

fn to_py(e: RomError) -> PyErr {
    if e.is_config_error() {
        ConfigError::new_err(e.to_string())
    } else {
        NumericalError::new_err(e.to_string())
    }
}

/// Benchmark configuration.
#[pyclass(name = "Config", module = "romcut_py")]
struct PyConfig {
    inner: Config,
}

#[pymethods]
impl PyConfig {
    /// Defaults of the named benchmark (`"poisson"` or `"stokes"`).
    #[new]
    #[pyo3(signature = (problem = "poisson"))]
    fn new(problem: &str) -> PyResult<Self> {
        let inner = match problem {
            "poisson" => Config::poisson_benchmark(),
            "stokes" => Config::stokes_benchmark(),
            other => return Err(ConfigError::new_err(format!("unknown problem '{other}'"))),
        };
        Ok(PyConfig { inner })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Config::parse(text).map(|inner| PyConfig { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        Config::load(&path).map(|inner| PyConfig { inner }).map_err(to_py)
    }

    /// Sets one entry using the configuration-file syntax, then validates.
    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        let mut next = self.inner.clone();
        next.set(key, value).map_err(to_py)?;
        next.validate().map_err(to_py)?;
        self.inner = next;
        Ok(())
    }

    fn canonical(&self) -> String {
        self.inner.canonical()
    }

    fn model_hash(&self) -> String {
        self.inner.model_hash()
    }

    #[getter]
    fn output(&self) -> PathBuf {
        self.inner.output.clone()
    }

    #[setter]
    fn set_output(&mut self, path: PathBuf) {
        self.inner.output = path;
    }

    #[getter]
    fn tolerances(&self) -> Vec<f64> {
        self.inner.tolerances.clone()
    }

    #[getter]
    fn param_box(&self) -> (Vec<f64>, Vec<f64>) {
        (self.inner.param_lo.clone(), self.inner.param_hi.clone())
    }

    fn __repr__(&self) -> String {
        format!("Config(hash={})", &self.inner.model_hash()[..12])
    }
}

/// Full-order solve; returns the solution fields on the free dofs.
#[pyfunction]
#[pyo3(signature = (config, mu = None))]
fn run_fom(py: Python<'_>, config: &PyConfig, mu: Option<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let cfg = config.inner.clone();
    py.detach(move || pipeline::run_fom(&cfg, mu)).map(|s| s.fields).map_err(to_py)
}

/// Offline phase; returns `(snapshot_seconds, model_seconds, bounds_holding, bounds_total)`.
#[pyfunction]
fn run_offline(py: Python<'_>, config: &PyConfig) -> PyResult<(f64, f64, usize, usize)> {
    let cfg = config.inner.clone();
    let out = py.detach(move || pipeline::run_offline(&cfg)).map_err(to_py)?;
    let holding = out.bounds.iter().filter(|b| b.holds()).count();
    Ok((out.snapshot_seconds, out.model_seconds, holding, out.bounds.len()))
}

/// Online phase; returns `[(eps, [(mu, relative errors), ...]), ...]` and the report text.
#[pyfunction]
#[pyo3(signature = (config, mu = None))]
fn run_online(py: Python<'_>, config: &PyConfig, mu: Option<Vec<f64>>) -> PyResult<(Vec<(f64, Vec<(Vec<f64>, Vec<f64>)>)>, String)> {
    let cfg = config.inner.clone();
    let out = py.detach(move || pipeline::run_online(&cfg, mu)).map_err(to_py)?;
    let results = out.results.into_iter().map(|(eps, recs)| (eps, recs.into_iter().map(|r| (r.mu, r.errors)).collect())).collect();
    Ok((results, out.report))
}

#[pyfunction]
fn report(config: &PyConfig) -> PyResult<String> {
    pipeline::report(&config.inner).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (count, lo, hi, skip = 20))]
fn halton(count: usize, lo: Vec<f64>, hi: Vec<f64>, skip: usize) -> PyResult<Vec<Vec<f64>>> {
    pipeline::halton(count, &lo, &hi, skip).map_err(to_py)
}

/// Number of singular values kept at relative energy tolerance `eps`.
#[pyfunction]
fn energy_rank(sigma: Vec<f64>, eps: f64) -> usize {
    romcut::rom::energy_rank(&sigma, eps)
}

#[pymodule]
fn romcut_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(run_fom, m)?)?;
    m.add_function(wrap_pyfunction!(run_offline, m)?)?;
    m.add_function(wrap_pyfunction!(run_online, m)?)?;
    m.add_function(wrap_pyfunction!(report, m)?)?;
    m.add_function(wrap_pyfunction!(halton, m)?)?;
    m.add_function(wrap_pyfunction!(energy_rank, m)?)?;
    m.add("ConfigError", m.py().get_type::<ConfigError>())?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    Ok(())
}
