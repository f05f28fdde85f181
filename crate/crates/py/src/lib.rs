//! Python bindings: run configuration driven commands, flux operator
//! persistence and application, rank selection and the patch-test solution.

use std::path::PathBuf;

use partflux::cli::{self, RunConfig};
use partflux::linalg;
use partflux::mesh::Subdomain;
use partflux::scenarios::{side_of, PatchScenario};
use partflux::surrogate::{rkoi, DmdFluxOperator, RkoiOptions};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict, PyList, PyTuple};

create_exception!(partflux_py, PartfluxError, PyException, "Error raised by the partflux core.");

fn err(e: partflux::Error) -> PyErr {
    PartfluxError::new_err(format!("[{}] {e}", e.class()))
}

/// Builds a config from defaults plus a `key -> value` mapping. Sequence
/// values are joined with commas, others go through `str`.
fn config(values: Option<&Bound<'_, PyDict>>) -> PyResult<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(values) = values {
        for (key, value) in values.iter() {
            let key: String = key.extract()?;
            let text = if value.is_instance_of::<PyList>() || value.is_instance_of::<PyTuple>() {
                value
                    .try_iter()?
                    .map(|v| Ok(v?.str()?.to_string()))
                    .collect::<PyResult<Vec<_>>>()?
                    .join(",")
            } else {
                value.str()?.to_string()
            };
            cfg.set(&key, &text).map_err(err)?;
        }
    }
    Ok(cfg)
}

/// Config keys accepted by the command functions.
#[pyfunction]
fn config_keys() -> Vec<&'static str> {
    RunConfig::KEYS.to_vec()
}

/// Trains operators for every configured parameter sample; returns the manifest.
#[pyfunction]
#[pyo3(signature = (config=None))]
fn train<'py>(py: Python<'py>, config: Option<&Bound<'py, PyDict>>) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = self::config(config)?;
    let entries = py.detach(|| cli::train(&cfg)).map_err(err)?;
    entries
        .into_iter()
        .map(|e| {
            let d = PyDict::new(py);
            d.set_item("file", e.file)?;
            d.set_item("mu", (e.mu[0], e.mu[1]))?;
            d.set_item("rank", e.rank)?;
            d.set_item("eps", e.eps)?;
            Ok(d)
        })
        .collect()
}

/// Runs the configured scheme and writes its output files.
#[pyfunction]
#[pyo3(signature = (config=None))]
fn solve<'py>(py: Python<'py>, config: Option<&Bound<'py, PyDict>>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = self::config(config)?;
    let report = py.detach(|| cli::solve(&cfg)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("scheme", report.run.scheme.as_str())?;
    d.set_item("steps", report.run.steps)?;
    d.set_item("t_final", report.run.t_final)?;
    d.set_item("online_seconds", report.run.online_seconds)?;
    d.set_item("sync_seconds", report.run.sync_seconds)?;
    d.set_item("left", report.run.nodal[0].as_slice().to_vec())?;
    d.set_item("right", report.run.nodal[1].as_slice().to_vec())?;
    let files: Vec<String> = report.files.iter().map(|f| f.display().to_string()).collect();
    d.set_item("files", files)?;
    Ok(d)
}

/// Errors and timings of every scheme against the monolithic benchmark.
#[pyfunction]
#[pyo3(signature = (config=None))]
fn compare<'py>(py: Python<'py>, config: Option<&Bound<'py, PyDict>>) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = self::config(config)?;
    let rows = py.detach(|| cli::compare(&cfg)).map_err(err)?;
    rows.into_iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("scheme", r.scheme.as_str())?;
            d.set_item("n", r.n)?;
            d.set_item("mu", (r.mu[0], r.mu[1]))?;
            d.set_item("e0", r.e0)?;
            d.set_item("e1", r.e1)?;
            d.set_item("online_seconds", r.online_seconds)?;
            d.set_item("speedup", r.speedup)?;
            Ok(d)
        })
        .collect()
}

/// Median synchronization timings of the partitioned schemes.
#[pyfunction]
#[pyo3(name = "bench", signature = (config=None))]
fn run_bench<'py>(py: Python<'py>, config: Option<&Bound<'py, PyDict>>) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = self::config(config)?;
    let rows = py.detach(|| cli::bench(&cfg)).map_err(err)?;
    rows.into_iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("scheme", r.scheme.as_str())?;
            d.set_item("n", r.n)?;
            d.set_item("steps", r.steps)?;
            d.set_item("sync_seconds", r.sync_seconds)?;
            d.set_item("online_seconds", r.online_seconds)?;
            Ok(d)
        })
        .collect()
}

/// Smallest rank whose discarded energy fraction is at most `eps`.
#[pyfunction]
fn select_rank(sigma: Vec<f64>, eps: f64) -> PyResult<usize> {
    linalg::select_rank(&sigma, eps).map_err(err)
}

/// Discarded energy fraction when keeping `k` singular values.
#[pyfunction]
fn energy_deficit(sigma: Vec<f64>, k: usize) -> f64 {
    linalg::energy_deficit(&sigma, k)
}

/// Exact patch-test solution at `(x, y, t)` for diffusivities `(mu1, mu2)`.
#[pyfunction]
fn patch_exact(mu1: f64, mu2: f64, x: f64, y: f64, t: f64) -> PyResult<f64> {
    let s = PatchScenario::new(mu1, mu2).map_err(err)?;
    let side: Subdomain = side_of(x);
    Ok(s.exact(side, x, y, t))
}

/// Trained interface-flux operator.
#[pyclass(name = "FluxOperator", module = "partflux_py", from_py_object)]
#[derive(Clone)]
struct PyFluxOperator {
    inner: DmdFluxOperator,
}

#[pymethods]
impl PyFluxOperator {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: cli::load_operator(&path).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(Self {
            inner: cli::operator_from_bytes(data).map_err(err)?,
        })
    }

    /// Tensor-product interpolation of corner operators at `mu`.
    #[staticmethod]
    fn interpolate(corners: Vec<PyFluxOperator>, mu: (f64, f64)) -> PyResult<Self> {
        let ops: Vec<DmdFluxOperator> = corners.into_iter().map(|c| c.inner).collect();
        Ok(Self {
            inner: rkoi(&ops, [mu.0, mu.1], RkoiOptions::default()).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        cli::save_operator(&self.inner, &path).map_err(err)
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &cli::operator_to_bytes(&self.inner))
    }

    /// Next multipliers from a staggered state of length `n_fs`.
    fn apply(&self, y: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.apply(&y).map_err(err)?.as_slice().to_vec())
    }

    /// Row-major dense matrix.
    fn to_dense(&self) -> Vec<Vec<f64>> {
        let a = self.inner.to_dense();
        a.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    fn densified(&self) -> Self {
        Self {
            inner: self.inner.densified(),
        }
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank()
    }

    #[getter]
    fn mu(&self) -> (f64, f64) {
        let mu = self.inner.mu();
        (mu[0], mu[1])
    }

    #[getter]
    fn eps(&self) -> f64 {
        self.inner.eps()
    }

    #[getter]
    fn n_gamma(&self) -> usize {
        self.inner.layout().n_gamma
    }

    #[getter]
    fn n_fs(&self) -> usize {
        self.inner.layout().n_fs()
    }

    #[getter]
    fn is_factored(&self) -> bool {
        self.inner.is_factored()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        let mu = self.inner.mu();
        format!(
            "FluxOperator(n_gamma={}, n_fs={}, rank={}, mu=({:e}, {:e}), eps={:e})",
            self.n_gamma(),
            self.n_fs(),
            self.inner.rank(),
            mu[0],
            mu[1],
            self.inner.eps()
        )
    }
}

#[pymodule]
fn partflux_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PartfluxError", m.py().get_type::<PartfluxError>())?;
    m.add_class::<PyFluxOperator>()?;
    m.add_function(wrap_pyfunction!(config_keys, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(run_bench, m)?)?;
    m.add_function(wrap_pyfunction!(select_rank, m)?)?;
    m.add_function(wrap_pyfunction!(energy_deficit, m)?)?;
    m.add_function(wrap_pyfunction!(patch_exact, m)?)?;
    Ok(())
}
