//! Python module `phasesim`.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ::phasesim::config::{parse_config, RunConfig};
use ::phasesim::model::{build_coupling_graph, mf_energy_minima, LatticeSpec};
use ::phasesim::runner::{self, observable_table, run_observables, Mode};
use ::phasesim::sampling::{sample_initial_config, ProductStateSpec, RngStream, StatePreset};
use ::phasesim::Error;

create_exception!(phasesim, PhasesimError, PyException);
create_exception!(phasesim, ConfigError, PhasesimError);
create_exception!(phasesim, CapacityError, PhasesimError);
create_exception!(phasesim, NumericError, PhasesimError);

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Syntax { .. } | Error::Config(_) => ConfigError::new_err(msg),
        Error::Capacity { .. } => CapacityError::new_err(msg),
        Error::Divergence { .. } | Error::Fit(_) => NumericError::new_err(msg),
        _ => PhasesimError::new_err(msg),
    }
}

fn mode(name: &str) -> PyResult<Mode> {
    Mode::parse(name).ok_or_else(|| ConfigError::new_err(format!("unknown mode {name:?}; use psa, mf or exact")))
}

/// A validated run configuration.
#[pyclass(name = "Config", module = "phasesim", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        parse_config(text).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| to_py(Error::Io(e)))?;
        Self::new(&text)
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.inner.n_qubits()
    }

    #[getter]
    fn n_traj(&self) -> u64 {
        self.inner.ensemble.n_traj
    }

    #[setter]
    fn set_n_traj(&mut self, n: u64) -> PyResult<()> {
        if n == 0 {
            return Err(ConfigError::new_err("n_traj must be >= 1"));
        }
        self.inner.ensemble.n_traj = n;
        Ok(())
    }

    #[getter]
    fn master_seed(&self) -> u64 {
        self.inner.ensemble.master_seed
    }

    #[setter]
    fn set_master_seed(&mut self, seed: u64) {
        self.inner.ensemble.master_seed = seed;
    }

    /// Mean-field coupling of the configured model.
    #[getter]
    fn eta(&self) -> PyResult<f64> {
        let graph = self.inner.graph().map_err(to_py)?;
        Ok(self.inner.model(&graph).map_err(to_py)?.eta)
    }

    fn __repr__(&self) -> String {
        format!("Config(L={}, n_traj={})", self.inner.n_qubits(), self.inner.ensemble.n_traj)
    }
}

/// Runs `mode` ("psa", "mf" or "exact") and returns `{column: values}` in CSV
/// column order.
#[pyfunction]
fn run<'py>(py: Python<'py>, mode_name: &str, config: &PyConfig) -> PyResult<Bound<'py, PyDict>> {
    let m = mode(mode_name)?;
    let cfg = config.inner.clone();
    let series = py.detach(|| run_observables(m, &cfg)).map_err(to_py)?;
    let table = observable_table(&series, &cfg.ensemble.observables);
    let out = PyDict::new(py);
    for (name, values) in table.header.into_iter().zip(table.columns) {
        out.set_item(name, values)?;
    }
    Ok(out)
}

/// Same as `run` but returns the CSV text.
#[pyfunction]
fn run_csv(py: Python<'_>, mode_name: &str, config: &PyConfig) -> PyResult<String> {
    let m = mode(mode_name)?;
    let cfg = config.inner.clone();
    py.detach(|| runner::run_to_csv(m, &cfg)).map_err(to_py)
}

/// Per-column `(name, max_abs, integrated)` deviations of two CSV texts.
#[pyfunction]
fn compare(a: &str, b: &str) -> PyResult<Vec<(String, f64, f64)>> {
    let cmp = runner::compare_csv(a, b).map_err(to_py)?;
    Ok(cmp.columns.into_iter().map(|c| (c.column, c.max_abs, c.integrated)).collect())
}

/// `(chi_max, s_max)` for a memory of `2^m` complex numbers.
#[pyfunction]
#[pyo3(signature = (m, n_sites, d = 2))]
fn budget(m: u32, n_sites: u64, d: u64) -> PyResult<(u128, f64)> {
    let b = runner::budget(m, n_sites, d).map_err(to_py)?;
    Ok((b.chi_max, b.s_max))
}

/// Edge count of the k-local open chain.
#[pyfunction]
fn chain_edge_count(n_qubits: usize, k: usize) -> PyResult<usize> {
    build_coupling_graph(&LatticeSpec::Chain1d { n_qubits, k })
        .map(|g| g.n_edges())
        .map_err(to_py)
}

/// Polar angles of the mean-field energy minima (at `phi = 0`).
#[pyfunction]
fn energy_minima(h: f64, n_qubits: usize, eta: f64) -> Vec<f64> {
    mf_energy_minima(h, n_qubits, eta)
}

/// One sampled initial Bloch configuration of a preset product state.
#[pyfunction]
fn sample_initial(preset: &str, n_qubits: usize, master_seed: u64, trajectory: u64) -> PyResult<Vec<[f64; 3]>> {
    let p = StatePreset::parse(preset).ok_or_else(|| ConfigError::new_err(format!("unknown preset {preset:?}")))?;
    sample_initial_config(&ProductStateSpec::Preset(p), n_qubits, RngStream::new(master_seed, trajectory))
        .map(|b| b.0)
        .map_err(to_py)
}

#[pymodule]
fn phasesim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_csv, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(budget, m)?)?;
    m.add_function(wrap_pyfunction!(chain_edge_count, m)?)?;
    m.add_function(wrap_pyfunction!(energy_minima, m)?)?;
    m.add_function(wrap_pyfunction!(sample_initial, m)?)?;
    let py = m.py();
    m.add("PhasesimError", py.get_type::<PhasesimError>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add("CapacityError", py.get_type::<CapacityError>())?;
    m.add("NumericError", py.get_type::<NumericError>())?;
    Ok(())
}
