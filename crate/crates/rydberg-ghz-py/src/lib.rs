//! Python module `pyrydberg`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyComplex, PyDict, PyFloat, PyInt, PyString};

use rydberg_ghz::experiment::config::{resolve, Parameters};
use rydberg_ghz::experiment::{self as exp, ExperimentConfig, ExperimentName, RunOptions};
use rydberg_ghz::noise::{interaction_fluctuation, vdw_interaction, VdwGeometry};
use rydberg_ghz::protocol::{run_protocol, RunResult, SERIES_NAMES};
use rydberg_ghz::tensor::BasisLabel;
use rydberg_ghz::units::{c6_from_ghz, to_mhz, to_ns};
use rydberg_ghz::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, value: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (value.to_string(),))
}

const INTEGER_KEYS: [&str; 2] = ["N", "outputs_per_stage"];

/// Keyword arguments use the config-file key names, e.g. `N=3, lambda=5.0, kappa_over_V=1e-5`.
fn parameters_from_kwargs(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Parameters> {
    let mut table = toml::Table::new();
    if let Some(kw) = kwargs {
        for (k, v) in kw.iter() {
            let key: String = k.extract()?;
            let value = if v.is_instance_of::<PyString>() {
                toml::Value::String(v.extract()?)
            } else if INTEGER_KEYS.contains(&key.as_str()) && v.is_instance_of::<PyInt>() {
                toml::Value::Integer(v.extract()?)
            } else if v.is_instance_of::<PyInt>() || v.is_instance_of::<PyFloat>() {
                toml::Value::Float(v.extract()?)
            } else {
                return Err(PyValueError::new_err(format!("unsupported value for {key}")));
            };
            table.insert(key, value);
        }
    }
    toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| PyValueError::new_err(e.to_string()))
}

/// Result of one protocol run.
#[pyclass(name = "Run", frozen)]
struct PyRun {
    inner: RunResult,
}

#[pymethods]
impl PyRun {
    #[getter]
    fn n_atoms(&self) -> usize {
        self.inner.plan.n_atoms
    }

    /// `{"purity", "overlap", "best_phase"}` at the end of the run.
    #[getter]
    fn fidelity<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        d.set_item("purity", self.inner.fidelity.purity)?;
        d.set_item("overlap", self.inner.fidelity.overlap)?;
        d.set_item("best_phase", self.inner.fidelity.best_phase)?;
        Ok(d)
    }

    #[getter]
    fn target_phase(&self) -> f64 {
        self.inner.target.phase
    }

    #[getter]
    fn times_ns(&self) -> Vec<f64> {
        self.inner.times.iter().map(|&t| to_ns(t)).collect()
    }

    #[getter]
    fn series_names(&self) -> Vec<&'static str> {
        SERIES_NAMES.to_vec()
    }

    fn series(&self, name: &str) -> PyResult<Vec<f64>> {
        self.inner.series(name).map(<[f64]>::to_vec).ok_or_else(|| PyValueError::new_err(format!("no series {name:?}")))
    }

    /// Value of a series at the end of the protocol, before any hold.
    fn protocol_end(&self, name: &str) -> PyResult<f64> {
        self.inner.protocol_end(name).ok_or_else(|| PyValueError::new_err(format!("no series {name:?}")))
    }

    /// `(labels, rho)` on the support of the final state.
    fn density_matrix<'py>(&self, py: Python<'py>) -> PyResult<(Vec<String>, Vec<Vec<Bound<'py, PyComplex>>>)> {
        let n = self.inner.plan.n_atoms;
        let states = self.inner.final_state.subspace.states().to_vec();
        let labels = states
            .iter()
            .map(|&s| BasisLabel::from_index(s, n).map(|l| l.to_string()).map_err(py_err))
            .collect::<PyResult<Vec<_>>>()?;
        let rows = states
            .iter()
            .map(|&i| {
                states
                    .iter()
                    .map(|&j| {
                        let z = self.inner.final_state.element(i, j);
                        PyComplex::from_doubles(py, z.re, z.im)
                    })
                    .collect()
            })
            .collect();
        Ok((labels, rows))
    }

    fn diagnostics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &serde_json::to_value(&self.inner.diagnostics).map_err(|e| PyRuntimeError::new_err(e.to_string()))?)
    }

    fn to_json(&self) -> String {
        self.inner.to_json().to_string()
    }

    fn __repr__(&self) -> String {
        format!(
            "Run(N={}, lambda={}, model={:?}, F_best={:.6})",
            self.inner.plan.n_atoms, self.inner.plan.lambda, self.inner.plan.model, self.inner.fidelity.best_phase
        )
    }
}

/// Grid of runs from an experiment config.
#[pyclass(name = "Sweep", frozen)]
struct PySweep {
    inner: exp::SweepResult,
}

#[pymethods]
impl PySweep {
    #[getter]
    fn axes(&self) -> Vec<&'static str> {
        self.inner.axes.clone()
    }

    fn summary_csv(&self) -> String {
        self.inner.summary_csv()
    }

    /// One dict per grid point with `axes` and `metrics`.
    fn rows<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.inner.summary_json()["rows"])
    }

    fn run(&self, index: usize) -> PyResult<PyRun> {
        self.inner
            .rows
            .get(index)
            .map(|r| PyRun { inner: r.run.clone() })
            .ok_or_else(|| pyo3::exceptions::PyIndexError::new_err(index))
    }

    fn write(&self, dir: &str, formats: Option<Vec<String>>) -> PyResult<Vec<String>> {
        let formats = formats
            .unwrap_or_else(|| vec!["csv".into()])
            .iter()
            .map(|f| f.parse().map_err(py_err))
            .collect::<PyResult<Vec<exp::Format>>>()?;
        let files = exp::write_outputs(&self.inner, std::path::Path::new(dir), &formats).map_err(py_err)?;
        Ok(files.into_iter().map(|p| p.display().to_string()).collect())
    }

    fn __len__(&self) -> usize {
        self.inner.rows.len()
    }
}

#[pyfunction]
fn list_experiments() -> Vec<(&'static str, &'static str)> {
    exp::list_experiments()
}

#[pyfunction]
fn default_config(name: &str) -> PyResult<String> {
    let name: ExperimentName = name.parse().map_err(py_err)?;
    Ok(exp::default_config(name).map_err(py_err)?.to_toml())
}

/// Runs one protocol; keywords are config-file parameter keys.
#[pyfunction]
#[pyo3(signature = (**params))]
fn simulate(py: Python<'_>, params: Option<&Bound<'_, PyDict>>) -> PyResult<PyRun> {
    let p = parameters_from_kwargs(params)?;
    let r = resolve(&p).map_err(py_err)?;
    let inner = py.detach(|| run_protocol(&r.plan, &r.noise, &r.errors)).map_err(py_err)?;
    Ok(PyRun { inner })
}

/// Runs an experiment config given as TOML text.
#[pyfunction]
#[pyo3(signature = (config, threads=None, model=None))]
fn run_experiment(py: Python<'_>, config: &str, threads: Option<usize>, model: Option<&str>) -> PyResult<PySweep> {
    let cfg = ExperimentConfig::parse(config).map_err(py_err)?;
    let model = model.map(|m| m.parse().map_err(py_err)).transpose()?;
    let opts = RunOptions { threads, model, formats: None };
    let inner = py.detach(|| exp::run_experiment(&cfg, &opts)).map_err(py_err)?;
    Ok(PySweep { inner })
}

/// Oracle report as a dict; `report["passed"]` is the verdict.
#[pyfunction]
fn verify<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ExperimentConfig::parse(config).map_err(py_err)?;
    let report = py.detach(|| exp::verify(&cfg, &RunOptions::default())).map_err(py_err)?;
    py.import("json")?.call_method1("loads", (report.to_json(),))
}

/// `V/2π` in MHz for `C₆/2π` in GHz·μm⁶ and `d` in μm.
#[pyfunction]
fn vdw_interaction_mhz(c6_over_2pi_ghz_um6: f64, d_um: f64) -> PyResult<f64> {
    let g = VdwGeometry::new(c6_from_ghz(c6_over_2pi_ghz_um6), d_um).map_err(py_err)?;
    Ok(to_mhz(vdw_interaction(&g)))
}

/// `δV/2π` in MHz for a spacing change `delta_d_um`.
#[pyfunction]
fn interaction_fluctuation_mhz(c6_over_2pi_ghz_um6: f64, d_um: f64, delta_d_um: f64) -> PyResult<f64> {
    let g = VdwGeometry::new(c6_from_ghz(c6_over_2pi_ghz_um6), d_um).map_err(py_err)?;
    Ok(to_mhz(interaction_fluctuation(&g, delta_d_um).map_err(py_err)?))
}

#[pymodule]
fn pyrydberg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyRun>()?;
    m.add_class::<PySweep>()?;
    m.add_function(wrap_pyfunction!(list_experiments, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(vdw_interaction_mhz, m)?)?;
    m.add_function(wrap_pyfunction!(interaction_fluctuation_mhz, m)?)?;
    Ok(())
}
