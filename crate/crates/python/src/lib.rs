//! Python bindings. Objectives and optimizers are selected by registry name
//! with keyword parameters; reports come back as plain dicts.

use btgd_core::minibatch::LeastSquaresSpec;
use btgd_core::registry::{FunctionConfig, OptimizerConfig};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::de::DeserializeOwned;
use serde::Serialize;

fn to_py_err(e: btgd_core::Error) -> PyErr {
    use btgd_core::Error::*;
    match e {
        InvalidParameter(_) | DimensionMismatch { .. } | NotASaddle(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn point(coords: Vec<f64>) -> PyResult<btgd_core::Point> {
    btgd_core::Point::new(coords).map_err(to_py_err)
}

/// Deserializes `{name: ..., **kwargs}` through the registry's serde tags.
fn from_kwargs<T: DeserializeOwned>(py: Python<'_>, name: &str, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<T> {
    let dict = match kwargs {
        Some(k) => k.copy()?,
        None => PyDict::new(py),
    };
    dict.set_item("name", name)?;
    let text: String = py.import("json")?.call_method1("dumps", (dict,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(format!("{name}: {e}")))
}

/// Serializes to JSON and parses it back with Python's `json` module.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(module = "btgd", frozen)]
struct Objective {
    config: FunctionConfig,
    inner: btgd_core::NamedObjective,
}

#[pymethods]
impl Objective {
    /// `Objective("holder", gamma=0.5)`, `Objective("quadratic", matrix=[[1, 0], [0, -1]])`.
    #[new]
    #[pyo3(signature = (name, **params))]
    fn new(py: Python<'_>, name: &str, params: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let config: FunctionConfig = from_kwargs(py, name, params)?;
        let inner = config.build().map_err(to_py_err)?;
        Ok(Self { config, inner })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn description(&self) -> String {
        self.inner.description.clone()
    }

    /// `[(point, kind), ...]` for the critical points known in closed form.
    #[getter]
    fn known_critical_points(&self) -> Vec<(Vec<f64>, String)> {
        self.inner.known_critical_points.iter().map(|(p, k)| (p.coords().to_vec(), k.to_string())).collect()
    }

    fn config<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.config)
    }

    fn value(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.field.value(&point(x)?).map_err(to_py_err)
    }

    fn gradient(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.field.gradient(&point(x)?).map_err(to_py_err)?.coords().to_vec())
    }

    fn __repr__(&self) -> String {
        format!("Objective({:?}, dim={})", self.inner.name, self.inner.dim())
    }
}

#[pyclass(module = "btgd", name = "LineSearchConfig", get_all, set_all)]
struct PyLineSearch {
    alpha: f64,
    beta: f64,
    delta0: f64,
    max_halvings: usize,
}

impl PyLineSearch {
    fn build(&self) -> PyResult<btgd_core::LineSearchConfig> {
        let cfg = btgd_core::LineSearchConfig::new(self.alpha, self.beta, self.delta0)
            .map_err(to_py_err)?
            .with_max_halvings(self.max_halvings);
        Ok(cfg)
    }
}

#[pymethods]
impl PyLineSearch {
    #[new]
    #[pyo3(signature = (alpha=0.5, beta=0.5, delta0=1.0, max_halvings=100))]
    fn new(alpha: f64, beta: f64, delta0: f64, max_halvings: usize) -> PyResult<Self> {
        let s = Self { alpha, beta, delta0, max_halvings };
        s.build()?;
        Ok(s)
    }

    fn __repr__(&self) -> String {
        format!("LineSearchConfig(alpha={}, beta={}, delta0={}, max_halvings={})", self.alpha, self.beta, self.delta0, self.max_halvings)
    }
}

fn line_search(cfg: Option<&PyLineSearch>) -> PyResult<btgd_core::LineSearchConfig> {
    cfg.map_or_else(|| Ok(btgd_core::LineSearchConfig::default()), |c| c.build())
}

#[pyclass(module = "btgd", name = "StopRule", get_all, set_all)]
struct PyStopRule {
    eps: f64,
    max_iters: usize,
    divergence_radius: f64,
}

impl PyStopRule {
    fn build(&self) -> PyResult<btgd_core::StopRule> {
        let rule = btgd_core::StopRule::new(self.eps, self.max_iters).map_err(to_py_err)?.with_divergence_radius(self.divergence_radius);
        rule.validate().map_err(to_py_err)?;
        Ok(rule)
    }
}

#[pymethods]
impl PyStopRule {
    #[new]
    #[pyo3(signature = (eps=1e-10, max_iters=10_000, divergence_radius=1e12))]
    fn new(eps: f64, max_iters: usize, divergence_radius: f64) -> PyResult<Self> {
        let s = Self { eps, max_iters, divergence_radius };
        s.build()?;
        Ok(s)
    }

    fn __repr__(&self) -> String {
        format!("StopRule(eps={}, max_iters={}, divergence_radius={})", self.eps, self.max_iters, self.divergence_radius)
    }
}

fn stop_rule(stop: Option<&PyStopRule>) -> PyResult<btgd_core::StopRule> {
    stop.map_or_else(|| Ok(btgd_core::StopRule::default()), |s| s.build())
}

#[pyclass(module = "btgd", frozen)]
struct Trajectory {
    inner: btgd_core::Trajectory,
}

#[pymethods]
impl Trajectory {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn termination(&self) -> String {
        self.inner.termination.to_string()
    }

    #[getter]
    fn non_finite(&self) -> bool {
        self.inner.non_finite
    }

    #[getter]
    fn points(&self) -> Vec<Vec<f64>> {
        self.inner.points().map(|p| p.coords().to_vec()).collect()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values()
    }

    #[getter]
    fn grad_norms(&self) -> Vec<f64> {
        self.inner.records.iter().map(|r| r.grad_norm).collect()
    }

    #[getter]
    fn step_sizes(&self) -> Vec<f64> {
        self.inner.records.iter().map(|r| r.step_size).collect()
    }

    #[getter]
    fn backtrack_counts(&self) -> Vec<usize> {
        self.inner.records.iter().map(|r| r.backtrack_count).collect()
    }

    /// Cumulative objective evaluations at each record.
    #[getter]
    fn func_evals(&self) -> Vec<usize> {
        self.inner.records.iter().map(|r| r.func_evals).collect()
    }

    #[getter]
    fn final_point(&self) -> Vec<f64> {
        self.inner.final_point().coords().to_vec()
    }

    #[getter]
    fn notes(&self) -> Vec<String> {
        self.inner.notes.clone()
    }

    #[getter]
    fn armijo_violations(&self) -> Vec<usize> {
        self.inner.armijo_violations.clone()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv_string()
    }

    fn stabilization<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &btgd_core::detect_stabilization(&self.inner))
    }

    fn convergence_report<'py>(&self, py: Python<'py>, objective: &Objective) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &btgd_core::convergence_report(&self.inner, &objective.inner.field).map_err(to_py_err)?)
    }

    fn __repr__(&self) -> String {
        format!("Trajectory(len={}, termination={})", self.inner.len(), self.inner.termination)
    }
}

/// Names accepted by `Objective(...)` and `run(...)`.
#[pyfunction]
fn names<'py>(py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("functions", PyList::new(py, FunctionConfig::NAMES)?)?;
    d.set_item("optimizers", PyList::new(py, OptimizerConfig::NAMES)?)?;
    Ok(d)
}

/// Runs the named optimizer; keyword arguments are its hyper-parameters,
/// e.g. `run(f, [1.0], "standard_gd", delta=0.1)`.
#[pyfunction]
#[pyo3(signature = (objective, z0, optimizer="backtracking_gd", stop=None, **params))]
fn run(
    py: Python<'_>,
    objective: &Objective,
    z0: Vec<f64>,
    optimizer: &str,
    stop: Option<&PyStopRule>,
    params: Option<&Bound<'_, PyDict>>,
) -> PyResult<Trajectory> {
    let cfg: OptimizerConfig = from_kwargs(py, optimizer, params)?;
    let z0 = point(z0)?;
    let stop = stop_rule(stop)?;
    let f = &objective.inner.field;
    let inner = py.detach(|| cfg.run(f, &z0, &stop)).map_err(to_py_err)?;
    Ok(Trajectory { inner })
}

/// Armijo backtracking from δ₀ along −∇f(x). Returns `(sigma, trials)`.
#[pyfunction]
#[pyo3(signature = (objective, x, config=None))]
fn backtrack(objective: &Objective, x: Vec<f64>, config: Option<&PyLineSearch>) -> PyResult<(f64, usize)> {
    let r = btgd_core::backtrack(&objective.inner.field, &point(x)?, &line_search(config)?).map_err(to_py_err)?;
    Ok((r.sigma, r.trials))
}

/// Two-way search started from `prev_sigma`. Returns `(sigma, trials)`.
#[pyfunction]
#[pyo3(signature = (objective, x, prev_sigma, config=None))]
fn two_way_backtrack(objective: &Objective, x: Vec<f64>, prev_sigma: f64, config: Option<&PyLineSearch>) -> PyResult<(f64, usize)> {
    let r = btgd_core::two_way_backtrack(&objective.inner.field, &point(x)?, prev_sigma, &line_search(config)?)
        .map_err(to_py_err)?;
    Ok((r.sigma, r.trials))
}

/// `{"kind": ..., "eigenvalues": [...], "grad_norm": ...}` at `x`.
#[pyfunction]
fn classify<'py>(py: Python<'py>, objective: &Objective, x: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &btgd_core::classify(&objective.inner.field, &point(x)?).map_err(to_py_err)?)
}

#[pyfunction]
fn projective_dist(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    btgd_core::projective_dist(&point(x)?, &point(y)?).map_err(to_py_err)
}

/// Fraction of Backtracking GD runs from B(saddle, eps) that escape the saddle.
#[pyfunction]
#[pyo3(signature = (objective, saddle, eps=0.1, n_samples=1000, seed=1, burn_in=10, exclusion_ratio=0.01, config=None, stop=None))]
#[allow(clippy::too_many_arguments)]
fn saddle_basin_fraction(
    py: Python<'_>,
    objective: &Objective,
    saddle: Vec<f64>,
    eps: f64,
    n_samples: usize,
    seed: u64,
    burn_in: usize,
    exclusion_ratio: f64,
    config: Option<&PyLineSearch>,
    stop: Option<&PyStopRule>,
) -> PyResult<f64> {
    let mc = btgd_core::SaddleMcConfig { eps, n_samples, seed, burn_in, exclusion_ratio };
    let (saddle, cfg, stop) = (point(saddle)?, line_search(config)?, stop_rule(stop)?);
    let f = &objective.inner.field;
    py.detach(|| btgd_core::saddle_basin_fraction(f, &saddle, &mc, &cfg, &stop)).map_err(to_py_err)
}

/// Noiseless (by default) least-squares problem for the mini-batch tools.
#[pyclass(module = "btgd", frozen)]
struct LeastSquares {
    spec: LeastSquaresSpec,
    inner: btgd_core::MiniBatchProblem,
}

#[pymethods]
impl LeastSquares {
    #[new]
    #[pyo3(signature = (n_samples=100, dimension=2, noise=0.0, seed=7))]
    fn new(n_samples: usize, dimension: usize, noise: f64, seed: u64) -> PyResult<Self> {
        let spec = LeastSquaresSpec { n_samples, dimension, noise, seed };
        Ok(Self { spec, inner: spec.build().map_err(to_py_err)? })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn truth(&self) -> Option<Vec<f64>> {
        self.inner.truth().map(|t| t.coords().to_vec())
    }

    /// Mean loss over all samples.
    fn loss(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.full_objective().value(&point(x)?).map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        let s = &self.spec;
        format!("LeastSquares(n_samples={}, dimension={}, noise={}, seed={})", s.n_samples, s.dimension, s.noise, s.seed)
    }
}

fn parse_enum<T: DeserializeOwned>(value: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(value.to_string())).map_err(|e| PyValueError::new_err(format!("{value}: {e}")))
}

fn finder_line_search(config: Option<&PyLineSearch>) -> PyResult<btgd_core::LineSearchConfig> {
    config.map_or_else(|| Ok(btgd_core::MbtOptions::default_line_search()), |c| c.build())
}

/// Averaged per-batch step size. `mode` is "linear", "sqrt" or "none";
/// `search` is "two_way" or "backtrack".
#[pyfunction]
#[pyo3(signature = (problem, batch_size, seed=0, n_batches=20, at=None, mode="sqrt", search="two_way", config=None))]
#[allow(clippy::too_many_arguments)]
fn lr_finder<'py>(
    py: Python<'py>,
    problem: &LeastSquares,
    batch_size: usize,
    seed: u64,
    n_batches: usize,
    at: Option<Vec<f64>>,
    mode: &str,
    search: &str,
    config: Option<&PyLineSearch>,
) -> PyResult<Bound<'py, PyAny>> {
    let p = &problem.inner;
    let sampler = btgd_core::BatchSampler::new(p.len(), batch_size, seed).map_err(to_py_err)?;
    let at = match at {
        Some(v) => point(v)?,
        None => btgd_core::Point::zeros(p.dim()),
    };
    let (mode, search, cfg) = (parse_enum(mode)?, parse_enum(search)?, finder_line_search(config)?);
    let report = py.detach(|| btgd_core::lr_finder_with(p, &sampler, &cfg, n_batches, &at, mode, search)).map_err(to_py_err)?;
    to_py(py, &report)
}

/// Rescaled mean σ per (batch size, δ₀): rows follow `batch_sizes`.
#[pyfunction]
#[pyo3(signature = (problem, batch_sizes, deltas, seed=7, n_batches=20, mode="sqrt", search="two_way", config=None))]
#[allow(clippy::too_many_arguments)]
fn stability_sweep(
    py: Python<'_>,
    problem: &LeastSquares,
    batch_sizes: Vec<usize>,
    deltas: Vec<f64>,
    seed: u64,
    n_batches: usize,
    mode: &str,
    search: &str,
    config: Option<&PyLineSearch>,
) -> PyResult<Vec<Vec<f64>>> {
    let p = &problem.inner;
    let at = btgd_core::Point::zeros(p.dim());
    let (mode, search, cfg) = (parse_enum(mode)?, parse_enum(search)?, finder_line_search(config)?);
    py.detach(|| btgd_core::stability_sweep(p, seed, &batch_sizes, &deltas, &cfg, n_batches, &at, mode, search))
        .map_err(to_py_err)
}

/// Mini-batch training with the learning-rate finder. `kind` is "gd", "mmt" or "nag".
#[pyfunction]
#[pyo3(signature = (problem, kind, batch_size, z0=None, seed=0, epochs=200, gamma=0.9, config=None, stop=None))]
#[allow(clippy::too_many_arguments)]
fn run_mbt(
    py: Python<'_>,
    problem: &LeastSquares,
    kind: &str,
    batch_size: usize,
    z0: Option<Vec<f64>>,
    seed: u64,
    epochs: usize,
    gamma: f64,
    config: Option<&PyLineSearch>,
    stop: Option<&PyStopRule>,
) -> PyResult<Trajectory> {
    let p = &problem.inner;
    let sampler = btgd_core::BatchSampler::new(p.len(), batch_size, seed).map_err(to_py_err)?;
    let z0 = match z0 {
        Some(v) => point(v)?,
        None => btgd_core::Point::zeros(p.dim()),
    };
    let runner = match kind {
        "gd" => btgd_core::run_mbt_gd,
        "mmt" => btgd_core::run_mbt_mmt,
        "nag" => btgd_core::run_mbt_nag,
        _ => return Err(PyValueError::new_err(format!("unknown MBT kind `{kind}`; expected gd, mmt or nag"))),
    };
    let opts = btgd_core::MbtOptions { epochs, gamma, ..btgd_core::MbtOptions::default() };
    let (cfg, stop) = (finder_line_search(config)?, stop_rule(stop)?);
    let inner = py.detach(|| runner(p, &sampler, &z0, &cfg, &stop, &opts)).map_err(to_py_err)?;
    Ok(Trajectory { inner })
}

#[pymodule]
fn btgd(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Objective>()?;
    m.add_class::<PyLineSearch>()?;
    m.add_class::<PyStopRule>()?;
    m.add_class::<Trajectory>()?;
    m.add_class::<LeastSquares>()?;
    m.add_function(wrap_pyfunction!(names, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(backtrack, m)?)?;
    m.add_function(wrap_pyfunction!(two_way_backtrack, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(projective_dist, m)?)?;
    m.add_function(wrap_pyfunction!(saddle_basin_fraction, m)?)?;
    m.add_function(wrap_pyfunction!(lr_finder, m)?)?;
    m.add_function(wrap_pyfunction!(stability_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(run_mbt, m)?)?;
    Ok(())
}
