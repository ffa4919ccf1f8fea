//! Python bindings: graphs, the two models, synthesis, training, metrics,
//! the gradient check and the theory lab.
//!
//! Configuration arguments are TOML bodies in the same format as the CLI
//! `--config` file; only the relevant section is read. Reports come back as
//! plain dicts.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use odegcn::cli::RunConfig;
use odegcn::data::{synth_rd as core_synth_rd, synth_sir as core_synth_sir, TimeSeriesTable, Timestamps};
use odegcn::eval::{self, MetricsReport};
use odegcn::gradcheck::run_gradcheck;
use odegcn::graph::apply_weighted_laplacian;
use odegcn::optimize::{self, TrainConfig};
use odegcn::rdgcn::{self, RdParams};
use odegcn::sirgcn::{self, SirParams, SirState};
use odegcn::{DirectedGraph, EdgeWeights, Forecaster, LossKind};

fn err(e: odegcn::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn config(toml: Option<&str>) -> PyResult<RunConfig> {
    RunConfig::from_toml(toml.unwrap_or("")).map_err(err)
}

fn parse_loss(loss: &str) -> PyResult<LossKind> {
    loss.parse().map_err(PyValueError::new_err)
}

/// A directed graph without self loops or repeated edges.
#[pyclass(name = "Graph", module = "odegcn_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGraph(DirectedGraph);

#[pymethods]
impl PyGraph {
    #[new]
    fn new(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        DirectedGraph::new(n, edges).map(Self).map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.0.edges().to_vec()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.0.num_edges()
    }

    /// The transpose graph used by the reaction term.
    fn reaction_graph(&self) -> Self {
        Self(self.0.reaction_graph())
    }

    /// `(L x)_i = sum over edges (i, j) of w_ij (x_j - x_i)`.
    fn laplacian(&self, weights: Vec<f64>, x: Vec<f64>) -> PyResult<Vec<f64>> {
        let w = EdgeWeights::new(weights, &self.0).map_err(err)?;
        apply_weighted_laplacian(&self.0, &w, &x).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.n()
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, edges={})", self.0.n(), self.0.num_edges())
    }
}

fn pairs_of(rows: Vec<Vec<f64>>) -> PyResult<Vec<odegcn::data::Pair>> {
    let stamps = (0..rows.len() as i64).collect();
    let table = TimeSeriesTable::with_zero_missing(Timestamps::Epoch(stamps), rows).map_err(err)?;
    Ok(table.pairs())
}

fn history_dicts(py: Python<'_>, outcome: &optimize::TrainOutcome) -> PyResult<Py<PyAny>> {
    to_py(py, &outcome.history)
}

fn train_config(toml: Option<&str>, loss: Option<&str>) -> PyResult<TrainConfig> {
    let mut cfg = config(toml)?.train;
    if let Some(l) = loss {
        cfg.loss_kind = parse_loss(l)?;
    }
    Ok(cfg)
}

/// Reaction-diffusion graph model with `2|E| + 2n` parameters.
#[pyclass(name = "RdModel", module = "odegcn_py", skip_from_py_object)]
#[derive(Clone)]
struct PyRdModel(rdgcn::RdModel);

#[pymethods]
impl PyRdModel {
    /// Random edge weights in (-0.1, 0.1) and zero biases, or the given flat
    /// parameters `[rho, sigma, b_d, b_r]`.
    #[new]
    #[pyo3(signature = (graph, params=None, seed=0))]
    fn new(graph: &PyGraph, params: Option<Vec<f64>>, seed: u64) -> PyResult<Self> {
        let g = graph.0.clone();
        let p = match params {
            Some(flat) => RdParams::from_flat(&flat, &g).map_err(err)?,
            None => RdParams::init_random(&g, seed),
        };
        rdgcn::RdModel::new(g, p).map(Self).map_err(err)
    }

    #[getter]
    fn num_params(&self) -> usize {
        self.0.num_params()
    }

    #[getter]
    fn graph(&self) -> PyGraph {
        PyGraph(self.0.graph().clone())
    }

    fn params(&self) -> Vec<f64> {
        self.0.params()
    }

    fn set_params(&mut self, params: Vec<f64>) -> PyResult<()> {
        self.0.set_params(&params).map_err(err)
    }

    /// One-step prediction from the state `x`.
    fn forward(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.forward(&x).map_err(err)
    }

    /// Masked loss over consecutive rows of `series`; zeros count as missing.
    #[pyo3(signature = (series, loss="mae"))]
    fn loss(&self, series: Vec<Vec<f64>>, loss: &str) -> PyResult<f64> {
        self.0.loss(&pairs_of(series)?, parse_loss(loss)?).map_err(err)
    }

    #[pyo3(signature = (series, loss="mae"))]
    fn loss_and_grad(&self, series: Vec<Vec<f64>>, loss: &str) -> PyResult<(f64, Vec<f64>)> {
        self.0.loss_and_grad(&pairs_of(series)?, parse_loss(loss)?).map_err(err)
    }

    /// Trains on `train` with early stopping on `val` (defaults to `train`)
    /// and returns the per-epoch history. `config` is a TOML body whose
    /// `[train]` section sets the optimizer.
    #[pyo3(signature = (train, val=None, config=None, loss=None))]
    fn fit(
        &mut self,
        py: Python<'_>,
        train: Vec<Vec<f64>>,
        val: Option<Vec<Vec<f64>>>,
        config: Option<&str>,
        loss: Option<&str>,
    ) -> PyResult<Py<PyAny>> {
        let cfg = train_config(config, loss)?;
        let tr = pairs_of(train)?;
        let va = match val {
            Some(v) => pairs_of(v)?,
            None => tr.clone(),
        };
        let out = py
            .detach(|| optimize::train(&mut self.0, &tr, &va, &cfg))
            .map_err(err)?;
        history_dicts(py, &out)
    }

    fn __repr__(&self) -> String {
        format!("RdModel(n={}, params={})", self.0.graph().n(), self.0.num_params())
    }
}

/// Metapopulation SIR model with `|E| + n + 1` parameters, or `|E| + 2` with
/// one shared infection rate.
#[pyclass(name = "SirModel", module = "odegcn_py", skip_from_py_object)]
#[derive(Clone)]
struct PySirModel(sirgcn::SirModel);

#[pymethods]
impl PySirModel {
    #[new]
    #[pyo3(signature = (graph, single_beta=false, seed=0, params=None))]
    fn new(graph: &PyGraph, single_beta: bool, seed: u64, params: Option<Vec<f64>>) -> PyResult<Self> {
        let g = graph.0.clone();
        let p = match params {
            Some(flat) => SirParams::from_flat(&flat, &g, single_beta).map_err(err)?,
            None => SirParams::init(&g, single_beta, seed),
        };
        sirgcn::SirModel::new(g, p).map(Self).map_err(err)
    }

    /// Builds a model from travel fractions on the edges, infection rates and
    /// the recovery rate.
    #[staticmethod]
    fn from_rates(graph: &PyGraph, phi_edge: Vec<f64>, beta: Vec<f64>, gamma: f64) -> PyResult<Self> {
        let p = SirParams::from_probabilities(&graph.0, &phi_edge, &beta, gamma).map_err(err)?;
        sirgcn::SirModel::new(graph.0.clone(), p).map(Self).map_err(err)
    }

    #[getter]
    fn num_params(&self) -> usize {
        self.0.num_params()
    }

    fn params(&self) -> Vec<f64> {
        self.0.params()
    }

    fn set_params(&mut self, params: Vec<f64>) -> PyResult<()> {
        self.0.set_params(&params).map_err(err)
    }

    /// Dense travel matrix; every row sums to one.
    fn travel_matrix(&self) -> Vec<Vec<f64>> {
        self.0.rates().phi_dense(self.0.graph())
    }

    /// Infection rates per vertex and the recovery rate.
    fn rates(&self) -> (Vec<f64>, f64) {
        let r = self.0.rates();
        (r.beta, r.gamma)
    }

    /// Infectious counts one step later, from period-start bookkeeping: the
    /// populations, the current infectious counts and `S(t0) / N`.
    #[pyo3(signature = (population, infectious, susceptible_fraction=0.1))]
    fn forward(&self, population: Vec<f64>, infectious: Vec<f64>, susceptible_fraction: f64) -> PyResult<Vec<f64>> {
        let state = SirState::at_period_start(population, &infectious, susceptible_fraction, 0);
        self.0.forward(&state, &infectious).map(|s| s.prediction).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("SirModel(n={}, params={})", self.0.graph().n(), self.0.num_params())
    }
}

/// Generates a reaction-diffusion dataset from the `[synth]` section of
/// `config`. Returns the graph, the series rows, the observation mask and the
/// true flat parameters.
#[pyfunction]
#[pyo3(signature = (config=None))]
fn synth_rd(py: Python<'_>, config: Option<&str>) -> PyResult<(PyGraph, Vec<Vec<f64>>, Vec<Vec<bool>>, Vec<f64>)> {
    let cfg = self::config(config)?.synth;
    let s = py.detach(|| core_synth_rd(&cfg)).map_err(err)?;
    Ok((
        PyGraph(s.graph),
        s.table.values().to_vec(),
        s.table.mask().to_vec(),
        s.params.to_flat(),
    ))
}

/// Generates SIR episodes. Returns the graph, the populations, the
/// infectious counts of every episode and the true flat parameters.
#[pyfunction]
#[pyo3(signature = (config=None))]
fn synth_sir(py: Python<'_>, config: Option<&str>) -> PyResult<(PyGraph, Vec<f64>, Vec<Vec<Vec<f64>>>, Vec<f64>)> {
    let cfg = self::config(config)?.synth;
    let s = py.detach(|| core_synth_sir(&cfg)).map_err(err)?;
    let episodes = s.episodes.iter().map(|e| e.infectious.clone()).collect();
    Ok((PyGraph(s.graph), s.population, episodes, s.params.to_flat()))
}

fn mask_or_all(mask: Option<Vec<bool>>, len: usize) -> Vec<bool> {
    mask.unwrap_or_else(|| vec![true; len])
}

#[pyfunction]
#[pyo3(signature = (pred, target, mask=None))]
fn mae(pred: Vec<f64>, target: Vec<f64>, mask: Option<Vec<bool>>) -> PyResult<f64> {
    let m = mask_or_all(mask, pred.len());
    eval::mae(&pred, &target, &m).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (pred, target, mask=None))]
fn rmse(pred: Vec<f64>, target: Vec<f64>, mask: Option<Vec<bool>>) -> PyResult<f64> {
    let m = mask_or_all(mask, pred.len());
    eval::rmse(&pred, &target, &m).map_err(err)
}

/// MAE and RMSE over `(prediction, target)` entries; a `None` prediction is
/// counted as dropped.
#[pyfunction]
fn metrics(py: Python<'_>, entries: Vec<(Option<f64>, f64)>) -> PyResult<Py<PyAny>> {
    let r = MetricsReport::from_entries(entries).map_err(err)?;
    to_py(py, &r)
}

/// Finite-difference check of both models' gradients, configured by the
/// `[gradcheck]` section. Returns one summary per model family.
#[pyfunction]
#[pyo3(signature = (config=None))]
fn gradcheck(py: Python<'_>, config: Option<&str>) -> PyResult<Py<PyAny>> {
    let cfg = self::config(config)?.gradcheck;
    let rows = py.detach(|| run_gradcheck(&cfg)).map_err(err)?;
    to_py(py, &rows)
}

/// The domain-shift discrepancy experiment configured by `[theory]`.
#[pyfunction]
#[pyo3(signature = (config=None))]
fn theory_lab(py: Python<'_>, config: Option<&str>) -> PyResult<Py<PyAny>> {
    let cfg = self::config(config)?.theory;
    let report = py.detach(|| eval::run_theory_lab(&cfg)).map_err(err)?;
    to_py(py, &report)
}

#[pymodule]
fn odegcn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", odegcn::VERSION)?;
    m.add_class::<PyGraph>()?;
    m.add_class::<PyRdModel>()?;
    m.add_class::<PySirModel>()?;
    m.add_function(wrap_pyfunction!(synth_rd, m)?)?;
    m.add_function(wrap_pyfunction!(synth_sir, m)?)?;
    m.add_function(wrap_pyfunction!(mae, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(gradcheck, m)?)?;
    m.add_function(wrap_pyfunction!(theory_lab, m)?)?;
    Ok(())
}
