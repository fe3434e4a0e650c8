//! Python bindings: graphs, the fractional problem with its prox and
//! solvers, mode computation and the experiment harness.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use fracgfm::gfm::{constraint_basis, seed_basis, MultiStart};
use fracgfm::graph::{self, incidence, Edge};
use fracgfm::harness::{self, Algorithm, ExperimentConfig, QSpec};
use fracgfm::prox::InnerMethod;
use fracgfm::solver::{self, RunStatus};
use fracgfm::{FractionalProblem, InnerConfig, SolverConfig, SolverTrace, WeightedDigraph};

fn py_err(e: fracgfm::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_q(q: &str) -> PyResult<QSpec> {
    match q {
        "identity" => Ok(QSpec::Identity),
        "degree" => Ok(QSpec::Degree),
        other => Err(PyValueError::new_err(format!("q must be 'identity' or 'degree', got '{other}'"))),
    }
}

fn parse_algorithm(name: &str) -> PyResult<Algorithm> {
    match name {
        "psa" => Ok(Algorithm::Psa),
        "ps_dca" | "ps-dca" => Ok(Algorithm::PsDca),
        other => Err(PyValueError::new_err(format!("algorithm must be 'psa' or 'ps_dca', got '{other}'"))),
    }
}

fn parse_method(name: &str) -> PyResult<InnerMethod> {
    match name {
        "fista" => Ok(InnerMethod::Fista),
        "projected_gradient" => Ok(InnerMethod::ProjectedGradient),
        "coordinate_descent" => Ok(InnerMethod::CoordinateDescent),
        other => Err(PyValueError::new_err(format!("unknown inner method '{other}'"))),
    }
}

/// Weighted directed graph on vertices `0..n`.
#[pyclass(name = "Graph", module = "pyfracgfm", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGraph {
    inner: WeightedDigraph,
}

#[pymethods]
impl PyGraph {
    /// Directed graph from `(from, to, weight)` triples.
    #[new]
    fn new(n: usize, edges: Vec<(usize, usize, f64)>) -> PyResult<Self> {
        let edges = edges.into_iter().map(|(from, to, weight)| Edge { from, to, weight }).collect();
        Ok(Self {
            inner: WeightedDigraph::new(n, edges).map_err(py_err)?,
        })
    }

    /// Symmetric graph from `(i, j, weight)` pairs.
    #[staticmethod]
    fn undirected(n: usize, pairs: Vec<(usize, usize, f64)>) -> PyResult<Self> {
        Ok(Self {
            inner: WeightedDigraph::undirected(n, &pairs).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn rgg(n: usize, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: graph::generate_rgg(n, seed).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn drgg(n: usize, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: graph::generate_drgg(n, seed).map_err(py_err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (n, seed, k_clusters = 2, p_in = 0.9, p_out = 0.15))]
    fn community(n: usize, seed: u64, k_clusters: usize, p_in: f64, p_out: f64) -> PyResult<Self> {
        Ok(Self {
            inner: graph::generate_community(n, k_clusters, p_in, p_out, seed).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn from_edge_list(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: WeightedDigraph::from_edge_list(text).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: WeightedDigraph::load(path).map_err(py_err)?,
        })
    }

    fn to_edge_list(&self) -> String {
        self.inner.to_edge_list()
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    /// Number of directed weight entries.
    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.inner.edges().iter().map(|e| (e.from, e.to, e.weight)).collect()
    }

    fn weight_matrix(&self) -> Vec<Vec<f64>> {
        self.inner.weight_matrix()
    }

    fn is_symmetric(&self) -> bool {
        self.inner.is_symmetric()
    }

    /// Diagonal of the metric `Q` ("identity" or "degree").
    #[pyo3(signature = (q = "identity"))]
    fn metric(&self, q: &str) -> PyResult<Vec<f64>> {
        Ok(parse_q(q)?.metric(&self.inner).map_err(py_err)?.diag().to_vec())
    }

    /// Directed variation `sum_ij w_ij max(y_i - y_j, 0)`.
    fn variation(&self, y: Vec<f64>) -> PyResult<f64> {
        fracgfm::dv_eval(&incidence(&self.inner), &y, false).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, edges={})", self.inner.n(), self.inner.edge_count())
    }
}

/// `min_x T(Vx) / ||Q^{1/2} V x||` for the `k`-th mode, with `V` spanning
/// the `Q`-orthogonal complement of the first `k - 1` seed-basis vectors.
#[pyclass(name = "Problem", module = "pyfracgfm", frozen)]
struct PyProblem {
    inner: FractionalProblem,
}

fn solver_config(algorithm: &str, seed: u64, max_iter: Option<usize>, tol: Option<f64>) -> PyResult<SolverConfig> {
    let base = match parse_algorithm(algorithm)? {
        Algorithm::Psa => SolverConfig::psa(),
        Algorithm::PsDca => SolverConfig::ps_dca(),
    };
    let cfg = SolverConfig {
        max_iter: max_iter.unwrap_or(base.max_iter),
        tol: tol.unwrap_or(base.tol),
        ..base
    }
    .with_seed(seed);
    cfg.validate().map_err(py_err)?;
    Ok(cfg)
}

#[pymethods]
impl PyProblem {
    #[new]
    #[pyo3(signature = (graph, k, q = "identity"))]
    fn new(graph: &PyGraph, k: usize, q: &str) -> PyResult<Self> {
        let g = &graph.inner;
        if k < 2 || k > g.n() {
            return Err(PyValueError::new_err(format!("k must lie in 2..={}, got {k}", g.n())));
        }
        let metric = parse_q(q)?.metric(g).map_err(py_err)?;
        let u = seed_basis(g, &metric).map_err(py_err)?;
        let v = constraint_basis(&u.select_columns(0..k - 1), &metric).map_err(py_err)?;
        Ok(Self {
            inner: FractionalProblem::new(incidence(g), metric, v).map_err(py_err)?,
        })
    }

    /// Dimension `m` of the reduced variable.
    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn norm_cv(&self) -> f64 {
        self.inner.norm_cv()
    }

    /// `y = V x`.
    fn lift(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check(&x)?;
        Ok(self.inner.lift(&x))
    }

    /// `(T, B, E)` at `x`.
    fn evaluate(&self, x: Vec<f64>) -> PyResult<(f64, f64, f64)> {
        self.check(&x)?;
        let r = self.inner.evaluate(&x).map_err(py_err)?;
        Ok((r.t, r.b, r.e))
    }

    /// `prox_{lambda T(V.)}(z)`; returns `(point, gap, converged)`.
    #[pyo3(signature = (z, lam, tol = 1e-10, max_iter = 100_000, method = "fista"))]
    fn prox(&self, z: Vec<f64>, lam: f64, tol: f64, max_iter: usize, method: &str) -> PyResult<(Vec<f64>, f64, bool)> {
        self.check(&z)?;
        let cfg = InnerConfig {
            tol,
            max_iter,
            method: parse_method(method)?,
        };
        let r = fracgfm::prox_dv(&self.inner, &z, lam, &cfg).map_err(py_err)?;
        Ok((r.point, r.gap, r.converged))
    }

    /// Runs PSA or PS-DCA from `x0`.
    #[pyo3(signature = (x0, algorithm = "ps_dca", seed = 0, max_iter = None, tol = None))]
    fn solve(
        &self,
        x0: Vec<f64>,
        algorithm: &str,
        seed: u64,
        max_iter: Option<usize>,
        tol: Option<f64>,
    ) -> PyResult<PyTrace> {
        self.check(&x0)?;
        let cfg = solver_config(algorithm, seed, max_iter, tol)?;
        Ok(PyTrace {
            inner: solver::ps_dca_run(&self.inner, &x0, &cfg).map_err(py_err)?,
        })
    }

    /// `||x - prox_{lambda T}(x + lambda E grad B)||`.
    #[pyo3(signature = (x, lam = 1.0))]
    fn criticality_residual(&self, x: Vec<f64>, lam: f64) -> PyResult<f64> {
        self.check(&x)?;
        solver::criticality_residual(&self.inner, &x, lam, &InnerConfig::default()).map_err(py_err)
    }
}

impl PyProblem {
    fn check(&self, x: &[f64]) -> PyResult<()> {
        if x.len() != self.inner.dim() {
            return Err(PyValueError::new_err(format!(
                "expected a vector of length {}, got {}",
                self.inner.dim(),
                x.len()
            )));
        }
        Ok(())
    }
}

/// Result of one solver run.
#[pyclass(name = "Trace", module = "pyfracgfm", frozen)]
struct PyTrace {
    inner: SolverTrace,
}

#[pymethods]
impl PyTrace {
    #[getter]
    fn final_point(&self) -> Vec<f64> {
        self.inner.final_point.clone()
    }

    #[getter]
    fn final_value(&self) -> f64 {
        self.inner.final_value
    }

    #[getter]
    fn initial_value(&self) -> f64 {
        self.inner.initial_value
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations()
    }

    #[getter]
    fn dca_acceptances(&self) -> usize {
        self.inner.dca_acceptances()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.status == RunStatus::Converged
    }

    /// `E(x^k)` after each iteration.
    fn values(&self) -> Vec<f64> {
        self.inner.iterates.iter().map(|r| r.value).collect()
    }

    fn to_json_lines(&self) -> PyResult<String> {
        self.inner.to_json_lines().map_err(py_err)
    }
}

/// `Q`-orthonormal modes `u_1..u_K` with their variations.
#[pyclass(name = "ModeSet", module = "pyfracgfm", frozen)]
struct PyModeSet {
    inner: fracgfm::ModeSet,
}

#[pymethods]
impl PyModeSet {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: fracgfm::ModeSet::from_json(text).map_err(py_err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(py_err)
    }

    #[getter]
    fn count(&self) -> usize {
        self.inner.count()
    }

    /// Mode `j` (0-based).
    fn mode(&self, j: usize) -> PyResult<Vec<f64>> {
        if j >= self.inner.count() {
            return Err(PyValueError::new_err(format!("mode index {j} out of range")));
        }
        Ok(self.inner.mode(j))
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values.clone()
    }

    #[getter]
    fn q(&self) -> Vec<f64> {
        self.inner.q.diag().to_vec()
    }

    fn orthonormality_defect(&self) -> f64 {
        self.inner.orthonormality_defect()
    }
}

/// First `k_modes` modes of `graph`.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (graph, k_modes, q = "identity", algorithm = "ps_dca", n_adv = 15, n_rand = 35, seed = 0))]
fn compute_modes(
    py: Python<'_>,
    graph: &PyGraph,
    k_modes: usize,
    q: &str,
    algorithm: &str,
    n_adv: usize,
    n_rand: usize,
    seed: u64,
) -> PyResult<PyModeSet> {
    let metric = parse_q(q)?.metric(&graph.inner).map_err(py_err)?;
    let cfg = solver_config(algorithm, seed, None, None)?;
    let starts = MultiStart { n_adv, n_rand, seed };
    let g = graph.inner.clone();
    let set = py
        .detach(move || fracgfm::compute_modes(&g, &metric, k_modes, &cfg, &starts))
        .map_err(py_err)?;
    Ok(PyModeSet { inner: set })
}

/// Runs an experiment grid given as JSON; returns the records as JSON lines.
#[pyfunction]
fn run_experiment(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::from_json(config_json).map_err(py_err)?;
    let records = py.detach(move || harness::run_experiment(&cfg)).map_err(py_err)?;
    harness::records_to_json_lines(&records).map_err(py_err)
}

/// Summary CSV of JSON-lines records.
#[pyfunction]
#[pyo3(signature = (records, split = 0.3))]
fn summarize(records: &str, split: f64) -> PyResult<String> {
    let recs = harness::records_from_json_lines(records).map_err(py_err)?;
    harness::summary_to_csv(&harness::summarize(&recs, split).map_err(py_err)?).map_err(py_err)
}

#[pymodule]
fn pyfracgfm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PyTrace>()?;
    m.add_class::<PyModeSet>()?;
    m.add_function(wrap_pyfunction!(compute_modes, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(summarize, m)?)?;
    Ok(())
}
