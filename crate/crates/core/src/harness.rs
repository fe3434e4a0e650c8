//! Experiment grid: graphs x metrics x mode indices x algorithms x starts.
//!
//! For each graph and metric a seed basis `U` is built (Laplacian
//! eigenvectors for `Q = I`, a `Q`-orthonormal completion of `u_1`
//! otherwise). Mode `k` is then posed with `U_{k-1}` = the first `k - 1`
//! columns of `U`, shared by all algorithms and starts, and every algorithm
//! runs from the same start points.

use std::collections::HashMap;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::FractionalProblem;
use crate::gfm::{constraint_basis, initial_points, seed_basis, start_seed, MultiStart, StartClass};
use crate::graph::{self, degree_metric, incidence, DiagonalMetric, WeightedDigraph};
use crate::prox::InnerConfig;
use crate::rng::{derive_seed, seeded};
use crate::solver::{criticality_residual, ps_dca_run, RunStatus, SolverConfig, SolverTrace};

/// Environment variable overriding the output directory of `bench`.
pub const OUT_DIR_ENV: &str = "FRACGFM_OUT_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GraphSpec {
    Rgg {
        n: usize,
        seed: u64,
    },
    Drgg {
        n: usize,
        seed: u64,
    },
    Community {
        n: usize,
        #[serde(default = "default_clusters")]
        k_clusters: usize,
        #[serde(default = "default_p_in")]
        p_in: f64,
        #[serde(default = "default_p_out")]
        p_out: f64,
        seed: u64,
    },
    File {
        path: PathBuf,
    },
}

fn default_clusters() -> usize {
    2
}

fn default_p_in() -> f64 {
    0.9
}

fn default_p_out() -> f64 {
    0.15
}

impl GraphSpec {
    pub fn build(&self) -> Result<WeightedDigraph> {
        match self {
            GraphSpec::Rgg { n, seed } => graph::generate_rgg(*n, *seed),
            GraphSpec::Drgg { n, seed } => graph::generate_drgg(*n, *seed),
            GraphSpec::Community {
                n,
                k_clusters,
                p_in,
                p_out,
                seed,
            } => graph::generate_community(*n, *k_clusters, *p_in, *p_out, *seed),
            GraphSpec::File { path } => WeightedDigraph::load(path),
        }
    }

    pub fn id(&self) -> String {
        match self {
            GraphSpec::Rgg { n, seed } => format!("rgg-n{n}-s{seed}"),
            GraphSpec::Drgg { n, seed } => format!("drgg-n{n}-s{seed}"),
            GraphSpec::Community { n, k_clusters, seed, .. } => format!("community-n{n}-c{k_clusters}-s{seed}"),
            GraphSpec::File { path } => format!("file-{}", path.display()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QSpec {
    Identity,
    Degree,
}

impl QSpec {
    pub fn metric(&self, g: &WeightedDigraph) -> Result<DiagonalMetric> {
        match self {
            QSpec::Identity => Ok(DiagonalMetric::identity(g.n())),
            QSpec::Degree => degree_metric(g),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Psa,
    PsDca,
}

/// Solver settings applied on top of the per-algorithm defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOverrides {
    pub lambda_scale_psa: f64,
    pub lambda_scale_ps_dca: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub eps_accept: f64,
    /// `false` drops the sphere projection (PGSA-style ablation).
    pub normalize: bool,
    pub inner: InnerConfig,
}

impl Default for SolverOverrides {
    fn default() -> Self {
        let d = SolverConfig::ps_dca();
        Self {
            lambda_scale_psa: SolverConfig::psa().lambda_scale,
            lambda_scale_ps_dca: d.lambda_scale,
            tol: d.tol,
            max_iter: d.max_iter,
            eps_accept: d.eps_accept,
            normalize: true,
            inner: d.inner,
        }
    }
}

impl SolverOverrides {
    pub fn config_for(&self, algorithm: Algorithm) -> SolverConfig {
        let base = match algorithm {
            Algorithm::Psa => SolverConfig {
                lambda_scale: self.lambda_scale_psa,
                ..SolverConfig::psa()
            },
            Algorithm::PsDca => SolverConfig {
                lambda_scale: self.lambda_scale_ps_dca,
                ..SolverConfig::ps_dca()
            },
        };
        SolverConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            eps_accept: self.eps_accept,
            normalize: self.normalize,
            inner: self.inner,
            ..base
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    pub records: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub graphs: Vec<GraphSpec>,
    pub q: Vec<QSpec>,
    /// Mode indices, each >= 2.
    pub ks: Vec<usize>,
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub starts: MultiStart,
    #[serde(default)]
    pub solver: SolverOverrides,
    /// Adversarial fraction used by the summary.
    #[serde(default = "default_split")]
    pub split: f64,
    #[serde(default)]
    pub output: OutputPaths,
}

fn default_split() -> f64 {
    0.3
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.into()));
        if self.graphs.is_empty() || self.q.is_empty() || self.ks.is_empty() {
            return bad("graphs, q and ks must be nonempty");
        }
        if self.algorithms.is_empty() {
            return bad("algorithm list must be nonempty");
        }
        if self.starts.total() == 0 {
            return bad("need at least one start");
        }
        if self.ks.iter().any(|&k| k < 2) {
            return bad("mode indices start at 2");
        }
        if !(self.split > 0.0 && self.split <= 1.0) {
            return bad("split must lie in (0, 1]");
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Number of solver runs in the full grid.
    pub fn grid_size(&self) -> usize {
        self.graphs.len() * self.q.len() * self.ks.len() * self.algorithms.len() * self.starts.total()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub graph_id: String,
    pub q: QSpec,
    pub k: usize,
    pub algorithm: Algorithm,
    pub start_index: usize,
    pub start_class: StartClass,
    pub final_objective: f64,
    pub iterations: usize,
    pub wall_time: f64,
    pub criticality_residual: f64,
    pub dca_acceptances: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunRecord {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// A record with the full trace of its run (absent on failure).
#[derive(Clone, Debug)]
pub struct DetailedRun {
    pub record: RunRecord,
    pub trace: Option<SolverTrace>,
}

/// Runs the grid, keeping traces.
pub fn run_experiment_detailed(cfg: &ExperimentConfig) -> Result<Vec<DetailedRun>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.grid_size());
    for (gi, spec) in cfg.graphs.iter().enumerate() {
        let g = spec.build()?;
        let graph_id = spec.id();
        let inc = incidence(&g);
        for &qs in &cfg.q {
            let q = qs.metric(&g)?;
            let u_full = seed_basis(&g, &q)?;
            for &k in &cfg.ks {
                if k > g.n() {
                    return Err(Error::InvalidParameter(format!("mode index {k} exceeds n = {}", g.n())));
                }
                let u_prev = u_full.select_columns(0..k - 1);
                let v = constraint_basis(&u_prev, &q)?;
                let p = FractionalProblem::new(inc.clone(), q.clone(), v)?;
                let cell_seed = derive_seed(derive_seed(cfg.starts.seed, gi as u64), k as u64 * 2 + qs as u64);
                let mut rng = seeded(cell_seed);
                let starts = initial_points(&p, &u_full, k, cfg.starts.n_adv, cfg.starts.n_rand, &mut rng)?;
                let cells: Vec<(Algorithm, usize)> = cfg
                    .algorithms
                    .iter()
                    .flat_map(|&a| (0..starts.len()).map(move |s| (a, s)))
                    .collect();
                let runs: Vec<DetailedRun> = cells
                    .par_iter()
                    .map(|&(algorithm, s)| {
                        let solver = cfg.solver.config_for(algorithm).with_seed(start_seed(cell_seed, k, s));
                        let started = Instant::now();
                        let result = ps_dca_run(&p, &starts[s].x, &solver);
                        let wall_time = started.elapsed().as_secs_f64();
                        let mut record = RunRecord {
                            graph_id: graph_id.clone(),
                            q: qs,
                            k,
                            algorithm,
                            start_index: s,
                            start_class: starts[s].class,
                            final_objective: 0.0,
                            iterations: 0,
                            wall_time,
                            criticality_residual: 0.0,
                            dca_acceptances: 0,
                            converged: false,
                            error: None,
                        };
                        match result {
                            Ok(trace) => {
                                record.final_objective = trace.final_value;
                                record.iterations = trace.iterations();
                                record.dca_acceptances = trace.dca_acceptances();
                                record.converged = trace.status == RunStatus::Converged;
                                match criticality_residual(&p, &trace.final_point, 1.0, &solver.inner) {
                                    Ok(r) => record.criticality_residual = r,
                                    Err(e) => record.error = Some(e.to_string()),
                                }
                                DetailedRun {
                                    record,
                                    trace: Some(trace),
                                }
                            }
                            Err(e) => {
                                record.error = Some(e.to_string());
                                DetailedRun { record, trace: None }
                            }
                        }
                    })
                    .collect();
                out.extend(runs);
            }
        }
    }
    Ok(out)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    Ok(run_experiment_detailed(cfg)?.into_iter().map(|r| r.record).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub graph_id: String,
    pub q: QSpec,
    pub k: usize,
    pub algorithm: Algorithm,
    pub adv_count: usize,
    pub adv_objective: f64,
    pub adv_iterations: f64,
    pub adv_time: f64,
    pub all_count: usize,
    pub all_objective: f64,
    pub all_iterations: f64,
    pub all_time: f64,
}

fn means<'a>(records: impl Iterator<Item = &'a RunRecord>) -> (usize, f64, f64, f64) {
    let (mut c, mut o, mut it, mut t) = (0usize, 0.0, 0.0, 0.0);
    for r in records {
        c += 1;
        o += r.final_objective;
        it += r.iterations as f64;
        t += r.wall_time;
    }
    let d = c.max(1) as f64;
    (c, o / d, it / d, t / d)
}

/// Per `(graph, Q, k, algorithm)` means over the first `round(split * N)`
/// starts and over all `N` starts. Failed runs are left out; groups without
/// successful runs produce no row.
pub fn summarize(records: &[RunRecord], split: f64) -> Result<Vec<SummaryRow>> {
    if !(split > 0.0 && split <= 1.0) {
        return Err(Error::InvalidParameter(format!("split must lie in (0, 1], got {split}")));
    }
    type Key = (String, QSpec, usize, Algorithm);
    let mut order: Vec<Key> = Vec::new();
    let mut groups: HashMap<Key, Vec<&RunRecord>> = HashMap::new();
    for r in records {
        let key = (r.graph_id.clone(), r.q, r.k, r.algorithm);
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r);
    }
    let mut rows = Vec::new();
    for key in order {
        let group = &groups[&key];
        let starts = group.iter().map(|r| r.start_index + 1).max().unwrap_or(0);
        let cutoff = (split * starts as f64).round() as usize;
        let ok = || group.iter().copied().filter(|r| r.is_ok());
        let (all_count, all_objective, all_iterations, all_time) = means(ok());
        if all_count == 0 {
            continue;
        }
        let (adv_count, adv_objective, adv_iterations, adv_time) = means(ok().filter(|r| r.start_index < cutoff));
        let (graph_id, q, k, algorithm) = key;
        rows.push(SummaryRow {
            graph_id,
            q,
            k,
            algorithm,
            adv_count,
            adv_objective,
            adv_iterations,
            adv_time,
            all_count,
            all_objective,
            all_iterations,
            all_time,
        });
    }
    Ok(rows)
}

pub fn records_to_json_lines(records: &[RunRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn records_from_json_lines(text: &str) -> Result<Vec<RunRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

pub fn summary_to_csv(rows: &[SummaryRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    }
    if rows.is_empty() {
        w.write_record(SUMMARY_HEADER).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub const SUMMARY_HEADER: [&str; 12] = [
    "graph_id",
    "q",
    "k",
    "algorithm",
    "adv_count",
    "adv_objective",
    "adv_iterations",
    "adv_time",
    "all_count",
    "all_objective",
    "all_iterations",
    "all_time",
];
