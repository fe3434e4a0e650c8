//! Generalized graph Fourier modes.
//!
//! Mode `k` minimizes `T(x)` over `{x : U_{k-1}^T Q x = 0, ||Q^{1/2} x|| = 1}`
//! where `U_{k-1}` holds the previous modes and `u_1 = 1 / ||Q^{1/2} 1||`.
//! With an orthonormal basis `V` of the constraint space this becomes the
//! unconstrained fractional program `min T(Vx) / ||Q^{1/2} V x||`, which is
//! handed to [`ps_dca_run`].

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::FractionalProblem;
use crate::graph::{incidence, symmetrized_degrees, DiagonalMetric, WeightedDigraph};
use crate::linalg::{self, default_rank_tol, DenseMatrix};
use crate::rng::{derive_seed, seeded, SeededRng};
use crate::solver::{ps_dca_run, SolverConfig, SolverTrace};

/// Orthonormal basis of `{x : U_prev^T Q x = 0}`.
pub fn constraint_basis(u_prev: &DenseMatrix, q: &DiagonalMetric) -> Result<DenseMatrix> {
    let n = q.n();
    if u_prev.rows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: u_prev.rows(),
        });
    }
    if u_prev.cols() == 0 {
        return Ok(DenseMatrix::identity(n));
    }
    let m = DenseMatrix::from_fn(u_prev.cols(), n, |i, j| u_prev[(j, i)] * q.diag()[j]);
    let v = linalg::orthonormal_null_basis(&m, default_rank_tol(m.rows(), n));
    if v.cols() == 0 {
        return Err(Error::EmptyConstraintSpace(u_prev.cols()));
    }
    Ok(v)
}

/// Orthonormal basis of the orthogonal complement, inside `span(x_basis)`, of
/// `X_0 = {x in span(x_basis) : M x = 0}`.
pub fn subspace_reduction(x_basis: &DenseMatrix, m: &DenseMatrix) -> Result<DenseMatrix> {
    let mx = m.matmul(x_basis)?;
    let split = linalg::row_space_split(&mx, default_rank_tol(mx.rows(), mx.cols()));
    x_basis.matmul(&split.range)
}

/// Basis of `X_0` itself (the kernel part of [`subspace_reduction`]).
pub fn reduction_kernel(x_basis: &DenseMatrix, m: &DenseMatrix) -> Result<DenseMatrix> {
    let mx = m.matmul(x_basis)?;
    let split = linalg::row_space_split(&mx, default_rank_tol(mx.rows(), mx.cols()));
    x_basis.matmul(&split.null)
}

fn fix_column_signs(u: &mut DenseMatrix) {
    for j in 0..u.cols() {
        let first = (0..u.rows()).map(|i| u[(i, j)]).find(|v| v.abs() > 1e-12);
        if matches!(first, Some(v) if v < 0.0) {
            for i in 0..u.rows() {
                u[(i, j)] = -u[(i, j)];
            }
        }
    }
}

/// Eigenvectors of the symmetrized Laplacian `D_sym - (W + W^T) / 2`,
/// ascending by eigenvalue, each with a positive first nonzero entry.
pub fn laplacian_basis(g: &WeightedDigraph) -> Result<DenseMatrix> {
    Ok(laplacian_eigen(g)?.vectors)
}

pub fn laplacian_eigen(g: &WeightedDigraph) -> Result<linalg::SymmetricEigen> {
    let n = g.n();
    let d = symmetrized_degrees(g);
    let mut l = DenseMatrix::diagonal(&d);
    for e in g.edges() {
        l[(e.from, e.to)] -= 0.5 * e.weight;
        l[(e.to, e.from)] -= 0.5 * e.weight;
    }
    let mut eig = linalg::symmetric_eigh(&l)?;
    fix_column_signs(&mut eig.vectors);
    debug_assert_eq!(eig.vectors.rows(), n);
    Ok(eig)
}

/// `u_1 = 1 / ||Q^{1/2} 1||`.
pub fn first_mode(q: &DiagonalMetric) -> Vec<f64> {
    let ones = vec![1.0; q.n()];
    linalg::scaled(&ones, 1.0 / q.norm(&ones))
}

/// `U = Q^{-1/2} [v_1, Vt]` with `v_1 = Q^{1/2} u_1` and `Vt` an orthonormal
/// completion of `v_1`, so `U^T Q U = I` and `U e_1 = u_1`.
pub fn metric_seed_basis(q: &DiagonalMetric) -> Result<DenseMatrix> {
    let n = q.n();
    let u1 = first_mode(q);
    let v1: Vec<f64> = u1.iter().zip(q.diag()).map(|(u, d)| u * d.sqrt()).collect();
    let row = DenseMatrix::new(1, n, v1.clone())?;
    let rest = linalg::orthonormal_null_basis(&row, default_rank_tol(1, n));
    let mut u = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let s = 1.0 / q.diag()[i].sqrt();
        u[(i, 0)] = s * v1[i];
        for j in 0..rest.cols() {
            u[(i, j + 1)] = s * rest[(i, j)];
        }
    }
    Ok(u)
}

/// Seed basis for constraints and initial points: the Laplacian basis for
/// `Q = I`, [`metric_seed_basis`] otherwise.
pub fn seed_basis(g: &WeightedDigraph, q: &DiagonalMetric) -> Result<DenseMatrix> {
    if q.is_identity() {
        let mut u = laplacian_basis(g)?;
        // pin the first column to the exact constant mode on connected graphs
        let u1 = first_mode(q);
        let col = u.column(0);
        if linalg::dist(&col, &u1) < 1e-8 {
            for (i, v) in u1.iter().enumerate() {
                u[(i, 0)] = *v;
            }
        }
        Ok(u)
    } else {
        metric_seed_basis(q)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartClass {
    Adversarial,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartPoint {
    pub x: Vec<f64>,
    pub class: StartClass,
}

/// Counts and seed for multi-start runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiStart {
    pub n_adv: usize,
    pub n_rand: usize,
    pub seed: u64,
}

impl Default for MultiStart {
    /// 50 starts, the first 30% adversarial.
    fn default() -> Self {
        Self {
            n_adv: 15,
            n_rand: 35,
            seed: 0,
        }
    }
}

impl MultiStart {
    pub fn total(&self) -> usize {
        self.n_adv + self.n_rand
    }
}

const MAX_RESAMPLE: usize = 100;

/// `(a x1 + b x2) / ||a x1 + b x2||`.
pub fn adversarial_combination(x1: &[f64], x2: &[f64], a: f64, b: f64) -> Option<Vec<f64>> {
    let mix: Vec<f64> = x1.iter().zip(x2).map(|(u, v)| a * u + b * v).collect();
    linalg::normalized(&mix)
}

/// Start points for mode `k` (1-based), adversarial ones first.
///
/// Adversarial starts mix, with coefficients uniform in `(0, 1)`, the two
/// columns among `k..n` of `u_full` whose images in `V`-coordinates have the
/// largest ratio. Random starts are normalized standard Gaussian vectors.
pub fn initial_points(
    p: &FractionalProblem,
    u_full: &DenseMatrix,
    k: usize,
    n_adv: usize,
    n_rand: usize,
    rng: &mut SeededRng,
) -> Result<Vec<StartPoint>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("mode index must be >= 2, got {k}")));
    }
    if u_full.rows() != p.n() {
        return Err(Error::DimensionMismatch {
            expected: p.n(),
            got: u_full.rows(),
        });
    }
    let valid = |x: &[f64]| p.denominator(x) > 1e-12;
    let mut out = Vec::with_capacity(n_adv + n_rand);
    if n_adv > 0 {
        let mut scored: Vec<(f64, Vec<f64>)> = (k - 1..u_full.cols())
            .filter_map(|j| {
                let coords = p.restrict(&u_full.column(j));
                if linalg::norm(&coords) < 1e-10 {
                    return None;
                }
                let x = linalg::normalized(&coords).filter(|x| valid(x))?;
                Some((p.evaluate(&x).ok()?.e, x))
            })
            .collect();
        if scored.is_empty() {
            return Err(Error::InvalidParameter(
                "no seed column has a nonzero component in the constraint space".into(),
            ));
        }
        // stable sort keeps the lower column first among equal ratios
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let first = scored[0].1.clone();
        let second = scored.get(1).map_or_else(|| first.clone(), |s| s.1.clone());
        for _ in 0..n_adv {
            let mut point = None;
            for _ in 0..MAX_RESAMPLE {
                let a: f64 = open_unit(rng);
                let b: f64 = open_unit(rng);
                if let Some(x) = adversarial_combination(&first, &second, a, b).filter(|x| valid(x)) {
                    point = Some(x);
                    break;
                }
            }
            let x = point.ok_or(Error::OutsideDomain("could not draw an adversarial start"))?;
            out.push(StartPoint {
                x,
                class: StartClass::Adversarial,
            });
        }
    }
    for _ in 0..n_rand {
        let mut point = None;
        for _ in 0..MAX_RESAMPLE {
            let g: Vec<f64> = (0..p.dim()).map(|_| rng.sample(StandardNormal)).collect();
            if let Some(x) = linalg::normalized(&g).filter(|x| valid(x)) {
                point = Some(x);
                break;
            }
        }
        let x = point.ok_or(Error::OutsideDomain("could not draw a random start"))?;
        out.push(StartPoint {
            x,
            class: StartClass::Random,
        });
    }
    Ok(out)
}

fn open_unit(rng: &mut SeededRng) -> f64 {
    loop {
        let v: f64 = rng.random();
        if v > 0.0 {
            return v;
        }
    }
}

/// Accumulated `Q`-orthonormal modes.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSet {
    pub u: DenseMatrix,
    pub q: DiagonalMetric,
    /// `T(u_j)` for each mode.
    pub values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModeSetJson {
    n: usize,
    q: Vec<f64>,
    #[serde(rename = "K")]
    k: usize,
    /// Column-major `n x K`.
    modes: Vec<f64>,
    values: Vec<f64>,
}

impl ModeSet {
    pub fn count(&self) -> usize {
        self.u.cols()
    }

    pub fn mode(&self, j: usize) -> Vec<f64> {
        self.u.column(j)
    }

    /// `max |U^T Q U - I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let qu = DenseMatrix::from_fn(self.u.rows(), self.u.cols(), |i, j| self.q.diag()[i] * self.u[(i, j)]);
        let g = self.u.transpose().matmul(&qu).expect("shapes agree");
        g.sub(&DenseMatrix::identity(self.u.cols())).expect("square").max_abs()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModeSetJson {
            n: self.u.rows(),
            q: self.q.diag().to_vec(),
            k: self.u.cols(),
            modes: self.u.to_column_major(),
            values: self.values.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ModeSetJson = serde_json::from_str(text)?;
        if raw.modes.len() != raw.n * raw.k || raw.values.len() != raw.k {
            return Err(Error::DimensionMismatch {
                expected: raw.n * raw.k,
                got: raw.modes.len(),
            });
        }
        let u = DenseMatrix::from_fn(raw.n, raw.k, |i, j| raw.modes[j * raw.n + i]);
        Ok(Self {
            u,
            q: DiagonalMetric::new(raw.q)?,
            values: raw.values,
        })
    }
}

/// Outcome of a multi-start solve for one mode.
#[derive(Debug)]
pub struct ModeSolve {
    pub best_start: usize,
    pub traces: Vec<Result<SolverTrace>>,
}

/// Solver seed for start `s` of mode `k`.
pub fn start_seed(base: u64, k: usize, s: usize) -> u64 {
    derive_seed(derive_seed(base, k as u64), s as u64)
}

/// Runs every start in parallel and returns the index of the lowest final
/// value (lowest index on ties).
pub fn solve_multistart(
    p: &FractionalProblem,
    starts: &[StartPoint],
    cfg: &SolverConfig,
    k: usize,
) -> Result<ModeSolve> {
    let traces: Vec<Result<SolverTrace>> = starts
        .par_iter()
        .enumerate()
        .map(|(s, sp)| ps_dca_run(p, &sp.x, &cfg.clone().with_seed(start_seed(cfg.seed, k, s))))
        .collect();
    let best = traces
        .iter()
        .enumerate()
        .filter_map(|(i, t)| t.as_ref().ok().map(|t| (i, t.final_value)))
        .fold(None, |best: Option<(usize, f64)>, cur| match best {
            Some(b) if b.1 <= cur.1 => Some(b),
            _ => Some(cur),
        });
    match best {
        Some((best_start, _)) => Ok(ModeSolve { best_start, traces }),
        None => Err(Error::AllStartsFailed(starts.len())),
    }
}

/// Computes `u_1, ..., u_K` sequentially.
pub fn compute_modes(
    g: &WeightedDigraph,
    q: &DiagonalMetric,
    k_modes: usize,
    cfg: &SolverConfig,
    starts: &MultiStart,
) -> Result<ModeSet> {
    let n = g.n();
    if q.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: q.n(),
        });
    }
    if k_modes < 2 || k_modes > n {
        return Err(Error::InvalidParameter(format!("need 2 <= K <= n, got K={k_modes}, n={n}")));
    }
    if let Some(i) = symmetrized_degrees(g).iter().position(|&d| d == 0.0) {
        return Err(Error::IsolatedVertex(i));
    }
    if starts.total() == 0 {
        return Err(Error::InvalidParameter("need at least one start".into()));
    }
    let inc = incidence(g);
    let seed = seed_basis(g, q)?;
    let symmetric = g.is_symmetric();
    let mut columns = vec![first_mode(q)];
    let mut values = vec![0.0];
    for k in 2..=k_modes {
        let u_prev = DenseMatrix::from_columns(n, &columns)?;
        let v = constraint_basis(&u_prev, q)?;
        let p = FractionalProblem::new(inc.clone(), q.clone(), v)?;
        let mut rng = seeded(derive_seed(starts.seed, k as u64));
        let points = initial_points(&p, &seed, k, starts.n_adv, starts.n_rand, &mut rng)?;
        let solve = solve_multistart(&p, &points, cfg, k)?;
        let best = solve.traces[solve.best_start].as_ref().expect("best start succeeded");
        let lifted = p.lift(&best.final_point);
        let mut mode = linalg::scaled(&lifted, 1.0 / q.norm(&lifted));
        if symmetric {
            if let Some(&v) = mode.iter().find(|v| v.abs() > 1e-12) {
                if v < 0.0 {
                    mode.iter_mut().for_each(|x| *x = -*x);
                }
            }
        }
        values.push(crate::functionals::dv_eval(&inc, &mode, false)?);
        columns.push(mode);
    }
    Ok(ModeSet {
        u: DenseMatrix::from_columns(n, &columns)?,
        q: q.clone(),
        values,
    })
}
