//! Proximal operator of `x -> T(Vx)`.
//!
//! With `A = C V` and weights `w`, `T(Vx) = max_{0 <= u <= w} u^T A x`, so
//!
//! ```text
//! prox(z) = argmin_x T(Vx) + ||x - z||^2 / (2 lambda)
//! ```
//!
//! has the box-constrained dual
//!
//! ```text
//! min_{0 <= u <= w} (lambda / 2) ||A^T u||^2 - u^T A z,
//! ```
//!
//! solved by projected gradient with momentum and restarts (default), plain
//! projected gradient, or exact dual coordinate descent. The primal point is
//! recovered as `x = z - lambda A^T u`, and the duality gap at `u` reduces to
//! `sum_k w_k max(0, s_k) - u_k s_k` with `s = A x`.
//!
//! Because `T(V .)` is polyhedral, the exact prox is the projection of
//! `z - lambda A_+^T w_+` onto the kernel of `A_0`, where `+` and `0` are the
//! edges with positive and zero difference at the solution. After the
//! iterative solve this face is guessed from the approximate point at a few
//! thresholds and the projected point replaces it when it is consistent with
//! the guessed signs and does not raise the prox objective. Strong convexity
//! keeps the distance-to-solution bound of the iterative point either way.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::FractionalProblem;
use crate::linalg::{self, DenseMatrix};

/// Solver for the box-constrained dual.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerMethod {
    /// Cyclic exact minimization over one dual coordinate at a time; one
    /// iteration is a full sweep.
    CoordinateDescent,
    /// Projected gradient with Nesterov momentum and restarts.
    #[default]
    Fista,
    /// Plain projected gradient.
    ProjectedGradient,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerConfig {
    /// Relative duality-gap tolerance, scaled by `1 + ||z||^2 / lambda`.
    pub tol: f64,
    pub max_iter: usize,
    pub method: InnerMethod,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
            method: InnerMethod::Fista,
        }
    }
}

impl InnerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tol.is_nan() || self.tol <= 0.0 || self.max_iter == 0 {
            return Err(Error::InvalidParameter(format!(
                "inner tol must be > 0 and max_iter >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxResult {
    pub point: Vec<f64>,
    /// Dual variable, `0 <= dual[k] <= w[k]`. `point` equals
    /// `z - lambda A^T dual` unless the face projection replaced it.
    pub dual: Vec<f64>,
    pub gap: f64,
    pub inner_iters: usize,
    pub converged: bool,
}

/// Momentum restart period.
const RESTART_PERIOD: usize = 50;
/// Iterations between duality-gap evaluations.
const GAP_CHECK_PERIOD: usize = 10;

/// `T(Vx) + ||x - z||^2 / (2 lambda)`.
pub fn prox_objective(p: &FractionalProblem, z: &[f64], lambda: f64, x: &[f64]) -> f64 {
    let d = linalg::dist(x, z);
    p.numerator(x) + d * d / (2.0 * lambda)
}

/// Workspace for applying `A = C V` and `A^T` without forming dense products.
struct Operator<'a> {
    p: &'a FractionalProblem,
    node_buf: Vec<f64>,
}

impl<'a> Operator<'a> {
    fn new(p: &'a FractionalProblem) -> Self {
        Self {
            p,
            node_buf: vec![0.0; p.n()],
        }
    }

    /// `A x`.
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.p.incidence().apply(&self.p.lift(x))
    }

    /// `A^T u`.
    fn adjoint(&mut self, u: &[f64]) -> Vec<f64> {
        self.p.incidence().apply_transpose_into(u, &mut self.node_buf);
        self.p.basis().tr_matvec(&self.node_buf)
    }
}

fn primal_from_dual(op: &mut Operator<'_>, z: &[f64], lambda: f64, u: &[f64]) -> Vec<f64> {
    let atu = op.adjoint(u);
    z.iter().zip(&atu).map(|(zi, a)| zi - lambda * a).collect()
}

fn gap_at(weights: &[f64], u: &[f64], s: &[f64]) -> f64 {
    weights
        .iter()
        .zip(u)
        .zip(s)
        .map(|((w, uk), sk)| w * sk.max(0.0) - uk * sk)
        .sum::<f64>()
        .max(0.0)
}

/// Accelerated or plain projected gradient on the dual; returns
/// `(iterations, gap, converged)`.
#[allow(clippy::too_many_arguments)]
fn projected_gradient(
    op: &mut Operator<'_>,
    z: &[f64],
    lambda: f64,
    lipschitz: f64,
    max_iter: usize,
    threshold: f64,
    accelerated: bool,
    u: &mut Vec<f64>,
) -> (usize, f64, bool) {
    let weights = op.p.incidence().weights();
    let step = 1.0 / lipschitz;
    let mut y = u.clone();
    let mut momentum = 1.0_f64;
    let mut gap = f64::INFINITY;
    let mut iters = 0;
    let mut converged = false;
    while iters < max_iter {
        if iters % GAP_CHECK_PERIOD == 0 {
            let x = primal_from_dual(op, z, lambda, u);
            gap = gap_at(weights, u, &op.forward(&x));
            if gap <= threshold {
                converged = true;
                break;
            }
        }
        iters += 1;
        // gradient of the dual objective at y is -A x(y)
        let x_y = primal_from_dual(op, z, lambda, &y);
        let s = op.forward(&x_y);
        let u_next: Vec<f64> = y
            .iter()
            .zip(&s)
            .zip(weights)
            .map(|((yk, sk), w)| (yk + step * sk).clamp(0.0, *w))
            .collect();
        if accelerated {
            let restart = iters % RESTART_PERIOD == 0
                || y
                    .iter()
                    .zip(&u_next)
                    .zip(u.iter())
                    .map(|((yk, un), uk)| (yk - un) * (un - uk))
                    .sum::<f64>()
                    > 0.0;
            if restart {
                momentum = 1.0;
                y.clone_from(&u_next);
            } else {
                let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
                let beta = (momentum - 1.0) / next;
                for ((yk, un), uk) in y.iter_mut().zip(&u_next).zip(u.iter()) {
                    *yk = un + beta * (un - uk);
                }
                momentum = next;
            }
        } else {
            y.clone_from(&u_next);
        }
        *u = u_next;
    }
    (iters, gap, converged)
}

/// Cyclic coordinate descent on the dual; returns `(sweeps, gap, converged)`.
fn coordinate_descent(
    p: &FractionalProblem,
    z: &[f64],
    lambda: f64,
    max_iter: usize,
    threshold: f64,
    u: &mut [f64],
) -> (usize, f64, bool) {
    let a = p.cv();
    let weights = p.incidence().weights();
    let curvature: Vec<f64> = (0..a.rows()).map(|k| lambda * linalg::dot(a.row(k), a.row(k))).collect();
    let recover = |u: &[f64]| -> Vec<f64> {
        let atu = a.tr_matvec(u);
        z.iter().zip(&atu).map(|(zi, v)| zi - lambda * v).collect()
    };
    let mut x = recover(u);
    let mut gap = f64::INFINITY;
    let mut sweeps = 0;
    loop {
        if sweeps % GAP_CHECK_PERIOD == 0 {
            // refresh x from u so rounding in the incremental updates cannot build up
            x = recover(u);
            gap = gap_at(weights, u, &a.matvec(&x));
            if gap <= threshold {
                return (sweeps, gap, true);
            }
        }
        if sweeps == max_iter {
            return (sweeps, gap, false);
        }
        sweeps += 1;
        for k in 0..a.rows() {
            if curvature[k] == 0.0 {
                continue;
            }
            let row = a.row(k);
            let next = (u[k] + linalg::dot(row, &x) / curvature[k]).clamp(0.0, weights[k]);
            let delta = next - u[k];
            if delta != 0.0 {
                u[k] = next;
                for (xi, ai) in x.iter_mut().zip(row) {
                    *xi -= lambda * delta * ai;
                }
            }
        }
    }
}

/// Relative thresholds for classifying an edge difference as zero.
const FACE_THRESHOLDS: [f64; 4] = [1e-10, 1e-8, 1e-6, 1e-4];
/// Relative slack when comparing prox objectives.
const POLISH_SLACK: f64 = 1e-12;

/// Projection of `z - lambda A_+^T w_+` onto `ker A_0` for the face read
/// off `x` at threshold `tau`, if the result keeps the face's signs.
fn face_projection(p: &FractionalProblem, z: &[f64], lambda: f64, s: &[f64], tau: f64) -> Option<Vec<f64>> {
    let a = p.cv();
    let weights = p.incidence().weights();
    let mut y = z.to_vec();
    let mut zero_rows = Vec::new();
    for (k, (&sk, &w)) in s.iter().zip(weights).enumerate() {
        if sk > tau {
            for (yi, aki) in y.iter_mut().zip(a.row(k)) {
                *yi -= lambda * w * aki;
            }
        } else if sk.abs() <= tau {
            zero_rows.push(a.row(k).to_vec());
        }
    }
    let x = if zero_rows.is_empty() {
        y
    } else {
        let a0 = DenseMatrix::from_rows(&zero_rows).ok()?;
        let range = linalg::row_space_split(&a0, linalg::default_rank_tol(a0.rows(), a0.cols())).range;
        let along = range.matvec(&range.tr_matvec(&y));
        y.iter().zip(&along).map(|(yi, ri)| yi - ri).collect()
    };
    let s_new = a.matvec(&x);
    let slack = 1e-12 * (1.0 + s.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    let consistent = s.iter().zip(&s_new).all(|(&old, &new)| {
        if old > tau {
            new >= -slack
        } else if old < -tau {
            new <= slack
        } else {
            true
        }
    });
    consistent.then_some(x)
}

/// Best face projection around `x`, if it does not raise the prox objective.
fn polish(p: &FractionalProblem, z: &[f64], lambda: f64, x: &[f64]) -> Option<Vec<f64>> {
    let s = p.cv().matvec(x);
    let scale = s.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let base = prox_objective(p, z, lambda, x);
    let limit = base + POLISH_SLACK * (1.0 + base.abs());
    FACE_THRESHOLDS
        .iter()
        .filter_map(|t| face_projection(p, z, lambda, &s, t * scale))
        .map(|c| (prox_objective(p, z, lambda, &c), c))
        .filter(|(f, _)| *f <= limit)
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c)
}

/// Evaluates `prox_{lambda T(V .)}(z)` from a zero dual start.
pub fn prox_dv(p: &FractionalProblem, z: &[f64], lambda: f64, cfg: &InnerConfig) -> Result<ProxResult> {
    prox_dv_warm(p, z, lambda, cfg, None)
}

/// Evaluates `prox_{lambda T(V .)}(z)`, optionally warm-starting the dual.
pub fn prox_dv_warm(
    p: &FractionalProblem,
    z: &[f64],
    lambda: f64,
    cfg: &InnerConfig,
    warm: Option<&[f64]>,
) -> Result<ProxResult> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("prox parameter must be positive, got {lambda}")));
    }
    cfg.validate()?;
    if z.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: z.len(),
        });
    }
    let weights = p.incidence().weights();
    let rows = weights.len();
    let mut u: Vec<f64> = match warm {
        Some(w0) if w0.len() == rows => w0.iter().zip(weights).map(|(v, w)| v.clamp(0.0, *w)).collect(),
        _ => vec![0.0; rows],
    };
    let mut op = Operator::new(p);
    let lipschitz = lambda * p.norm_cv() * p.norm_cv();
    if rows == 0 || lipschitz == 0.0 {
        return Ok(ProxResult {
            point: z.to_vec(),
            dual: vec![0.0; rows],
            gap: 0.0,
            inner_iters: 0,
            converged: true,
        });
    }
    let threshold = cfg.tol * (1.0 + linalg::dot(z, z) / lambda);
    let (iters, mut gap, mut converged) = match cfg.method {
        InnerMethod::CoordinateDescent => coordinate_descent(p, z, lambda, cfg.max_iter, threshold, &mut u),
        InnerMethod::Fista => projected_gradient(&mut op, z, lambda, lipschitz, cfg.max_iter, threshold, true, &mut u),
        InnerMethod::ProjectedGradient => {
            projected_gradient(&mut op, z, lambda, lipschitz, cfg.max_iter, threshold, false, &mut u)
        }
    };
    let mut point = primal_from_dual(&mut op, z, lambda, &u);
    if !converged {
        gap = gap_at(weights, &u, &op.forward(&point));
        converged = gap <= threshold;
    }
    if let Some(polished) = polish(p, z, lambda, &point) {
        point = polished;
    }
    Ok(ProxResult {
        point,
        dual: u,
        gap,
        inner_iters: iters,
        converged,
    })
}
