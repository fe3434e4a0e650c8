//! Outer iterations: PSA and PS-DCA.
//!
//! One PSA step from a unit vector `x` computes the candidate
//!
//! ```text
//! l = prox_{lambda T}(x + lambda E(x) grad B(x)),   x_next = l / ||l||.
//! ```
//!
//! PS-DCA then runs one DC step from the origin on
//! `T(.) + rho/2 ||.||^2 - (E(l) B(.) + rho/2 ||.||^2)`, i.e.
//! `t = prox_{T / rho}(E(l) w / rho)` for a chosen `w` in the subdifferential
//! of `B` at zero, and replaces `l` by `t` when
//! `T(t) - E(l) B(t) < -eps_accept`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{FractionalProblem, RatioValue};
use crate::linalg;
use crate::prox::{prox_dv_warm, InnerConfig, ProxResult};
use crate::rng::{seeded, SeededRng};

/// Rule for the DC regularization parameter `rho_k`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoRule {
    /// `rho_k = E(l^k)`.
    #[default]
    RatioAtCandidate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// `lambda_k = lambda_scale / ||CV||`.
    pub lambda_scale: f64,
    pub rho_rule: RhoRule,
    /// DC acceptance threshold `eps'`.
    pub eps_accept: f64,
    /// Stop once `|E(x^{k+1}) - E(x^k)| < tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Seed of the random branch of the `w` selection.
    pub seed: u64,
    /// `false` runs plain PSA.
    pub dca_enabled: bool,
    /// `false` skips the projection onto the unit sphere (PGSA-style ablation).
    pub normalize: bool,
    pub inner: InnerConfig,
}

impl SolverConfig {
    /// PS-DCA with `lambda_k = 100 / ||CV||`, `rho_k = E(l^k)`, `eps' = 1e-6`.
    pub fn ps_dca() -> Self {
        Self {
            lambda_scale: 100.0,
            rho_rule: RhoRule::RatioAtCandidate,
            eps_accept: 1e-6,
            tol: 1e-6,
            max_iter: 20,
            seed: 0,
            dca_enabled: true,
            normalize: true,
            inner: InnerConfig::default(),
        }
    }

    /// PSA with `lambda_k = 80 / ||CV||`.
    pub fn psa() -> Self {
        Self {
            lambda_scale: 80.0,
            dca_enabled: false,
            ..Self::ps_dca()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda_scale > 0.0 && self.eps_accept > 0.0 && self.tol > 0.0 && self.max_iter >= 1;
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "solver config needs lambda_scale, eps_accept, tol > 0 and max_iter >= 1: {self:?}"
            )));
        }
        self.inner.validate()
    }

    /// Inner settings with the gap tolerance tied to the outer tolerance.
    fn effective_inner(&self) -> InnerConfig {
        InnerConfig {
            tol: self.inner.tol.min(1e-2 * self.tol),
            ..self.inner
        }
    }

    pub fn lambda_for(&self, p: &FractionalProblem) -> f64 {
        if p.norm_cv() > 0.0 {
            self.lambda_scale / p.norm_cv()
        } else {
            self.lambda_scale
        }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::ps_dca()
    }
}

/// How `w^k` was chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DcaBranch {
    /// No DC step this iteration (PSA, or `E(l^k) = 0`).
    None,
    /// The bound test fired and `w^k` is a signed, scaled basis vector.
    ConditionFired,
    /// Random signed, scaled basis vector.
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcaRecord {
    pub rho: f64,
    /// `T(Vt) - E(l) B(t)`.
    pub delta: f64,
    /// `||t||^2`.
    pub t_norm_sq: f64,
    /// `E(t)`, absent when `t = 0`.
    pub t_value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `E(x^k)`.
    pub prev_value: f64,
    /// `E(x^{k+1})`.
    pub value: f64,
    /// `||x^k - l^k||`.
    pub step_norm: f64,
    /// `||x^k - x^{k+1}||`.
    pub move_norm: f64,
    pub lambda: f64,
    /// `E(l^k)`.
    pub candidate_value: f64,
    /// `B(l^k)`.
    pub candidate_b: f64,
    pub branch: DcaBranch,
    pub dca: Option<DcaRecord>,
    pub dca_accepted: bool,
    pub inner_iters: usize,
    pub inner_converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    MaxIter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub initial_value: f64,
    pub iterates: Vec<IterationRecord>,
    /// Unit vector.
    pub final_point: Vec<f64>,
    pub final_value: f64,
    pub status: RunStatus,
}

impl SolverTrace {
    pub fn iterations(&self) -> usize {
        self.iterates.len()
    }

    pub fn dca_acceptances(&self) -> usize {
        self.iterates.iter().filter(|r| r.dca_accepted).count()
    }

    /// One JSON object per iteration.
    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.iterates {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// Output of one proximal-subgradient step.
#[derive(Clone, Debug)]
pub struct PsaStep {
    pub x_next: Vec<f64>,
    pub candidate: Vec<f64>,
    pub current: RatioValue,
    pub candidate_ratio: RatioValue,
    pub prox: ProxResult,
}

/// `l = prox_{lambda T}(x + lambda E(x) grad B(x))`, `x_next = l / ||l||`.
pub fn psa_step(
    p: &FractionalProblem,
    x: &[f64],
    lambda: f64,
    inner: &InnerConfig,
    warm: Option<&[f64]>,
) -> Result<PsaStep> {
    let current = p.evaluate(x)?;
    let grad = p.b_gradient(x)?;
    let z: Vec<f64> = x
        .iter()
        .zip(&grad)
        .map(|(xi, gi)| xi + lambda * current.e * gi)
        .collect();
    let prox = prox_dv_warm(p, &z, lambda, inner, warm)?;
    let candidate = prox.point.clone();
    let Some(x_next) = linalg::normalized(&candidate) else {
        return Err(Error::VanishingCandidate { gap: prox.gap });
    };
    let candidate_ratio = p
        .evaluate(&candidate)
        .map_err(|_| Error::VanishingCandidate { gap: prox.gap })?;
    Ok(PsaStep {
        x_next,
        candidate,
        current,
        candidate_ratio,
        prox,
    })
}

/// Chooses `w^k` from `+-sqrt(d_min) e_i`.
///
/// When `sqrt(d_min) E(l) > min(T(v_{i_m}), T_1(v_{ibar_m}))` some entry of
/// `E(l) w` must leave the bounds `-T_1(v_s) <= . <= T(v_s)` satisfied by
/// every element of `V^T dT(0)`, which guarantees a strict DC descent.
/// Otherwise index and sign are drawn at random.
pub fn select_w(p: &FractionalProblem, e_l: f64, rng: &mut SeededRng) -> (Vec<f64>, DcaBranch) {
    let m = p.dim();
    let radius = p.metric().d_min().sqrt();
    let stats = p.column_stats();
    let t_min = stats.forward[stats.forward_argmin];
    let t1_min = stats.reversed[stats.reversed_argmin];
    let mut w = vec![0.0; m];
    if radius * e_l > t_min.min(t1_min) {
        if t_min <= t1_min {
            w[stats.forward_argmin] = radius;
        } else {
            w[stats.reversed_argmin] = -radius;
        }
        (w, DcaBranch::ConditionFired)
    } else {
        let i = rng.random_range(0..m);
        w[i] = if rng.random::<bool>() { radius } else { -radius };
        (w, DcaBranch::Random)
    }
}

#[derive(Clone, Debug)]
pub struct DcaRefine {
    pub t: Vec<f64>,
    /// `T(Vt) - E(l) B(t)`.
    pub delta: f64,
    pub prox: ProxResult,
}

/// `t = prox_{T / rho}(E(l) w / rho)` and its DC objective value.
pub fn dca_refine(
    p: &FractionalProblem,
    l: &[f64],
    rho: f64,
    w: &[f64],
    inner: &InnerConfig,
    warm: Option<&[f64]>,
) -> Result<DcaRefine> {
    if rho.is_nan() || rho <= 0.0 {
        return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
    }
    let e_l = p.evaluate(l)?.e;
    let z = linalg::scaled(w, e_l / rho);
    let prox = prox_dv_warm(p, &z, 1.0 / rho, inner, warm)?;
    let t = prox.point.clone();
    let delta = p.numerator(&t) - e_l * p.denominator(&t);
    Ok(DcaRefine { t, delta, prox })
}

fn check_start(p: &FractionalProblem, x0: &[f64]) -> Result<Vec<f64>> {
    if x0.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: x0.len(),
        });
    }
    let x = linalg::normalized(x0).ok_or(Error::OutsideDomain("start point is zero"))?;
    if p.denominator(&x) <= 0.0 {
        return Err(Error::OutsideDomain("denominator vanishes at the start point"));
    }
    Ok(x)
}

/// Runs PS-DCA (or PSA when `cfg.dca_enabled` is false) from `x0`.
pub fn ps_dca_run(p: &FractionalProblem, x0: &[f64], cfg: &SolverConfig) -> Result<SolverTrace> {
    cfg.validate()?;
    let mut x = check_start(p, x0)?;
    let inner = cfg.effective_inner();
    let lambda = cfg.lambda_for(p);
    let mut rng = seeded(cfg.seed);
    let initial_value = p.evaluate(&x)?.e;
    let mut value = initial_value;
    let mut psa_warm: Option<Vec<f64>> = None;
    let mut dca_warm: Option<Vec<f64>> = None;
    let mut iterates = Vec::new();
    let mut status = RunStatus::MaxIter;

    for iteration in 0..cfg.max_iter {
        let step = psa_step(p, &x, lambda, &inner, psa_warm.as_deref())?;
        let e_l = step.candidate_ratio.e;
        let mut y = step.candidate.clone();
        let mut branch = DcaBranch::None;
        let mut dca = None;
        let mut accepted = false;
        let mut inner_iters = step.prox.inner_iters;
        let mut inner_converged = step.prox.converged;

        if cfg.dca_enabled && e_l > 0.0 {
            let rho = match cfg.rho_rule {
                RhoRule::RatioAtCandidate => e_l,
            };
            let (w, chosen) = select_w(p, e_l, &mut rng);
            branch = chosen;
            let refine = dca_refine(p, &step.candidate, rho, &w, &inner, dca_warm.as_deref())?;
            inner_iters += refine.prox.inner_iters;
            inner_converged &= refine.prox.converged;
            let t_norm_sq = linalg::dot(&refine.t, &refine.t);
            let t_value = p.evaluate(&refine.t).ok().map(|r| r.e);
            dca = Some(DcaRecord {
                rho,
                delta: refine.delta,
                t_norm_sq,
                t_value,
            });
            if refine.delta < -cfg.eps_accept {
                accepted = true;
                y = refine.t;
            }
            dca_warm = Some(refine.prox.dual);
        }
        psa_warm = Some(step.prox.dual);

        let x_next = if cfg.normalize {
            linalg::normalized(&y).ok_or(Error::VanishingCandidate { gap: f64::NAN })?
        } else {
            y
        };
        let next_value = p.evaluate(&x_next)?.e;
        iterates.push(IterationRecord {
            iteration,
            prev_value: value,
            value: next_value,
            step_norm: linalg::dist(&x, &step.candidate),
            move_norm: linalg::dist(&x, &x_next),
            lambda,
            candidate_value: e_l,
            candidate_b: step.candidate_ratio.b,
            branch,
            dca,
            dca_accepted: accepted,
            inner_iters,
            inner_converged,
        });
        let done = (next_value - value).abs() < cfg.tol;
        x = x_next;
        value = next_value;
        if done {
            status = RunStatus::Converged;
            break;
        }
    }
    let final_point = linalg::normalized(&x).expect("iterates are nonzero");
    Ok(SolverTrace {
        initial_value,
        iterates,
        final_point,
        final_value: value,
        status,
    })
}

/// PSA from `x0`: [`ps_dca_run`] with the DC step disabled.
pub fn psa_run(p: &FractionalProblem, x0: &[f64], cfg: &SolverConfig) -> Result<SolverTrace> {
    let cfg = SolverConfig {
        dca_enabled: false,
        ..cfg.clone()
    };
    ps_dca_run(p, x0, &cfg)
}

/// `||x - prox_{lambda T}(x + lambda E(x) grad B(x))||`; zero exactly at
/// critical points.
pub fn criticality_residual(p: &FractionalProblem, x: &[f64], lambda: f64, inner: &InnerConfig) -> Result<f64> {
    let step = psa_step(p, x, lambda, inner, None);
    match step {
        Ok(s) => Ok(linalg::dist(x, &s.candidate)),
        // the candidate collapsed to zero, so its distance from x is ||x||
        Err(Error::VanishingCandidate { .. }) => Ok(linalg::norm(x)),
        Err(e) => Err(e),
    }
}
