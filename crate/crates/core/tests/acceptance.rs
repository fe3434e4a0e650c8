//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs without the libtest harness so the lines are always shown.

use std::process::ExitCode;
use std::time::Instant;

use fracgfm::functionals::FractionalProblem;
use fracgfm::gfm::{compute_modes, MultiStart};
use fracgfm::graph::{degree_metric, incidence};
use fracgfm::harness::{run_experiment_detailed, summarize, Algorithm, DetailedRun, ExperimentConfig, GraphSpec, QSpec};
use fracgfm::linalg;
use fracgfm::prox::{prox_dv, prox_objective, InnerConfig};
use fracgfm::rng::seeded;
use fracgfm::solver::{psa_run, RunStatus, SolverConfig};
use fracgfm::{DenseMatrix, DiagonalMetric, WeightedDigraph};
use rand::Rng;

struct Outcome {
    id: u8,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn report(outcomes: &[Outcome]) -> bool {
    for o in outcomes {
        println!(
            "criterion {} [{}] {}: {}",
            o.id,
            if o.pass { "PASS" } else { "FAIL" },
            o.name,
            o.detail
        );
    }
    outcomes.iter().all(|o| o.pass)
}

const DESK_N: usize = 20;

fn graph_specs(kind: &str, seeds: std::ops::Range<u64>) -> Vec<GraphSpec> {
    seeds
        .map(|seed| match kind {
            "rgg" => GraphSpec::Rgg { n: DESK_N, seed },
            "drgg" => GraphSpec::Drgg { n: DESK_N, seed },
            _ => GraphSpec::Community {
                n: DESK_N,
                k_clusters: 2,
                p_in: 0.9,
                p_out: 0.15,
                seed,
            },
        })
        .collect()
}

fn experiment(graphs: Vec<GraphSpec>, q: Vec<QSpec>, starts: MultiStart) -> ExperimentConfig {
    ExperimentConfig {
        graphs,
        q,
        ks: vec![2, 3, 4, 5],
        algorithms: vec![Algorithm::Psa, Algorithm::PsDca],
        starts,
        solver: Default::default(),
        split: 0.3,
        output: Default::default(),
    }
}

/// Criterion 1: `E(x^{k+1}) <= E(x^k) + 1e-10` on every iteration, plus the
/// quantified decrease on PSA-branch iterations and the unit-sphere check.
fn monotone_suite() -> (Outcome, Vec<DetailedRun>) {
    let started = Instant::now();
    let mut runs = Vec::new();
    for kind in ["rgg", "drgg", "community"] {
        let cfg = experiment(
            graph_specs(kind, 100..101),
            vec![QSpec::Identity, QSpec::Degree],
            MultiStart {
                n_adv: 2,
                n_rand: 3,
                seed: 11,
            },
        );
        runs.extend(run_experiment_detailed(&cfg).expect("suite runs"));
    }
    let elapsed = started.elapsed().as_secs_f64();
    let mut worst_rise = f64::NEG_INFINITY;
    let mut decrease_violations = 0;
    let mut sphere_violations = 0;
    let mut failed = 0;
    for r in &runs {
        let Some(trace) = &r.trace else {
            failed += 1;
            continue;
        };
        for it in &trace.iterates {
            worst_rise = worst_rise.max(it.value - it.prev_value);
            if !it.dca_accepted {
                let bound = it.step_norm * it.step_norm / (it.lambda * it.candidate_b);
                if it.prev_value - it.value < bound - 1e-8 {
                    decrease_violations += 1;
                }
            }
        }
        if (linalg::norm(&trace.final_point) - 1.0).abs() > 1e-12 {
            sphere_violations += 1;
        }
    }
    let pass = runs.len() >= 200
        && failed == 0
        && worst_rise <= 1e-10
        && decrease_violations == 0
        && sphere_violations == 0
        && elapsed < 60.0;
    let detail = format!(
        "{} runs ({failed} failed), worst E rise {worst_rise:.3e} (limit 1e-10), \
         sufficient-decrease violations {decrease_violations}, sphere violations {sphere_violations}, {elapsed:.1}s (limit 60s)",
        runs.len()
    );
    (
        Outcome {
            id: 1,
            name: "monotone descent",
            pass,
            detail,
        },
        runs,
    )
}

/// Criterion 2 over every run that stopped on the tolerance test.
fn criticality(runs: &[&DetailedRun]) -> Outcome {
    let mut worst = [0.0_f64; 2];
    let mut over = [0usize; 2];
    let mut count = [0usize; 2];
    for r in runs.iter().filter(|r| r.record.converged && r.record.is_ok()) {
        let a = usize::from(r.record.algorithm == Algorithm::PsDca);
        count[a] += 1;
        worst[a] = worst[a].max(r.record.criticality_residual);
        if r.record.criticality_residual > 1e-4 {
            over[a] += 1;
        }
    }
    Outcome {
        id: 2,
        name: "criticality residual",
        pass: over == [0, 0],
        detail: format!(
            "tolerance-terminated runs: psa {} (worst {:.3e}, {} over 1e-4), ps_dca {} (worst {:.3e}, {} over 1e-4)",
            count[0], worst[0], over[0], count[1], worst[1], over[1]
        ),
    }
}

fn orthonormal_columns(n: usize, m: usize, rng: &mut impl Rng) -> DenseMatrix {
    let mut cols: Vec<Vec<f64>> = Vec::new();
    while cols.len() < m {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        for c in &cols {
            let d = linalg::dot(&v, c);
            v.iter_mut().zip(c).for_each(|(vi, ci)| *vi -= d * ci);
        }
        if let Some(u) = linalg::normalized(&v).filter(|_| linalg::norm(&v) > 1e-3) {
            cols.push(u);
        }
    }
    DenseMatrix::from_columns(n, &cols).unwrap()
}

/// Golden-section search for the minimum of a convex function on `[lo, hi]`.
fn golden(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if hi - lo < 1e-13 {
            break;
        }
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = f(b);
        }
    }
    fa.min(fb)
}

/// Brute-force minimum of a strictly convex function of `m <= 2` variables
/// over the box `center +- radius`: nested golden-section searches (the
/// inner minimum is itself convex in the outer coordinate). A zoomed
/// axis-aligned grid is not used because it stalls in diagonal kink valleys.
fn brute_minimum(m: usize, center: &[f64], radius: f64, f: impl Fn(&[f64]) -> f64) -> f64 {
    if m == 1 {
        golden(center[0] - radius, center[0] + radius, |a| f(&[a]))
    } else {
        golden(center[0] - radius, center[0] + radius, |a| {
            golden(center[1] - radius, center[1] + radius, |b| f(&[a, b]))
        })
    }
}

/// Criterion 3: prox against brute force and closed forms.
fn prox_oracle() -> Outcome {
    let mut rng = seeded(2024);
    let cfg = InnerConfig::default();
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let n = rng.random_range(2..=5);
        let m = rng.random_range(1..=2usize.min(n));
        let mut triples = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.random_bool(0.5) {
                    triples.push((i, j, rng.random_range(0.1..3.0)));
                }
            }
        }
        if triples.is_empty() {
            triples.push((0, 1, 1.0));
        }
        let g = WeightedDigraph::directed(n, &triples).unwrap();
        let v = orthonormal_columns(n, m, &mut rng);
        let p = FractionalProblem::new(incidence(&g), DiagonalMetric::identity(n), v.clone()).unwrap();
        let z: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let lambda = rng.random_range(0.1..3.0);
        let r = prox_dv(&p, &z, lambda, &cfg).unwrap();
        // objective written out from the weight list and V
        let objective = |x: &[f64]| {
            let y = v.matvec(x);
            let t: f64 = triples.iter().map(|&(i, j, w)| w * (y[i] - y[j]).max(0.0)).sum();
            t + linalg::dist(x, &z).powi(2) / (2.0 * lambda)
        };
        // the minimizer is z minus lambda times a subgradient of T(V .)
        let radius = lambda * triples.iter().map(|&(_, _, w)| w * 2f64.sqrt()).sum::<f64>() + 1.0;
        let brute = brute_minimum(m, &z, radius, objective);
        let got = prox_objective(&p, &z, lambda, &r.point);
        worst = worst.max((got - brute).abs());
    }

    let edge = WeightedDigraph::directed(2, &[(0, 1, 1.0)]).unwrap();
    let p = FractionalProblem::new(incidence(&edge), DiagonalMetric::identity(2), DenseMatrix::identity(2)).unwrap();
    let cases: [([f64; 2], f64, [f64; 2]); 3] = [
        ([1.0, 0.0], 1.0, [0.5, 0.5]),
        ([1.0, 0.0], 0.25, [0.75, 0.25]),
        ([0.0, 1.0], 0.5, [0.0, 1.0]),
    ];
    let closed_worst = cases
        .iter()
        .map(|(z, lambda, expect)| linalg::dist(&prox_dv(&p, z, *lambda, &cfg).unwrap().point, expect))
        .fold(0.0_f64, f64::max);
    Outcome {
        id: 3,
        name: "prox oracle equivalence",
        pass: worst <= 1e-6 && closed_worst <= 1e-8,
        detail: format!(
            "50 random m<=2 instances: worst |objective - brute force| {worst:.3e} (limit 1e-6); closed forms worst distance {closed_worst:.3e} (limit 1e-8)"
        ),
    }
}

/// Criterion 4 over every recorded DC step.
fn dca_certificate(runs: &[&DetailedRun]) -> Outcome {
    let mut steps = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut accepted = 0;
    let mut bad_accept = 0;
    for trace in runs.iter().filter_map(|r| r.trace.as_ref()) {
        for it in &trace.iterates {
            let Some(d) = &it.dca else { continue };
            steps += 1;
            worst = worst.max(d.delta + d.rho * d.t_norm_sq);
            if it.dca_accepted {
                accepted += 1;
                if !matches!(d.t_value, Some(e_t) if e_t < it.candidate_value) {
                    bad_accept += 1;
                }
            }
        }
    }
    Outcome {
        id: 4,
        name: "DC descent certificate",
        pass: steps > 0 && worst <= 1e-9 && bad_accept == 0,
        detail: format!(
            "{steps} DC steps, worst T(Vt) - E(l)B(t) + rho||t||^2 = {worst:.3e} (limit 1e-9); \
             {accepted} accepted, {bad_accept} without E(t) < E(l)"
        ),
    }
}

/// Criterion 5: adversarial-subset means of PS-DCA vs PSA.
fn tables(runs: &[DetailedRun], elapsed: f64) -> Outcome {
    let records: Vec<_> = runs.iter().map(|r| r.record.clone()).collect();
    let rows = summarize(&records, 0.3).unwrap();
    let mut cells = 0;
    let mut not_worse = 0;
    let mut much_lower = 0;
    let mut worst_ratio = 0.0_f64;
    let mut sum_ratio = 0.0;
    for psa in rows.iter().filter(|r| r.algorithm == Algorithm::Psa) {
        let Some(dca) = rows
            .iter()
            .find(|r| r.algorithm == Algorithm::PsDca && r.graph_id == psa.graph_id && r.q == psa.q && r.k == psa.k)
        else {
            continue;
        };
        cells += 1;
        assert_eq!((psa.adv_count, dca.adv_count), (15, 15), "adversarial subset is 15 starts");
        if dca.adv_objective <= psa.adv_objective {
            not_worse += 1;
        }
        if dca.adv_objective <= 0.8 * psa.adv_objective {
            much_lower += 1;
        }
        let ratio = dca.adv_objective / psa.adv_objective;
        worst_ratio = worst_ratio.max(ratio);
        sum_ratio += ratio;
    }
    let pass = cells == 80 && not_worse == cells && 2 * much_lower >= cells && elapsed < 600.0;
    Outcome {
        id: 5,
        name: "PS-DCA vs PSA on adversarial starts",
        pass,
        detail: format!(
            "{cells} cells (RGG/I, DRGG/I, DRGG/D, community/D x 5 seeds x k=2..5, 50 starts): \
             ps_dca <= psa in {not_worse}, >=20% lower in {much_lower}; mean ratio {:.3}, worst ratio {worst_ratio:.3}; {elapsed:.1}s (limit 600s)",
            sum_ratio / cells.max(1) as f64
        ),
    }
}

/// Criterion 6: ModeSet invariants and the directed-path zero.
fn mode_validity() -> Outcome {
    let cfg = SolverConfig::ps_dca();
    let starts = MultiStart {
        n_adv: 3,
        n_rand: 7,
        seed: 5,
    };
    let mut worst_defect = 0.0_f64;
    let mut worst_norm = 0.0_f64;
    let mut sets = 0;
    for spec in [
        GraphSpec::Rgg { n: DESK_N, seed: 3 },
        GraphSpec::Drgg { n: DESK_N, seed: 3 },
        GraphSpec::Community {
            n: DESK_N,
            k_clusters: 2,
            p_in: 0.9,
            p_out: 0.15,
            seed: 3,
        },
    ] {
        let g = spec.build().unwrap();
        for q in [DiagonalMetric::identity(DESK_N), degree_metric(&g).unwrap()] {
            let set = compute_modes(&g, &q, 6, &cfg, &starts).unwrap();
            sets += 1;
            worst_defect = worst_defect.max(set.orthonormality_defect());
            for j in 0..set.count() {
                worst_norm = worst_norm.max((q.norm(&set.mode(j)) - 1.0).abs());
            }
        }
    }
    let path = WeightedDigraph::directed(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
    let set = compute_modes(&path, &DiagonalMetric::identity(4), 2, &cfg, &MultiStart::default()).unwrap();
    let t_u2 = set.values[1];
    Outcome {
        id: 6,
        name: "mode validity",
        pass: worst_defect <= 1e-8 && worst_norm <= 1e-10 && t_u2 <= 1e-6,
        detail: format!(
            "{sets} mode sets (K=6): worst |U^T Q U - I| {worst_defect:.3e} (limit 1e-8), worst | ||Q^1/2 u|| - 1 | {worst_norm:.3e} (limit 1e-10); \
             directed 4-path T(u_2) = {t_u2:.3e} (limit 1e-6)"
        ),
    }
}

/// Criterion 7: PSA returns to a strict local minimizer from nearby starts.
///
/// The strict minimizer is `x* = (0, 1)` for the symmetric single edge in its
/// Laplacian eigenbasis, where `E(x) = sqrt(2) |x_1| / ||x||`. The directed
/// single edge with `V = I` is reported alongside: every unit vector with
/// `x_1 <= x_2` has `E = 0` there, so `(0, 1)` is not strict and PSA stays
/// wherever it starts on that arc.
fn basin_capture() -> Outcome {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let sym = WeightedDigraph::undirected(2, &[(0, 1, 1.0)]).unwrap();
    let v = DenseMatrix::from_rows(&[vec![h, h], vec![-h, h]]).unwrap();
    let strict = FractionalProblem::new(incidence(&sym), DiagonalMetric::identity(2), v).unwrap();
    let directed = WeightedDigraph::directed(2, &[(0, 1, 1.0)]).unwrap();
    let flat = FractionalProblem::new(incidence(&directed), DiagonalMetric::identity(2), DenseMatrix::identity(2)).unwrap();
    let target = [0.0, 1.0];
    let cfg = SolverConfig::psa();
    let mut rng = seeded(77);
    let trials = 200;
    let mut worst = 0.0_f64;
    let mut flat_worst = 0.0_f64;
    for _ in 0..trials {
        // chord length 2 sin(theta / 2) <= 0.05
        let theta = rng.random_range(-1.0..1.0) * 2.0 * (0.025f64).asin();
        let x0 = [theta.sin(), theta.cos()];
        let trace = psa_run(&strict, &x0, &cfg).unwrap();
        worst = worst.max(linalg::dist(&trace.final_point, &target));
        let flat_trace = psa_run(&flat, &x0, &cfg).unwrap();
        flat_worst = flat_worst.max(linalg::dist(&flat_trace.final_point, &target));
    }
    Outcome {
        id: 7,
        name: "PSA basin capture",
        pass: worst <= 1e-6,
        detail: format!(
            "{trials} starts within 0.05 of x* = (0,1) on the symmetric edge in its eigenbasis: worst final distance {worst:.3e} (limit 1e-6); \
             directed edge with V = I (x* not strict): worst final distance {flat_worst:.3e}"
        ),
    }
}

/// Criterion 8 over every desk-scale run.
fn iteration_budget(runs: &[&DetailedRun]) -> Outcome {
    let ok: Vec<_> = runs.iter().filter(|r| r.trace.is_some()).collect();
    let converged = ok
        .iter()
        .filter(|r| r.trace.as_ref().unwrap().status == RunStatus::Converged)
        .count();
    let frac = converged as f64 / ok.len().max(1) as f64;
    let mean = ok.iter().map(|r| r.record.iterations as f64).sum::<f64>() / ok.len().max(1) as f64;
    Outcome {
        id: 8,
        name: "iteration budget",
        pass: !ok.is_empty() && frac >= 0.95 && mean <= 6.0,
        detail: format!(
            "{} runs: {:.2}% stopped on tolerance (limit 95%), mean outer iterations {mean:.2} (limit 6)",
            ok.len(),
            100.0 * frac
        ),
    }
}

fn main() -> ExitCode {
    let (c1, suite) = monotone_suite();

    let started = Instant::now();
    let mut grid = Vec::new();
    for (kind, qs) in [
        ("rgg", vec![QSpec::Identity]),
        ("drgg", vec![QSpec::Identity, QSpec::Degree]),
        ("community", vec![QSpec::Degree]),
    ] {
        let cfg = experiment(graph_specs(kind, 0..5), qs, MultiStart::default());
        grid.extend(run_experiment_detailed(&cfg).expect("grid runs"));
    }
    let grid_time = started.elapsed().as_secs_f64();

    let all: Vec<&DetailedRun> = suite.iter().chain(&grid).collect();
    let outcomes = vec![
        c1,
        criticality(&all),
        prox_oracle(),
        dca_certificate(&all),
        tables(&grid, grid_time),
        mode_validity(),
        basin_capture(),
        iteration_budget(&all),
    ];
    if report(&outcomes) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
