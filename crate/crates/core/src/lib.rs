//! Solvers for single-ratio fractional programs `min T(x) / B(x)` where `T` is
//! a positively homogeneous convex function and `B` an absolutely homogeneous
//! norm, applied to generalized graph Fourier modes.
//!
//! The numerator is always the graph directed variation
//! `T(y) = sum_ij w_ij * max(0, y_i - y_j)` restricted to a subspace with an
//! orthonormal basis `V`, and the denominator is `B(x) = ||Q^{1/2} V x||` for a
//! diagonal positive-definite `Q`. Two outer algorithms are provided:
//!
//! * PSA, the proximal-subgradient iteration followed by normalization to the
//!   unit sphere, and
//! * PS-DCA, which additionally runs one DC step from the origin at every
//!   iteration and accepts its output when it certifiably lowers the ratio.
//!
//! Modules, bottom-up:
//!
//! | module | contents |
//! |--------|----------|
//! | [`graph`] | weighted digraphs, random generators, incidence, degree metric |
//! | [`linalg`] | dense matrices, null bases, spectral norm, Jacobi eigensolver |
//! | [`functionals`] | `T`, `T_1`, `B`, the ratio `E` and the cached problem |
//! | [`prox`] | proximal operator of `T(V .)` through its dual box QP |
//! | [`solver`] | PSA / PS-DCA, the `w` selection rule, criticality residual |
//! | [`gfm`] | constraint bases, initial points, sequential mode computation |
//! | [`harness`] | experiment grid, run records and summaries |

pub mod error;
pub mod functionals;
pub mod gfm;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod prox;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
pub use functionals::{dv_eval, FractionalProblem, RatioValue};
pub use gfm::{compute_modes, ModeSet};
pub use graph::{DiagonalMetric, EdgeIncidence, WeightedDigraph};
pub use linalg::DenseMatrix;
pub use prox::{prox_dv, InnerConfig, ProxResult};
pub use solver::{ps_dca_run, SolverConfig, SolverTrace};
