//! The numerator `T(Vx)`, its reversal `T_1`, the denominator
//! `B(x) = ||Q^{1/2} V x||` and the ratio `E = T / B`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DiagonalMetric, EdgeIncidence};
use crate::linalg::{self, DenseMatrix};

/// Graph directed variation `sum_k w_k max(0, (Cy)_k)`; with `reversed` the
/// edge differences are negated, giving `T_1(y) = T(-y)`.
pub fn dv_eval(inc: &EdgeIncidence, y: &[f64], reversed: bool) -> Result<f64> {
    if y.len() != inc.n() {
        return Err(Error::DimensionMismatch {
            expected: inc.n(),
            got: y.len(),
        });
    }
    Ok(dv_unchecked(inc, y, reversed))
}

pub(crate) fn dv_unchecked(inc: &EdgeIncidence, y: &[f64], reversed: bool) -> f64 {
    let sign = if reversed { -1.0 } else { 1.0 };
    inc.links()
        .iter()
        .zip(inc.weights())
        .map(|(&(i, j), &w)| w * (sign * (y[i] - y[j])).max(0.0))
        .sum()
}

/// Numerator, denominator and ratio at one point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioValue {
    pub t: f64,
    pub b: f64,
    pub e: f64,
}

/// Per-column variations of the basis `V` and their lowest-index argmins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    /// `T(v_s)`.
    pub forward: Vec<f64>,
    /// `T_1(v_s)`.
    pub reversed: Vec<f64>,
    pub forward_argmin: usize,
    pub reversed_argmin: usize,
}

impl ColumnStats {
    fn compute(inc: &EdgeIncidence, v: &DenseMatrix) -> Self {
        let cols = v.columns();
        let forward: Vec<f64> = cols.iter().map(|c| dv_unchecked(inc, c, false)).collect();
        let reversed: Vec<f64> = cols.iter().map(|c| dv_unchecked(inc, c, true)).collect();
        Self {
            forward_argmin: argmin(&forward),
            reversed_argmin: argmin(&reversed),
            forward,
            reversed,
        }
    }
}

/// First index of the smallest entry.
fn argmin(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, &x)| if x < best.1 { (i, x) } else { best })
        .0
}

/// `min_x T(Vx) / ||Q^{1/2} V x||` over `x in R^m \ {0}`, with cached products.
#[derive(Clone, Debug)]
pub struct FractionalProblem {
    incidence: EdgeIncidence,
    metric: DiagonalMetric,
    basis: DenseMatrix,
    cv: DenseMatrix,
    norm_cv: f64,
    gram: DenseMatrix,
    stats: ColumnStats,
}

impl FractionalProblem {
    pub fn new(incidence: EdgeIncidence, metric: DiagonalMetric, basis: DenseMatrix) -> Result<Self> {
        let n = incidence.n();
        if metric.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: metric.n(),
            });
        }
        if basis.rows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: basis.rows(),
            });
        }
        if basis.cols() == 0 {
            return Err(Error::InvalidParameter("basis has no columns".into()));
        }
        let vtv = basis.transpose().matmul(&basis)?;
        let defect = vtv.sub(&DenseMatrix::identity(basis.cols()))?.max_abs();
        if defect > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "basis columns are not orthonormal (defect {defect:e})"
            )));
        }
        let cv = incidence.to_dense().matmul(&basis)?;
        // Exact eigenvalues of the small m x m Gram matrix: power iteration
        // from a fixed start can land on a lower singular value, and an
        // underestimate would make the prox step size unsafe.
        let norm_cv = linalg::symmetric_eigh(&cv.transpose().matmul(&cv)?)?
            .values
            .last()
            .map_or(0.0, |l| l.max(0.0).sqrt());
        let gram = basis.transpose().matmul(&basis.scale_rows(metric.diag()))?;
        let stats = ColumnStats::compute(&incidence, &basis);
        Ok(Self {
            incidence,
            metric,
            basis,
            cv,
            norm_cv,
            gram,
            stats,
        })
    }

    /// Number of free coordinates `m`.
    pub fn dim(&self) -> usize {
        self.basis.cols()
    }

    /// Number of graph vertices `n`.
    pub fn n(&self) -> usize {
        self.basis.rows()
    }

    pub fn incidence(&self) -> &EdgeIncidence {
        &self.incidence
    }

    pub fn metric(&self) -> &DiagonalMetric {
        &self.metric
    }

    pub fn basis(&self) -> &DenseMatrix {
        &self.basis
    }

    /// `C V`, `|E| x m`.
    pub fn cv(&self) -> &DenseMatrix {
        &self.cv
    }

    /// `||C V||_2`.
    pub fn norm_cv(&self) -> f64 {
        self.norm_cv
    }

    /// `V^T Q V`.
    pub fn gram(&self) -> &DenseMatrix {
        &self.gram
    }

    pub fn column_stats(&self) -> &ColumnStats {
        &self.stats
    }

    /// `V x`.
    pub fn lift(&self, x: &[f64]) -> Vec<f64> {
        self.basis.matvec(x)
    }

    /// `V^T y`.
    pub fn restrict(&self, y: &[f64]) -> Vec<f64> {
        self.basis.tr_matvec(y)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `T(Vx)`.
    pub fn numerator(&self, x: &[f64]) -> f64 {
        dv_unchecked(&self.incidence, &self.lift(x), false)
    }

    /// `T_1(Vx)`.
    pub fn reversed_numerator(&self, x: &[f64]) -> f64 {
        dv_unchecked(&self.incidence, &self.lift(x), true)
    }

    /// `B(x) = sqrt(x^T M x)`.
    pub fn denominator(&self, x: &[f64]) -> f64 {
        linalg::dot(x, &self.gram.matvec(x)).max(0.0).sqrt()
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<RatioValue> {
        self.check_dim(x)?;
        if x.iter().all(|&v| v == 0.0) {
            return Err(Error::OutsideDomain("ratio undefined at the origin"));
        }
        let t = self.numerator(x);
        let b = self.denominator(x);
        if b <= 0.0 {
            return Err(Error::OutsideDomain("denominator vanishes"));
        }
        Ok(RatioValue { t, b, e: t / b })
    }

    /// Gradient `M x / B(x)` of the denominator at a nonzero point.
    pub fn b_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let b = self.denominator(x);
        if b <= 0.0 {
            return Err(Error::OutsideDomain("denominator is not differentiable at the origin"));
        }
        Ok(linalg::scaled(&self.gram.matvec(x), 1.0 / b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{incidence, WeightedDigraph};

    fn single_edge(basis: DenseMatrix, q: DiagonalMetric) -> FractionalProblem {
        let g = WeightedDigraph::directed(2, &[(0, 1, 1.0)]).unwrap();
        FractionalProblem::new(incidence(&g), q, basis).unwrap()
    }

    #[test]
    fn dv_small_cases() {
        let g = WeightedDigraph::directed(2, &[(0, 1, 2.0)]).unwrap();
        let inc = incidence(&g);
        assert_eq!(dv_eval(&inc, &[3.0, 1.0], false).unwrap(), 4.0);
        assert_eq!(dv_eval(&inc, &[3.0, 1.0], true).unwrap(), 0.0);
        assert!(dv_eval(&inc, &[1.0], false).is_err());

        let g = WeightedDigraph::undirected(3, &[(0, 1, 1.0), (1, 2, 2.0)]).unwrap();
        assert_eq!(dv_eval(&incidence(&g), &[0.7; 3], false).unwrap(), 0.0);
    }

    #[test]
    fn evaluate_single_edge() {
        let p = single_edge(DenseMatrix::identity(2), DiagonalMetric::identity(2));
        let r = p.evaluate(&[1.0, 0.0]).unwrap();
        assert_eq!((r.t, r.b, r.e), (1.0, 1.0, 1.0));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let r = p.evaluate(&[h, -h]).unwrap();
        assert!((r.t - 2f64.sqrt()).abs() < 1e-15);
        assert!((r.b - 1.0).abs() < 1e-15);
        assert!((r.e - 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(p.evaluate(&[0.0, 0.0]), Err(Error::OutsideDomain(_))));
        assert!(p.evaluate(&[1.0]).is_err());
    }

    #[test]
    fn b_gradient_cases() {
        let p = single_edge(DenseMatrix::identity(2), DiagonalMetric::identity(2));
        let x = [0.6, 0.8];
        assert_eq!(p.b_gradient(&x).unwrap(), vec![0.6, 0.8]);
        assert!(p.b_gradient(&[0.0, 0.0]).is_err());

        let p = single_edge(DenseMatrix::identity(2), DiagonalMetric::new(vec![4.0, 1.0]).unwrap());
        assert_eq!(p.denominator(&[1.0, 0.0]), 2.0);
        assert_eq!(p.b_gradient(&[1.0, 0.0]).unwrap(), vec![2.0, 0.0]);
    }

    #[test]
    fn column_stats_single_edge() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v = DenseMatrix::from_rows(&[vec![h], vec![-h]]).unwrap();
        let p = single_edge(v, DiagonalMetric::identity(2));
        let s = p.column_stats();
        assert!((s.forward[0] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.reversed[0], 0.0);
        assert_eq!((s.forward_argmin, s.reversed_argmin), (0, 0));
    }

    #[test]
    fn column_in_kernel_is_argmin() {
        let g = WeightedDigraph::undirected(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let s = 1.0 / 3f64.sqrt();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        // second column is constant, so it lies in the kernel of C
        let v = DenseMatrix::from_rows(&[vec![h, s], vec![0.0, s], vec![-h, s]]).unwrap();
        let p = FractionalProblem::new(incidence(&g), DiagonalMetric::identity(3), v).unwrap();
        let st = p.column_stats();
        assert_eq!((st.forward[1], st.reversed[1]), (0.0, 0.0));
        assert_eq!((st.forward_argmin, st.reversed_argmin), (1, 1));
        // symmetric graph: forward and reversed agree
        assert_eq!(st.forward[0], st.reversed[0]);
    }

    #[test]
    fn rejects_non_orthonormal_basis() {
        let g = WeightedDigraph::directed(2, &[(0, 1, 1.0)]).unwrap();
        let v = DenseMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        assert!(FractionalProblem::new(incidence(&g), DiagonalMetric::identity(2), v).is_err());
    }
}
