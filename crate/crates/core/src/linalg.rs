//! Small dense linear algebra.
//!
//! Everything here works on row-major [`DenseMatrix`] values of at most a few
//! hundred rows: Householder QR with column pivoting for orthonormal null
//! and range bases, power iteration for the spectral norm, and cyclic Jacobi
//! rotations for symmetric eigendecompositions.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense real matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                expected: cols,
                got: bad.len(),
            });
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// Builds an `n x columns.len()` matrix whose columns are the given vectors.
    pub fn from_columns(n: usize, columns: &[Vec<f64>]) -> Result<Self> {
        if let Some(bad) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        Ok(Self::from_fn(n, columns.len(), |i, j| columns[j][i]))
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    /// Column-major copy of the entries.
    pub fn to_column_major(&self) -> Vec<f64> {
        (0..self.cols).flat_map(|j| self.column(j)).collect()
    }

    /// Columns `range` as a new matrix.
    pub fn select_columns(&self, range: std::ops::Range<usize>) -> Self {
        let start = range.start;
        Self::from_fn(self.rows, range.len(), |i, j| self[(i, start + j)])
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `A^T y`.
    pub fn tr_matvec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "tr_matvec dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += yi * a;
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Entrywise `self - other`.
    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                got: other.rows * other.cols,
            });
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Scales row `i` by `s[i]`.
    pub fn scale_rows(&self, s: &[f64]) -> DenseMatrix {
        assert_eq!(s.len(), self.rows);
        Self::from_fn(self.rows, self.cols, |i, j| s[i] * self[(i, j)])
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|v| v * s).collect()
}

/// Returns `a / ||a||`, or `None` for the zero vector.
pub fn normalized(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    (n > 0.0 && n.is_finite()).then(|| scaled(a, 1.0 / n))
}

/// Default relative rank cutoff for an `r x n` matrix.
pub fn default_rank_tol(r: usize, n: usize) -> f64 {
    1e-10 * r.max(n).max(1) as f64
}

/// Orthonormal bases of the row space and of the kernel of `m`.
#[derive(Clone, Debug)]
pub struct RowSpaceSplit {
    /// `n x rank`, spans the row space of `m`.
    pub range: DenseMatrix,
    /// `n x (n - rank)`, spans the kernel of `m`.
    pub null: DenseMatrix,
}

/// Splits `R^n` into the row space and kernel of the `r x n` matrix `m`.
///
/// Householder QR with column pivoting is applied to `m^T`; a pivot whose
/// remaining column norm is at most `tol` times the largest column norm ends
/// the factorization and fixes the numerical rank.
pub fn row_space_split(m: &DenseMatrix, tol: f64) -> RowSpaceSplit {
    let n = m.cols();
    let r = m.rows();
    // a = m^T, n x r, stored column by column for convenient pivoting
    let mut cols: Vec<Vec<f64>> = (0..r).map(|i| m.row(i).to_vec()).collect();
    let mut reflectors: Vec<Vec<f64>> = Vec::new();
    let steps = r.min(n);
    let mut scale_ref = 0.0_f64;
    for j in 0..steps {
        let (pivot, pivot_norm) = (j..r)
            .map(|c| (c, norm(&cols[c][j..])))
            .fold((j, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if j == 0 {
            scale_ref = pivot_norm;
        }
        if pivot_norm <= tol * scale_ref || pivot_norm == 0.0 {
            break;
        }
        cols.swap(j, pivot);
        // reflector h = x + sign(x0)||x|| e0, normalized
        let x = &cols[j][j..];
        let alpha = if x[0] >= 0.0 { -pivot_norm } else { pivot_norm };
        let mut h = x.to_vec();
        h[0] -= alpha;
        let hn = norm(&h);
        if hn == 0.0 {
            reflectors.push(vec![0.0; n - j]);
            continue;
        }
        h.iter_mut().for_each(|v| *v /= hn);
        for col in cols.iter_mut().skip(j) {
            let seg = &mut col[j..];
            let s = 2.0 * dot(&h, seg);
            seg.iter_mut().zip(&h).for_each(|(v, hv)| *v -= s * hv);
        }
        reflectors.push(h);
    }
    let rank = reflectors.len();
    // Q = H_0 H_1 ... H_{rank-1}; column c of Q is Q e_c
    let q_columns: Vec<Vec<f64>> = (0..n)
        .map(|c| {
            let mut v = vec![0.0; n];
            v[c] = 1.0;
            for (j, h) in reflectors.iter().enumerate().rev() {
                let seg = &mut v[j..];
                let s = 2.0 * dot(h, seg);
                seg.iter_mut().zip(h).for_each(|(x, hv)| *x -= s * hv);
            }
            v
        })
        .collect();
    RowSpaceSplit {
        range: DenseMatrix::from_fn(n, rank, |i, j| q_columns[j][i]),
        null: DenseMatrix::from_fn(n, n - rank, |i, j| q_columns[rank + j][i]),
    }
}

/// Orthonormal basis (as columns) of the kernel of `m`, `n x (n - rank)`.
pub fn orthonormal_null_basis(m: &DenseMatrix, tol: f64) -> DenseMatrix {
    row_space_split(m, tol).null
}

/// Result of a power iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralNorm {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Largest singular value of `a` by power iteration on `a^T a`, started from
/// the normalized all-ones vector.
///
/// If the all-ones start lies in the kernel, a fixed irregular start is used
/// instead. Like any fixed start it can miss the top singular vector on
/// special inputs; callers that need a guaranteed bound should use
/// [`symmetric_eigh`] on `a^T a`.
pub fn spectral_norm(a: &DenseMatrix, tol: f64, max_iter: usize) -> SpectralNorm {
    let c = a.cols();
    if c == 0 || a.rows() == 0 || a.max_abs() == 0.0 {
        return SpectralNorm {
            value: 0.0,
            converged: true,
            iterations: 0,
        };
    }
    let starts = [
        vec![1.0; c],
        // golden-ratio sequence: no arithmetic structure shared with graph matrices
        (0..c).map(|i| ((i as f64 + 1.0) * 0.618_033_988_749_894_9).fract() + 0.5).collect::<Vec<_>>(),
    ];
    let mut best = SpectralNorm {
        value: 0.0,
        converged: false,
        iterations: 0,
    };
    for start in starts {
        let mut v = normalized(&start).expect("nonzero start");
        let mut sigma_sq = 0.0_f64;
        for it in 1..=max_iter.max(1) {
            let w = a.tr_matvec(&a.matvec(&v));
            let rayleigh = dot(&v, &w);
            let Some(next) = normalized(&w) else {
                break;
            };
            v = next;
            let done = (rayleigh - sigma_sq).abs() <= tol * rayleigh;
            sigma_sq = rayleigh;
            best = SpectralNorm {
                value: norm(&a.matvec(&v)),
                converged: done,
                iterations: it,
            };
            if done {
                return best;
            }
        }
        if sigma_sq > 0.0 {
            return best;
        }
    }
    best
}

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Column `j` is the unit eigenvector for `values[j]`.
    pub vectors: DenseMatrix,
}

/// Cyclic Jacobi eigensolver.
pub fn symmetric_eigh(s: &DenseMatrix) -> Result<SymmetricEigen> {
    let n = s.rows();
    if s.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: s.cols(),
        });
    }
    let asym = s.sub(&s.transpose())?.max_abs();
    if asym > 1e-12 * s.max_abs().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let mut a = DenseMatrix::from_fn(n, n, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
    let mut v = DenseMatrix::identity(n);
    let scale = a.frobenius_norm();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    Ok(SymmetricEigen {
        values: order.iter().map(|&i| a[(i, i)]).collect(),
        vectors: DenseMatrix::from_fn(n, n, |i, j| v[(i, order[j])]),
    })
}
