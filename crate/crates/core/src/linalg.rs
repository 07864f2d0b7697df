//! Sparse storage and direct factorizations used by the benchmark problems.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by_key(|a| (a.0, a.1));

        let mut indptr = vec![0; nrows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    /// Symmetric tridiagonal-type constructor: constant `(sub, diag, sup)` bands.
    pub fn tridiagonal(n: usize, sub: f64, diag: f64, sup: f64) -> Self {
        let mut triplets = Vec::with_capacity(3 * n);
        for i in 0..n {
            if i > 0 {
                triplets.push((i, i - 1, sub));
            }
            triplets.push((i, i, diag));
            if i + 1 < n {
                triplets.push((i, i + 1, sup));
            }
        }
        Self::from_triplets(n, n, &triplets)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates over the stored `(col, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[i]..self.indptr[i + 1];
        self.indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        assert_eq!(v.len(), self.ncols);
        DVector::from_fn(self.nrows, |i, _| self.row(i).map(|(j, a)| a * v[j]).sum())
    }

    pub fn mul_transpose_vec(&self, w: &DVector<f64>) -> DVector<f64> {
        assert_eq!(w.len(), self.nrows);
        let mut out = DVector::zeros(self.ncols);
        for i in 0..self.nrows {
            for (j, a) in self.row(i) {
                out[j] += a * w[i];
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, a) in self.row(i) {
                out[(i, j)] += a;
            }
        }
        out
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).map(|(_, a)| a.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest `|i - j|` over stored entries with `j < i`.
    pub fn lower_bandwidth(&self) -> usize {
        (0..self.nrows)
            .flat_map(|i| self.row(i).map(move |(j, _)| i.saturating_sub(j)))
            .max()
            .unwrap_or(0)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.nrows == self.ncols
            && (0..self.nrows).all(|i| self.row(i).all(|(j, a)| (a - self.get(j, i)).abs() <= tol))
    }
}

/// Banded Cholesky factorization `A = L Lᵀ` of a symmetric positive definite
/// matrix. No reordering is applied, so `L` is the plain lower Cholesky factor.
#[derive(Clone, Debug)]
pub struct BandCholesky {
    n: usize,
    bandwidth: usize,
    // Row-major lower band; entry (i, j) with 0 <= i - j <= bandwidth.
    band: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        check_dim("band cholesky (square)", a.nrows(), a.ncols())?;
        let n = a.nrows();
        let bw = a.lower_bandwidth();
        let mut chol = Self {
            n,
            bandwidth: bw,
            band: vec![0.0; n * (bw + 1)],
        };
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    let idx = chol.index(i, j);
                    chol.band[idx] = v;
                }
            }
        }
        for i in 0..n {
            let first = i.saturating_sub(bw);
            for j in first..=i {
                let k0 = first.max(j.saturating_sub(bw));
                let mut sum = chol.band[chol.index(i, j)];
                for k in k0..j {
                    sum -= chol.band[chol.index(i, k)] * chol.band[chol.index(j, k)];
                }
                let idx = chol.index(i, j);
                if i == j {
                    if !(sum > 0.0) {
                        return Err(Error::Factorization(format!(
                            "matrix is not positive definite (pivot {sum:e} at row {i})"
                        )));
                    }
                    chol.band[idx] = sum.sqrt();
                } else {
                    chol.band[idx] = sum / chol.band[chol.index(j, j)];
                }
            }
        }
        Ok(chol)
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        i * (self.bandwidth + 1) + (self.bandwidth - (i - j))
    }

    #[inline]
    fn l(&self, i: usize, j: usize) -> f64 {
        self.band[self.index(i, j)]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let x = self.solve_lower(b);
        self.solve_lower_transpose(&x)
    }

    /// Solves `L x = b`.
    pub fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = b.clone();
        for i in 0..self.n {
            let mut sum = x[i];
            for k in i.saturating_sub(self.bandwidth)..i {
                sum -= self.l(i, k) * x[k];
            }
            x[i] = sum / self.l(i, i);
        }
        x
    }

    /// Solves `Lᵀ x = b`.
    pub fn solve_lower_transpose(&self, b: &DVector<f64>) -> DVector<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = b.clone();
        for i in (0..self.n).rev() {
            let mut sum = x[i];
            for k in i + 1..(i + self.bandwidth + 1).min(self.n) {
                sum -= self.l(k, i) * x[k];
            }
            x[i] = sum / self.l(i, i);
        }
        x
    }

    /// `L v`.
    pub fn lower_mul(&self, v: &DVector<f64>) -> DVector<f64> {
        assert_eq!(v.len(), self.n);
        DVector::from_fn(self.n, |i, _| {
            (i.saturating_sub(self.bandwidth)..=i)
                .map(|k| self.l(i, k) * v[k])
                .sum()
        })
    }

    /// `Lᵀ v`.
    pub fn lower_transpose_mul(&self, v: &DVector<f64>) -> DVector<f64> {
        assert_eq!(v.len(), self.n);
        DVector::from_fn(self.n, |i, _| {
            (i..(i + self.bandwidth + 1).min(self.n))
                .map(|k| self.l(k, i) * v[k])
                .sum()
        })
    }

    pub fn lower_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| {
            if j <= i && i - j <= self.bandwidth {
                self.l(i, j)
            } else {
                0.0
            }
        })
    }
}
