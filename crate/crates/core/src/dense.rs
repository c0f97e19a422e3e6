//! Dense LU factorization with partial pivoting for the coarsest level of
//! the hierarchy.
//!
//! Coarse operators are capped at around a thousand unknowns, where a plain
//! right-looking factorization is more than fast enough and avoids pulling a
//! linear-algebra dependency into the library. The factorization is done once
//! at setup; every V-cycle then costs two triangular solves.

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// LU factors of a square matrix, stored packed in one row-major array with
/// the pivoting row permutation alongside.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    /// L (unit lower, diagonal implicit) and U share this buffer.
    lu: Vec<f64>,
    /// perm[k] = original row index moved to elimination position k.
    perm: Vec<usize>,
}

impl DenseLu {
    /// Factors a dense row-major matrix. Fails on a zero pivot column, which
    /// for the symmetric positive definite coarse operators this crate
    /// produces means the input was singular.
    pub fn factor(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                op: "dense_lu",
                details: format!("buffer holds {} entries, expected {}", data.len(), n * n),
            });
        }
        let mut lu = data;
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            // Partial pivoting: largest magnitude in column k at or below the
            // diagonal.
            let mut pivot_row = k;
            let mut pivot_mag = lu[k * n + k].abs();
            for r in (k + 1)..n {
                let mag = lu[r * n + k].abs();
                if mag > pivot_mag {
                    pivot_mag = mag;
                    pivot_row = r;
                }
            }
            if pivot_mag == 0.0 {
                return Err(Error::SingularCoarseOperator(k));
            }
            if pivot_row != k {
                for c in 0..n {
                    lu.swap(k * n + c, pivot_row * n + c);
                }
                perm.swap(k, pivot_row);
            }
            let pivot = lu[k * n + k];
            for r in (k + 1)..n {
                let factor = lu[r * n + k] / pivot;
                lu[r * n + k] = factor;
                for c in (k + 1)..n {
                    lu[r * n + c] -= factor * lu[k * n + c];
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    /// Factors the dense image of a sparse matrix.
    pub fn factor_sparse(a: &SparseMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch {
                op: "dense_lu",
                details: format!("matrix is {} x {}, expected square", a.nrows(), a.ncols()),
            });
        }
        Self::factor(a.nrows(), a.to_dense())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` using the stored factors.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                op: "dense_lu_solve",
                details: format!("rhs has {} entries, expected {}", b.len(), n),
            });
        }
        // Apply the row permutation, then forward- and back-substitute.
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 1..n {
            let mut acc = x[r];
            for c in 0..r {
                acc -= self.lu[r * n + c] * x[c];
            }
            x[r] = acc;
        }
        for r in (0..n).rev() {
            let mut acc = x[r];
            for c in (r + 1)..n {
                acc -= self.lu[r * n + c] * x[c];
            }
            x[r] = acc / self.lu[r * n + r];
        }
        Ok(x)
    }
}
