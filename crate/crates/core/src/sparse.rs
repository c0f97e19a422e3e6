//! Compressed sparse row matrices and the handful of kernels the multigrid
//! pipeline needs: matrix-vector and matrix-matrix products, transpose, the
//! Galerkin triple product, and diagonal/row-sum extraction.
//!
//! Two conventions matter throughout the crate:
//!
//! * **Explicit zeros are first-class.** A stored entry participates in every
//!   pattern-based decision (strength masks, filtering, prolongator sparsity)
//!   regardless of its value. Products therefore keep *symbolically* produced
//!   entries even when they evaluate to zero, which makes quantities like
//!   operator complexity a function of the pattern alone.
//! * **Deterministic layout.** Column indices are strictly increasing within
//!   each row and all kernels traverse rows in order, so identical inputs
//!   produce bitwise-identical outputs.

use crate::error::{Error, Result};

pub mod matrix_market;

/// Square or rectangular sparse matrix in CSR layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from raw CSR arrays, validating the structural
    /// invariants: `row_offsets` has `nrows + 1` nondecreasing entries
    /// bracketing `col_indices`/`values`, and column indices are strictly
    /// increasing within each row and in range.
    pub fn from_csr(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != nrows + 1 {
            return Err(Error::InvalidMatrix(format!(
                "row_offsets has {} entries, expected {}",
                row_offsets.len(),
                nrows + 1
            )));
        }
        if row_offsets[0] != 0 {
            return Err(Error::InvalidMatrix("row_offsets must start at 0".into()));
        }
        if col_indices.len() != values.len() {
            return Err(Error::InvalidMatrix(format!(
                "{} column indices but {} values",
                col_indices.len(),
                values.len()
            )));
        }
        if *row_offsets.last().unwrap() != col_indices.len() {
            return Err(Error::InvalidMatrix(format!(
                "last row offset {} does not match nnz {}",
                row_offsets.last().unwrap(),
                col_indices.len()
            )));
        }
        for i in 0..nrows {
            if row_offsets[i] > row_offsets[i + 1] {
                return Err(Error::InvalidMatrix(format!(
                    "row offsets decrease at row {i}"
                )));
            }
            let row = &col_indices[row_offsets[i]..row_offsets[i + 1]];
            for pair in row.windows(2) {
                if pair[0] >= pair[1] {
                    return Err(Error::InvalidMatrix(format!(
                        "columns not strictly increasing in row {i}"
                    )));
                }
            }
            if let Some(&last) = row.last() {
                if last >= ncols {
                    return Err(Error::InvalidMatrix(format!(
                        "column {last} out of range in row {i} (ncols = {ncols})"
                    )));
                }
            }
        }
        Ok(Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds a matrix from (row, col, value) triplets. Duplicate positions
    /// are summed in their original order, so assembly is deterministic.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::InvalidMatrix(format!(
                    "triplet ({r}, {c}) out of range for {nrows} x {ncols}"
                )));
            }
        }
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));

        let mut row_offsets = vec![0usize; nrows + 1];
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        let mut last_slot: Option<(usize, usize)> = None;
        for &k in &order {
            let (r, c, v) = triplets[k];
            if last_slot == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            col_indices.push(c);
            values.push(v);
            row_offsets[r + 1] += 1;
            last_slot = Some((r, c));
        }
        for i in 0..nrows {
            row_offsets[i + 1] += row_offsets[i];
        }
        Ok(Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Converts a dense row-major array, storing every entry (zeros too).
    /// Intended for small test inputs where the full pattern is wanted.
    pub fn from_dense(nrows: usize, ncols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(Error::InvalidMatrix(format!(
                "dense data has {} entries, expected {}",
                data.len(),
                nrows * ncols
            )));
        }
        Ok(Self {
            nrows,
            ncols,
            row_offsets: (0..=nrows).map(|i| i * ncols).collect(),
            col_indices: (0..nrows).flat_map(|_| 0..ncols).collect(),
            values: data.to_vec(),
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// Number of stored entries, explicit zeros included.
    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.row_offsets[i];
        let hi = self.row_offsets[i + 1];
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    /// Stored value at (i, j), or `None` when the position is not in the
    /// pattern. An explicit zero returns `Some(0.0)`.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).ok().map(|k| vals[k])
    }

    /// y = A x.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(Error::DimensionMismatch {
                op: "spmv",
                details: format!("matrix has {} columns, vector has {}", self.ncols, x.len()),
            });
        }
        let mut y = vec![0.0; self.nrows];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                acc += v * x[c];
            }
            y[i] = acc;
        }
        Ok(y)
    }

    /// C = A B with the *symbolic* product pattern: position (i, j) is stored
    /// whenever some k has both (i, k) and (k, j) stored, even if the values
    /// cancel to zero. Gustavson's row-merge with a dense accumulator.
    pub fn spmm(&self, other: &Self) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(Error::DimensionMismatch {
                op: "spmm",
                details: format!(
                    "left is {} x {}, right is {} x {}",
                    self.nrows, self.ncols, other.nrows, other.ncols
                ),
            });
        }
        let n_out_cols = other.ncols;
        let mut accumulator = vec![0.0; n_out_cols];
        // `touched[j] == current row` marks j as present in this row's pattern.
        let mut touched = vec![usize::MAX; n_out_cols];
        let mut pattern: Vec<usize> = Vec::new();

        let mut row_offsets = Vec::with_capacity(self.nrows + 1);
        row_offsets.push(0usize);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();

        for i in 0..self.nrows {
            pattern.clear();
            let (a_cols, a_vals) = self.row(i);
            for (&k, &a_ik) in a_cols.iter().zip(a_vals) {
                let (b_cols, b_vals) = other.row(k);
                for (&j, &b_kj) in b_cols.iter().zip(b_vals) {
                    if touched[j] != i {
                        touched[j] = i;
                        accumulator[j] = 0.0;
                        pattern.push(j);
                    }
                    accumulator[j] += a_ik * b_kj;
                }
            }
            pattern.sort_unstable();
            for &j in &pattern {
                col_indices.push(j);
                values.push(accumulator[j]);
            }
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            nrows: self.nrows,
            ncols: n_out_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Transpose via a counting sort over columns; keeps rows sorted.
    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let row_offsets = counts.clone();
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        let mut next = counts;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                let slot = next[c];
                next[c] += 1;
                col_indices[slot] = i;
                values[slot] = v;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Stored diagonal entries; rows without a stored diagonal report 0.
    pub fn diagonal(&self) -> Vec<f64> {
        let n = self.nrows.min(self.ncols);
        let mut d = vec![0.0; n];
        for (i, entry) in d.iter_mut().enumerate() {
            if let Some(v) = self.get(i, i) {
                *entry = v;
            }
        }
        d
    }

    /// Signed sum of the stored entries in each row.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().sum())
            .collect()
    }

    /// Dense row-major copy; intended for coarse solvers and test oracles on
    /// small matrices.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows * self.ncols];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                out[i * self.ncols + c] = v;
            }
        }
        out
    }
}

/// Coarse-grid (Galerkin) operator `P^T A P`, computed as `P^T (A P)`.
/// The result keeps every symbolically produced entry, so its pattern — and
/// with it quantities like operator complexity — depends only on the patterns
/// of `P` and `A`.
pub fn galerkin(p: &SparseMatrix, a: &SparseMatrix) -> Result<SparseMatrix> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            op: "galerkin",
            details: format!("operator is {} x {}, expected square", a.nrows(), a.ncols()),
        });
    }
    if p.nrows() != a.nrows() {
        return Err(Error::DimensionMismatch {
            op: "galerkin",
            details: format!(
                "prolongator has {} rows, operator is {} x {}",
                p.nrows(),
                a.nrows(),
                a.ncols()
            ),
        });
    }
    let ap = a.spmm(p)?;
    p.transpose().spmm(&ap)
}

/// Incremental row-by-row CSR constructor used by the filtering and
/// prolongator stages, which produce rows in order. `push_row` enforces
/// strictly increasing columns so the finished matrix upholds the CSR
/// invariants by construction.
pub struct CsrBuilder {
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrBuilder {
    pub fn new(ncols: usize) -> Self {
        Self {
            ncols,
            row_offsets: vec![0],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Appends one row given parallel column/value slices (columns strictly
    /// increasing).
    pub fn push_row(&mut self, cols: &[usize], vals: &[f64]) -> Result<()> {
        if cols.len() != vals.len() {
            return Err(Error::InvalidMatrix(format!(
                "row has {} columns but {} values",
                cols.len(),
                vals.len()
            )));
        }
        for pair in cols.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::InvalidMatrix(
                    "builder row columns not strictly increasing".into(),
                ));
            }
        }
        if let Some(&last) = cols.last() {
            if last >= self.ncols {
                return Err(Error::InvalidMatrix(format!(
                    "builder column {last} out of range (ncols = {})",
                    self.ncols
                )));
            }
        }
        self.col_indices.extend_from_slice(cols);
        self.values.extend_from_slice(vals);
        self.row_offsets.push(self.col_indices.len());
        Ok(())
    }

    pub fn finish(self) -> SparseMatrix {
        SparseMatrix {
            nrows: self.row_offsets.len() - 1,
            ncols: self.ncols,
            row_offsets: self.row_offsets,
            col_indices: self.col_indices,
            values: self.values,
        }
    }
}
