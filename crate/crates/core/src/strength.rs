//! Strength of connection: which stored couplings should steer coarsening.
//!
//! The classic criterion keeps an off-diagonal entry (i, j) when
//! `|A_ij| >= theta * sqrt(A_ii * A_jj)`. Two policy decisions are baked in:
//!
//! * When `A_ii * A_jj <= 0` the square root is undefined and the coupling is
//!   classified weak — sign-indefinite diagonals should not steer coarsening.
//! * The result is symmetrized: a coupling counts as strong only when both
//!   (i, j) and (j, i) pass the test (whenever both positions are stored),
//!   since aggregation and sparsification assume a symmetric adjacency.
//!
//! For operators whose entries are poor proximity measures (strong anisotropy
//! from stretched meshes), strength can instead be computed on an auxiliary
//! distance operator built from vertex coordinates ([`distance_laplacian`]):
//! same pattern as `A`, off-diagonals `-1 / dist(x_i, x_j)`, diagonal chosen
//! so each row sums to zero. The resulting mask indexes positions, not
//! values, so it applies to `A` directly.

use std::io::Write;

use crate::error::{Error, Result};
use crate::sparse::{CsrBuilder, SparseMatrix};

/// Per-vertex positions in 1, 2, or 3 dimensions, stored row-major.
#[derive(Debug, Clone)]
pub struct Coordinates {
    dim: usize,
    data: Vec<f64>,
}

impl Coordinates {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || dim > 3 {
            return Err(Error::InvalidConfig(format!(
                "coordinate dimension must be 1, 2, or 3, got {dim}"
            )));
        }
        if data.len() % dim != 0 {
            return Err(Error::InvalidConfig(format!(
                "{} coordinate values do not divide into dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_points_3d(points: &[[f64; 3]]) -> Self {
        Self {
            dim: 3,
            data: points.iter().flatten().copied().collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of vertices.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Euclidean distance between vertices i and j.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Dumps one `x[,y[,z]]` line per vertex, for eyeballing meshes.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        for i in 0..self.len() {
            let fields: Vec<String> = self.point(i).iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

/// Boolean classification aligned entry-for-entry with the nnz of the matrix
/// the mask was computed from (true = strong). Diagonal positions are always
/// marked true; only off-diagonal entries carry strength semantics.
#[derive(Debug, Clone)]
pub struct StrengthMask {
    mask: Vec<bool>,
}

impl StrengthMask {
    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    /// Strength flag for the stored entry at flat position `k` (the same
    /// indexing as the matrix's value array).
    pub fn is_strong(&self, k: usize) -> bool {
        self.mask[k]
    }

    /// Total number of strong off-diagonal entries, given the matrix the mask
    /// belongs to (needed to skip diagonal positions).
    pub fn count_strong_off_diagonal(&self, a: &SparseMatrix) -> usize {
        let mut count = 0;
        for i in 0..a.nrows() {
            let lo = a.row_offsets()[i];
            let (cols, _) = a.row(i);
            for (k, &c) in cols.iter().enumerate() {
                if c != i && self.mask[lo + k] {
                    count += 1;
                }
            }
        }
        count
    }
}

/// Classic strength test `|A_ij| >= theta * sqrt(A_ii * A_jj)`, symmetrized.
///
/// The mask is aligned with `a`'s stored entries. When the transpose position
/// (j, i) is not stored, the entry keeps its own one-sided classification.
pub fn classic_strength(a: &SparseMatrix, theta: f64) -> Result<StrengthMask> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            op: "classic_strength",
            details: format!("matrix is {} x {}, expected square", a.nrows(), a.ncols()),
        });
    }
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidConfig(format!(
            "strength threshold must lie in [0, 1], got {theta}"
        )));
    }
    let diag = a.diagonal();
    // One-sided pass/fail per stored entry.
    let mut pass = vec![false; a.nnz()];
    for i in 0..a.nrows() {
        let lo = a.row_offsets()[i];
        let (cols, vals) = a.row(i);
        for (k, (&j, &v)) in cols.iter().zip(vals).enumerate() {
            if j == i {
                pass[lo + k] = true;
                continue;
            }
            let product = diag[i] * diag[j];
            if product <= 0.0 {
                continue;
            }
            pass[lo + k] = v.abs() >= theta * product.sqrt();
        }
    }
    // Symmetrize: AND with the transpose entry's result where it exists.
    let mut mask = pass.clone();
    for i in 0..a.nrows() {
        let lo = a.row_offsets()[i];
        let (cols, _) = a.row(i);
        for (k, &j) in cols.iter().enumerate() {
            if j == i || !mask[lo + k] {
                continue;
            }
            let (tcols, _) = a.row(j);
            if let Ok(t) = tcols.binary_search(&i) {
                if !pass[a.row_offsets()[j] + t] {
                    mask[lo + k] = false;
                }
            }
        }
    }
    Ok(StrengthMask { mask })
}

/// Distance-based auxiliary operator on `a`'s exact pattern: off-diagonals
/// are `-1 / dist(x_i, x_j)`, the diagonal makes each row sum to zero.
///
/// Fails if two connected vertices coincide, or if a row with off-diagonal
/// entries has no stored diagonal slot to carry the balancing term.
pub fn distance_laplacian(a: &SparseMatrix, coords: &Coordinates) -> Result<SparseMatrix> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            op: "distance_laplacian",
            details: format!("matrix is {} x {}, expected square", a.nrows(), a.ncols()),
        });
    }
    if coords.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            op: "distance_laplacian",
            details: format!(
                "{} vertices but {} coordinate rows",
                a.nrows(),
                coords.len()
            ),
        });
    }
    let mut builder = CsrBuilder::new(a.ncols());
    let mut row_vals: Vec<f64> = Vec::new();
    for i in 0..a.nrows() {
        let (cols, _) = a.row(i);
        row_vals.clear();
        row_vals.resize(cols.len(), 0.0);
        let mut diag_slot = None;
        let mut inv_dist_sum = 0.0;
        for (k, &j) in cols.iter().enumerate() {
            if j == i {
                diag_slot = Some(k);
                continue;
            }
            let dist = coords.distance(i, j);
            if dist == 0.0 {
                return Err(Error::CoincidentCoordinates { i, j });
            }
            let w = 1.0 / dist;
            row_vals[k] = -w;
            inv_dist_sum += w;
        }
        match diag_slot {
            Some(k) => row_vals[k] = inv_dist_sum,
            None if cols.is_empty() => {}
            None => return Err(Error::MissingDiagonal(i)),
        }
        builder.push_row(cols, &row_vals)?;
    }
    Ok(builder.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::XorShift64Star;

    fn symmetric_random(rng: &mut XorShift64Star, n: usize, fill: f64) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 1.0 + rng.next_f64() * 3.0));
            for j in (i + 1)..n {
                if rng.next_f64() < fill {
                    let v = rng.next_centered() * 2.0;
                    t.push((i, j, v));
                    t.push((j, i, v));
                }
            }
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    fn strong_offdiag_set(a: &SparseMatrix, mask: &StrengthMask) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..a.nrows() {
            let lo = a.row_offsets()[i];
            let (cols, _) = a.row(i);
            for (k, &j) in cols.iter().enumerate() {
                if j != i && mask.is_strong(lo + k) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    #[test]
    fn theta_zero_marks_everything_strong() {
        let mut rng = XorShift64Star::new(2);
        let a = symmetric_random(&mut rng, 10, 0.4);
        let mask = classic_strength(&a, 0.0).unwrap();
        let strong = strong_offdiag_set(&a, &mask).len();
        let offdiag = a.nnz() - 10;
        assert_eq!(strong, offdiag);
    }

    #[test]
    fn threshold_splits_known_example() {
        // Row couplings 0.5 and 0.05 against unit diagonals: theta = 0.1
        // keeps the first and drops the second.
        let t = vec![
            (0, 0, 1.0),
            (1, 1, 1.0),
            (2, 2, 1.0),
            (0, 1, 0.5),
            (1, 0, 0.5),
            (0, 2, 0.05),
            (2, 0, 0.05),
        ];
        let a = SparseMatrix::from_triplets(3, 3, &t).unwrap();
        let mask = classic_strength(&a, 0.1).unwrap();
        let strong = strong_offdiag_set(&a, &mask);
        assert_eq!(strong, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn nonpositive_diagonal_product_is_weak() {
        let t = vec![
            (0, 0, 1.0),
            (1, 1, -1.0),
            (0, 1, 100.0),
            (1, 0, 100.0),
            (2, 2, 0.0),
            (0, 2, 100.0),
            (2, 0, 100.0),
        ];
        let a = SparseMatrix::from_triplets(3, 3, &t).unwrap();
        let mask = classic_strength(&a, 0.0).unwrap();
        assert!(strong_offdiag_set(&a, &mask).is_empty());
    }

    #[test]
    fn symmetrization_requires_both_directions() {
        // |A_01| passes against its diagonals, |A_10| fails against the same
        // diagonals because the value is smaller; both must end up weak.
        let t = vec![
            (0, 0, 1.0),
            (1, 1, 1.0),
            (0, 1, 0.9),
            (1, 0, 0.01),
        ];
        let a = SparseMatrix::from_triplets(2, 2, &t).unwrap();
        let mask = classic_strength(&a, 0.5).unwrap();
        assert!(strong_offdiag_set(&a, &mask).is_empty());
    }

    #[test]
    fn strong_set_shrinks_monotonically_in_theta() {
        let mut rng = XorShift64Star::new(77);
        for _ in 0..20 {
            let a = symmetric_random(&mut rng, 14, 0.35);
            let loose = strong_offdiag_set(&a, &classic_strength(&a, 0.1).unwrap());
            let tight = strong_offdiag_set(&a, &classic_strength(&a, 0.6).unwrap());
            for edge in &tight {
                assert!(loose.contains(edge), "strong set not nested");
            }
        }
    }

    #[test]
    fn mask_aligns_with_nnz() {
        let mut rng = XorShift64Star::new(4);
        let a = symmetric_random(&mut rng, 9, 0.3);
        let mask = classic_strength(&a, 0.2).unwrap();
        assert_eq!(mask.len(), a.nnz());
    }

    #[test]
    fn rejects_out_of_range_theta() {
        let a = SparseMatrix::identity(3);
        assert!(classic_strength(&a, -0.1).is_err());
        assert!(classic_strength(&a, 1.5).is_err());
    }

    #[test]
    fn distance_laplacian_1d_chain() {
        // Three nodes at 0, 1, 3: distances 1 and 2.
        let mut t = Vec::new();
        for i in 0..3usize {
            t.push((i, i, 1.0));
        }
        for (i, j) in [(0, 1), (1, 0), (1, 2), (2, 1)] {
            t.push((i, j, -1.0));
        }
        let a = SparseMatrix::from_triplets(3, 3, &t).unwrap();
        let coords = Coordinates::new(1, vec![0.0, 1.0, 3.0]).unwrap();
        let l = distance_laplacian(&a, &coords).unwrap();
        assert_eq!(l.get(0, 1), Some(-1.0));
        assert_eq!(l.get(1, 2), Some(-0.5));
        assert_eq!(l.get(1, 1), Some(1.5));
        assert_eq!(l.nnz(), a.nnz(), "pattern preserved");
    }

    #[test]
    fn distance_laplacian_rows_sum_to_zero() {
        let mut rng = XorShift64Star::new(13);
        let a = symmetric_random(&mut rng, 12, 0.4);
        let pts: Vec<f64> = (0..12 * 3).map(|_| rng.next_f64() * 5.0).collect();
        let coords = Coordinates::new(3, pts).unwrap();
        let l = distance_laplacian(&a, &coords).unwrap();
        for (i, s) in l.row_sums().iter().enumerate() {
            let scale = l.get(i, i).unwrap_or(1.0).abs().max(1.0);
            assert!(s.abs() <= 1e-12 * scale, "row {i} sums to {s}");
        }
    }

    #[test]
    fn distance_laplacian_rejects_coincident_vertices() {
        let t = vec![(0, 0, 1.0), (1, 1, 1.0), (0, 1, -1.0), (1, 0, -1.0)];
        let a = SparseMatrix::from_triplets(2, 2, &t).unwrap();
        let coords = Coordinates::new(2, vec![1.0, 2.0, 1.0, 2.0]).unwrap();
        assert!(matches!(
            distance_laplacian(&a, &coords),
            Err(Error::CoincidentCoordinates { .. })
        ));
    }

    #[test]
    fn strength_on_distance_operator_tracks_proximity_not_values() {
        // Entry values say the far coupling is stronger; geometry disagrees.
        let t = vec![
            (0, 0, 2.0),
            (1, 1, 2.0),
            (2, 2, 2.0),
            (0, 1, -0.001), // near neighbor, tiny entry
            (1, 0, -0.001),
            (0, 2, -10.0), // far neighbor, huge entry
            (2, 0, -10.0),
        ];
        let a = SparseMatrix::from_triplets(3, 3, &t).unwrap();
        let coords = Coordinates::new(1, vec![0.0, 0.1, 50.0]).unwrap();
        let l = distance_laplacian(&a, &coords).unwrap();
        let mask = classic_strength(&l, 0.3).unwrap();
        let strong = strong_offdiag_set(&l, &mask);
        assert!(strong.contains(&(0, 1)));
        assert!(!strong.contains(&(0, 2)));
    }
}
