//! Filtering of weak couplings before prolongator smoothing, the diagonal
//! approximations used inside the smoother, and post-aggregation
//! sparsification.
//!
//! Dropping a weak entry outright would change the action of the operator on
//! constants, so every filter here *lumps*: whatever leaves a row is folded
//! back so the row sum is preserved. Two lumping rules are provided:
//!
//! * [`filter_standard`] folds each dropped entry into the diagonal. Simple,
//!   but dropped *positive* couplings shrink the diagonal; on strongly
//!   anisotropic meshes the filtered diagonal can go negative and the
//!   eigenvalue estimate for the smoother fails.
//! * [`filter_offlmp`] lumps dropped mass into the *off-diagonals* where
//!   possible, keeping the diagonal positive and the row's diagonal-dominance
//!   ratio within a factor `tau` of the original. Rows where no safe
//!   redistribution exists are left unlumped and recorded in
//!   `skipped_rows` — the one place row sums are knowingly not preserved.
//!
//! The diagonal used by the prolongator smoother is either the filtered
//! matrix's own diagonal ([`diag_standard`]) or the row-wise 1-norm
//! ([`diag_one_norm`]), optionally fixed up by [`safeguard`] so that the
//! smoothing operator's spectrum stays in [-1, 1] and root-row prolongator
//! weights stay positive.
//!
//! [`sprsfy`] prunes, per aggregate, lone strong couplings that reach into a
//! neighboring aggregate only weakly connected to the root; removing them
//! before smoothing cuts coarse-operator fill without touching the hard
//! couplings that matter for convergence.

use std::collections::BTreeSet;

use crate::aggregation::Aggregation;
use crate::error::{Error, Result};
use crate::sparse::{CsrBuilder, SparseMatrix};
use crate::strength::StrengthMask;

/// A filtered operator plus the rows (if any) where lumping was skipped and
/// row sums are therefore not preserved.
#[derive(Debug, Clone)]
pub struct FilteredMatrix {
    pub matrix: SparseMatrix,
    /// Ascending row indices that took the no-lumping fallback.
    pub skipped_rows: Vec<usize>,
}

/// Which rule produced a [`DiagonalApprox`]; [`safeguard`] insists on seeing
/// a raw 1-norm so the fix-up cannot be applied twice or to the wrong thing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagonalKind {
    Standard,
    OneNorm,
    OneNormSafeguarded,
}

/// Diagonal approximation used by the prolongator smoother.
#[derive(Debug, Clone)]
pub struct DiagonalApprox {
    pub values: Vec<f64>,
    pub kind: DiagonalKind,
}

/// Sum of |off-diagonal| entries and the stored diagonal of one CSR row.
/// Returns (a_ii if stored, off-diagonal absolute sum).
fn row_profile(cols: &[usize], vals: &[f64], row: usize) -> (Option<f64>, f64) {
    let mut diag = None;
    let mut off_abs = 0.0;
    for (&c, &v) in cols.iter().zip(vals) {
        if c == row {
            diag = Some(v);
        } else {
            off_abs += v.abs();
        }
    }
    (diag, off_abs)
}

/// Keeps the diagonal and strong off-diagonals; folds every dropped weak
/// entry into the diagonal, preserving row sums.
///
/// A row with weak entries but no stored diagonal has nowhere to fold; such
/// rows simply lose the weak mass (the operators this crate builds always
/// store their diagonals).
pub fn filter_standard(a: &SparseMatrix, mask: &StrengthMask) -> Result<FilteredMatrix> {
    check_filter_inputs(a, mask, "filter_standard")?;
    let mut builder = CsrBuilder::new(a.ncols());
    let mut keep_cols: Vec<usize> = Vec::new();
    let mut keep_vals: Vec<f64> = Vec::new();
    for i in 0..a.nrows() {
        let lo = a.row_offsets()[i];
        let (cols, vals) = a.row(i);
        keep_cols.clear();
        keep_vals.clear();
        let mut dropped = 0.0;
        let mut diag_slot = None;
        for (k, (&c, &v)) in cols.iter().zip(vals).enumerate() {
            if c == i {
                diag_slot = Some(keep_cols.len());
                keep_cols.push(c);
                keep_vals.push(v);
            } else if mask.is_strong(lo + k) {
                keep_cols.push(c);
                keep_vals.push(v);
            } else {
                dropped += v;
            }
        }
        if let Some(slot) = diag_slot {
            keep_vals[slot] += dropped;
        }
        builder.push_row(&keep_cols, &keep_vals)?;
    }
    Ok(FilteredMatrix {
        matrix: builder.finish(),
        skipped_rows: Vec::new(),
    })
}

/// Filters weak couplings with off-diagonal lumping: the removed mass `r_i`
/// of each row is pushed back into the *kept* entries instead of the
/// diagonal wherever that keeps the diagonal positive and the row's
/// dominance ratio within `tau` times the original.
///
/// Per row, with `r_i` the sum of removed weak entries and `kappa+`/`kappa-`
/// the sums of kept positive/negative off-diagonals:
///
/// * `r_i > 0` — fold into the diagonal (this only strengthens it).
/// * `r_i < 0`, `|r_i| <= kappa+` — scale the kept positives down by
///   `1 + r_i/kappa+`; the diagonal is untouched.
/// * otherwise zero the kept positives (stored as explicit zeros so the
///   pattern never depends on values) and split the remainder
///   `r_hat = r_i + kappa+` between the diagonal and the kept negatives:
///   the diagonal absorbs the most negative share `d` in `[r_hat, 0]` that
///   keeps it positive and the dominance growth within bounds (the boundary
///   value has the closed form in [`growth_bound_diagonal_shift`]); the rest
///   scales the kept negatives up proportionally. With no kept negatives the
///   remainder goes back onto the zeroed positives if the growth bound
///   allows, flipping their sign.
///
/// Rows where none of this is safely possible (no kept entries, nonpositive
/// original diagonal, growth bound unsatisfiable) keep their unlumped
/// filtered values and are recorded in `skipped_rows`.
pub fn filter_offlmp(a: &SparseMatrix, mask: &StrengthMask, tau: f64) -> Result<FilteredMatrix> {
    check_filter_inputs(a, mask, "filter_offlmp")?;
    if !(tau >= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "lumping growth factor must be >= 1, got {tau}"
        )));
    }
    let mut builder = CsrBuilder::new(a.ncols());
    let mut skipped = Vec::new();
    let mut keep_cols: Vec<usize> = Vec::new();
    let mut keep_vals: Vec<f64> = Vec::new();

    for i in 0..a.nrows() {
        let lo = a.row_offsets()[i];
        let (cols, vals) = a.row(i);
        keep_cols.clear();
        keep_vals.clear();

        let mut diag_slot = None;
        let mut removed = 0.0;
        let mut kappa_pos = 0.0;
        let mut kappa_neg = 0.0;
        for (k, (&c, &v)) in cols.iter().zip(vals).enumerate() {
            if c == i {
                diag_slot = Some(keep_cols.len());
                keep_cols.push(c);
                keep_vals.push(v);
            } else if mask.is_strong(lo + k) {
                if v > 0.0 {
                    kappa_pos += v;
                } else {
                    kappa_neg += v;
                }
                keep_cols.push(c);
                keep_vals.push(v);
            } else {
                removed += v;
            }
        }

        if removed == 0.0 {
            builder.push_row(&keep_cols, &keep_vals)?;
            continue;
        }

        if removed > 0.0 {
            // Positive mass only ever strengthens the diagonal.
            match diag_slot {
                Some(slot) => keep_vals[slot] += removed,
                None => skipped.push(i),
            }
            builder.push_row(&keep_cols, &keep_vals)?;
            continue;
        }

        // removed < 0 from here on.
        if -removed <= kappa_pos {
            // The kept positives can absorb all of it without sign changes.
            let factor = 1.0 + removed / kappa_pos;
            for (slot, &c) in keep_cols.iter().enumerate() {
                if c != i && keep_vals[slot] > 0.0 {
                    keep_vals[slot] *= factor;
                }
            }
            builder.push_row(&keep_cols, &keep_vals)?;
            continue;
        }

        let r_hat = removed + kappa_pos; // < 0
        let a_ii = diag_slot.map(|s| keep_vals[s]);
        let (_, off_abs) = row_profile(cols, vals, i);

        // The growth bound needs a positive original diagonal to be
        // meaningful; anything else falls through to the skip path.
        let lumped = match a_ii {
            Some(a_ii) if a_ii > 0.0 => {
                let growth_limit = tau * (off_abs / a_ii);
                if kappa_neg < 0.0 {
                    match diagonal_share(a_ii, r_hat, kappa_neg, growth_limit) {
                        Some(d) => {
                            let delta = (r_hat - d) / kappa_neg;
                            for (slot, &c) in keep_cols.iter().enumerate() {
                                if c == i {
                                    keep_vals[slot] = a_ii + d;
                                } else if keep_vals[slot] > 0.0 {
                                    keep_vals[slot] = 0.0;
                                } else {
                                    keep_vals[slot] *= 1.0 + delta;
                                }
                            }
                            true
                        }
                        None => false,
                    }
                } else if kappa_pos > 0.0 && -r_hat <= growth_limit * a_ii {
                    // No kept negatives: push everything back onto the
                    // (zeroed) positives, flipping their sign.
                    let factor = 1.0 + removed / kappa_pos;
                    for (slot, &c) in keep_cols.iter().enumerate() {
                        if c != i && keep_vals[slot] > 0.0 {
                            keep_vals[slot] *= factor;
                        }
                    }
                    true
                } else {
                    false
                }
            }
            _ => false,
        };

        if !lumped {
            // Keep the filtered row untouched (no diagonal correction at
            // all); the row sum changes and the caller is told.
            skipped.push(i);
        }
        builder.push_row(&keep_cols, &keep_vals)?;
    }

    Ok(FilteredMatrix {
        matrix: builder.finish(),
        skipped_rows: skipped,
    })
}

/// Most negative diagonal share `d` in `[r_hat, 0]` keeping `a_ii + d > 0`
/// and the dominance ratio of the lumped row at most `growth_limit`;
/// `None` when no such share exists.
fn diagonal_share(a_ii: f64, r_hat: f64, kappa_neg: f64, growth_limit: f64) -> Option<f64> {
    let feasible = |d: f64| -> bool {
        let lhs = d - r_hat - kappa_neg; // |kept off-diagonals| after lumping
        let rhs = growth_limit * (a_ii + d);
        a_ii + d > 0.0 && lhs <= rhs + 1e-12 * (lhs.abs() + rhs.abs() + 1.0)
    };
    if feasible(r_hat) {
        return Some(r_hat);
    }
    // The dominance ratio is monotone in d (direction given by the sign of
    // the final row sum), so the feasible set is an interval whose boundary
    // has a closed form.
    let d = growth_bound_diagonal_shift(a_ii, r_hat, kappa_neg, growth_limit)
        .clamp(r_hat, 0.0);
    if feasible(d) {
        return Some(d);
    }
    // Falling back to no diagonal change is always within the bound when the
    // diagonal is positive; check defensively against rounding.
    if feasible(0.0) {
        return Some(0.0);
    }
    None
}

/// Diagonal share at which the lumped row's dominance ratio exactly meets
/// `growth_limit`: the solution `d` of
/// `(d - r_hat - kappa_neg) = growth_limit * (a_ii + d)`.
///
/// Exposed so the closed form can be validated against a bisection of the
/// dominance ratio; callers must still clamp into `[r_hat, 0]` and verify
/// feasibility. A `growth_limit` of exactly 1 makes the ratio independent of
/// `d` (no boundary exists); `r_hat` is returned as the degenerate answer.
pub fn growth_bound_diagonal_shift(
    a_ii: f64,
    r_hat: f64,
    kappa_neg: f64,
    growth_limit: f64,
) -> f64 {
    let denom = 1.0 - growth_limit;
    if denom == 0.0 {
        return r_hat;
    }
    (r_hat + kappa_neg + growth_limit * a_ii) / denom
}

/// The filtered matrix's own diagonal (zero where no entry is stored).
pub fn diag_standard(abar: &SparseMatrix) -> DiagonalApprox {
    DiagonalApprox {
        values: abar.diagonal(),
        kind: DiagonalKind::Standard,
    }
}

/// Row-wise 1-norm `sum_j |Abar_ij|`, diagonal included. Nonnegative by
/// construction and dominates the plain diagonal in magnitude, which is what
/// bounds the smoothing operator's spectrum.
pub fn diag_one_norm(abar: &SparseMatrix) -> DiagonalApprox {
    let values = (0..abar.nrows())
        .map(|i| abar.row(i).1.iter().map(|v| v.abs()).sum())
        .collect();
    DiagonalApprox {
        values,
        kind: DiagonalKind::OneNorm,
    }
}

/// Fixes up a raw 1-norm diagonal so every entry is strictly positive and
/// large enough that root rows of the smoothed prolongator keep positive
/// weights: empty rows get 1, and rows whose (positive) sum `s_i` violates
/// `2 s_i <= d_i` get `d_i = 2 s_i`. Applying it to anything but a raw 1-norm
/// is a contract error.
pub fn safeguard(d: DiagonalApprox, abar: &SparseMatrix) -> Result<DiagonalApprox> {
    if d.kind != DiagonalKind::OneNorm {
        return Err(Error::InvalidConfig(
            "safeguard expects an unsafeguarded one-norm diagonal".into(),
        ));
    }
    if d.values.len() != abar.nrows() {
        return Err(Error::DimensionMismatch {
            op: "safeguard",
            details: format!(
                "diagonal has {} entries, matrix has {} rows",
                d.values.len(),
                abar.nrows()
            ),
        });
    }
    let sums = abar.row_sums();
    let values = d
        .values
        .iter()
        .zip(&sums)
        .map(|(&di, &si)| {
            if di == 0.0 {
                1.0
            } else if si > 0.0 && 2.0 * si > di {
                2.0 * si
            } else {
                di
            }
        })
        .collect();
    Ok(DiagonalApprox {
        values,
        kind: DiagonalKind::OneNormSafeguarded,
    })
}

/// Prunes lone cross-aggregate couplings from the filtered matrix.
///
/// For each aggregate root, the neighboring aggregates reached through the
/// root's *weak* edges (in `a`'s graph) and holding no strong connection to
/// the root are candidates for pruning. When the non-root members of the
/// root's aggregate hold exactly one strong connection into a candidate,
/// that coupling is dropped from the filtered matrix — folded into its row's
/// diagonal so row sums survive — and the mirrored entry is dropped with the
/// same compensation. Resolving such couplings on the coarse grid is not
/// worth the prolongator fill they would cause.
pub fn sprsfy(
    a: &SparseMatrix,
    abar: &FilteredMatrix,
    mask: &StrengthMask,
    agg: &Aggregation,
) -> Result<FilteredMatrix> {
    check_filter_inputs(a, mask, "sprsfy")?;
    if agg.num_vertices() != a.nrows() {
        return Err(Error::DimensionMismatch {
            op: "sprsfy",
            details: format!(
                "aggregation covers {} vertices, matrix has {} rows",
                agg.num_vertices(),
                a.nrows()
            ),
        });
    }
    if abar.matrix.nrows() != a.nrows() || abar.matrix.ncols() != a.ncols() {
        return Err(Error::DimensionMismatch {
            op: "sprsfy",
            details: "filtered matrix shape differs from source".into(),
        });
    }

    let num_aggs = agg.num_aggregates();
    let members = agg.members();
    // Stamped scratch maps keyed by aggregate id, reset per root.
    let mut candidate_stamp = vec![usize::MAX; num_aggs];
    let mut count_stamp = vec![usize::MAX; num_aggs];
    let mut counts = vec![0usize; num_aggs];
    let mut last_edge = vec![(0usize, 0usize); num_aggs];

    let mut drops: BTreeSet<(usize, usize)> = BTreeSet::new();

    for g in 0..num_aggs {
        let root = agg.root_of(g);
        let lo = a.row_offsets()[root];
        let (cols, vals) = a.row(root);
        // Aggregates strongly connected to the root are never candidates.
        for (k, &j) in cols.iter().enumerate() {
            if j != root && mask.is_strong(lo + k) {
                if let Some(c) = agg.aggregate_of(j) {
                    candidate_stamp[c] = usize::MAX - 1; // blocked this round
                }
            }
        }
        let mut candidates: Vec<usize> = Vec::new();
        for (k, &j) in cols.iter().enumerate() {
            // A stored zero is pattern, not coupling: it is not an edge of
            // the operator's graph and nominates nothing.
            if j == root || mask.is_strong(lo + k) || vals[k] == 0.0 {
                continue;
            }
            if let Some(c) = agg.aggregate_of(j) {
                if c != g && candidate_stamp[c] != usize::MAX - 1 && candidate_stamp[c] != g {
                    candidate_stamp[c] = g;
                    candidates.push(c);
                }
            }
        }
        if candidates.is_empty() {
            // Reset blocks for the next round.
            for (k, &j) in cols.iter().enumerate() {
                if j != root && mask.is_strong(lo + k) {
                    if let Some(c) = agg.aggregate_of(j) {
                        candidate_stamp[c] = usize::MAX;
                    }
                }
            }
            continue;
        }

        // Count strong connections from non-root members into candidates.
        for &u in &members[g] {
            if u == root {
                continue;
            }
            let ulo = a.row_offsets()[u];
            let (ucols, _) = a.row(u);
            for (k, &v) in ucols.iter().enumerate() {
                if v == u || !mask.is_strong(ulo + k) {
                    continue;
                }
                if let Some(c) = agg.aggregate_of(v) {
                    if candidate_stamp[c] == g {
                        if count_stamp[c] != g {
                            count_stamp[c] = g;
                            counts[c] = 0;
                        }
                        counts[c] += 1;
                        last_edge[c] = (u, v);
                    }
                }
            }
        }
        for &c in &candidates {
            if count_stamp[c] == g && counts[c] == 1 {
                let (u, v) = last_edge[c];
                drops.insert((u, v));
                drops.insert((v, u)); // symmetrize with matching compensation
            }
        }
        // Clear blocked marks (candidate marks are g-stamped and expire).
        for (k, &j) in cols.iter().enumerate() {
            if j != root && mask.is_strong(lo + k) {
                if let Some(c) = agg.aggregate_of(j) {
                    if candidate_stamp[c] == usize::MAX - 1 {
                        candidate_stamp[c] = usize::MAX;
                    }
                }
            }
        }
    }

    // Rebuild the filtered matrix without the dropped entries, folding each
    // dropped value into its row's diagonal.
    let m = &abar.matrix;
    let mut builder = CsrBuilder::new(m.ncols());
    let mut keep_cols: Vec<usize> = Vec::new();
    let mut keep_vals: Vec<f64> = Vec::new();
    for i in 0..m.nrows() {
        let (cols, vals) = m.row(i);
        keep_cols.clear();
        keep_vals.clear();
        let mut fold = 0.0;
        let mut diag_slot = None;
        for (&c, &v) in cols.iter().zip(vals) {
            if c != i && drops.contains(&(i, c)) {
                fold += v;
                continue;
            }
            if c == i {
                diag_slot = Some(keep_cols.len());
            }
            keep_cols.push(c);
            keep_vals.push(v);
        }
        if let Some(slot) = diag_slot {
            keep_vals[slot] += fold;
        }
        builder.push_row(&keep_cols, &keep_vals)?;
    }
    Ok(FilteredMatrix {
        matrix: builder.finish(),
        skipped_rows: abar.skipped_rows.clone(),
    })
}

fn check_filter_inputs(a: &SparseMatrix, mask: &StrengthMask, op: &'static str) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            op,
            details: format!("matrix is {} x {}, expected square", a.nrows(), a.ncols()),
        });
    }
    if mask.len() != a.nnz() {
        return Err(Error::DimensionMismatch {
            op,
            details: format!(
                "mask covers {} entries, matrix stores {}",
                mask.len(),
                a.nnz()
            ),
        });
    }
    Ok(())
}
