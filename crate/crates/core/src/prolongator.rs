//! Smoothed prolongators: eigenvalue estimation for the damping weight,
//! the Jacobi-style smoothing pass over the tentative prolongator, and the
//! optional row-constraint projection.
//!
//! The tentative prolongator injects each aggregate's constant; one damped
//! Jacobi sweep with the filtered operator,
//! `P = (I - omega * D^-1 * Abar) * Ptent`, turns those flat-top basis
//! functions into smooth ones. The weight is `omega = 4 / (3 * lambda)`
//! with `lambda` an estimate of the largest eigenvalue of
//! `D^-1 * Abar`, so the sweep damps the upper half of the spectrum without
//! amplifying anything.
//!
//! Everything that can poison that weight is surfaced rather than patched
//! over: a zero diagonal entry fails the estimate, and the caller is
//! expected to treat a nonpositive `lambda` as a setup failure — both are
//! exactly the traditional-pipeline breakdowns that the safeguarded 1-norm
//! diagonal exists to prevent.

use crate::error::{Error, Result};
use crate::filtering::DiagonalApprox;
use crate::rng::XorShift64Star;
use crate::sparse::{CsrBuilder, SparseMatrix};

/// How the diagonal used inside the prolongator smoother is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiagonalChoice {
    /// Diagonal of the filtered matrix. Cheap, but filtering can leave it
    /// small or negative on difficult meshes.
    #[default]
    Filtered,
    /// Safeguarded row-wise 1-norm: strictly positive and bounds the
    /// spectrum of the smoothing operator.
    SafeguardedOneNorm,
}

/// How weak couplings removed by filtering are folded back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LumpingRule {
    /// Fold everything into the diagonal.
    Diagonal,
    /// Redistribute over kept off-diagonals where that keeps the diagonal
    /// positive and dominance growth within the factor `tau`.
    OffDiagonal { tau: f64 },
}

impl Default for LumpingRule {
    fn default() -> Self {
        LumpingRule::Diagonal
    }
}

/// How the largest eigenvalue of `D^-1 * Abar` is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaEstimate {
    /// Power iteration with a seeded random start.
    PowerMethod { iterations: usize },
    /// Take `lambda = 1` without iterating. Only sound when the diagonal is
    /// the safeguarded 1-norm, whose construction guarantees the bound.
    Unit,
}

impl Default for LambdaEstimate {
    fn default() -> Self {
        LambdaEstimate::PowerMethod { iterations: 10 }
    }
}

/// How the damping weight is derived from the eigenvalue estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OmegaRule {
    /// `omega = 4 / (3 * lambda)`, the weight minimizing the smoother's
    /// reach over the upper half of the spectrum.
    FourThirds,
    /// A fixed positive weight, ignoring the estimate.
    Fixed(f64),
}

impl Default for OmegaRule {
    fn default() -> Self {
        OmegaRule::FourThirds
    }
}

/// Options steering prolongator construction on every level.
///
/// The default is the traditional pipeline: diagonal lumping, filtered
/// diagonal, power-method estimate, `4/3` weight, no row constraints, no
/// sparsification. Each robustness feature is opt-in so they can be studied
/// one at a time or combined.
#[derive(Debug, Clone, PartialEq)]
pub struct ProlongatorConfig {
    pub diagonal: DiagonalChoice,
    pub lumping: LumpingRule,
    pub lambda: LambdaEstimate,
    pub omega: OmegaRule,
    /// Project each prolongator row into `[0, 1]` while preserving its sum.
    pub constrain: bool,
    /// Prune lone cross-aggregate couplings from the filtered matrix before
    /// smoothing.
    pub sparsify: bool,
    /// Seed for the power method's start vector.
    pub power_seed: u64,
}

impl Default for ProlongatorConfig {
    fn default() -> Self {
        Self {
            diagonal: DiagonalChoice::Filtered,
            lumping: LumpingRule::Diagonal,
            lambda: LambdaEstimate::default(),
            omega: OmegaRule::FourThirds,
            constrain: false,
            sparsify: false,
            power_seed: 42,
        }
    }
}

impl ProlongatorConfig {
    /// Rejects combinations whose guarantees don't compose: skipping the
    /// power method leans on the spectral bound only the safeguarded 1-norm
    /// provides, fixed weights must be positive, and the lumping growth
    /// factor must allow at least the original dominance.
    pub fn validate(&self) -> Result<()> {
        if self.lambda == LambdaEstimate::Unit
            && self.diagonal != DiagonalChoice::SafeguardedOneNorm
        {
            return Err(Error::InvalidConfig(
                "unit eigenvalue shortcut requires the safeguarded one-norm diagonal".into(),
            ));
        }
        if let OmegaRule::Fixed(w) = self.omega {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "fixed damping weight must be positive and finite, got {w}"
                )));
            }
        }
        if let LumpingRule::OffDiagonal { tau } = self.lumping {
            if !(tau >= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "lumping growth factor must be >= 1, got {tau}"
                )));
            }
        }
        if let LambdaEstimate::PowerMethod { iterations } = self.lambda {
            if iterations == 0 {
                return Err(Error::InvalidConfig(
                    "power method needs at least one iteration".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Estimates the largest eigenvalue of `D^-1 * Abar` by power iteration.
///
/// Iterates `x <- normalize(D^-1 * Abar * x)` from a seeded random start and
/// returns the pencil Rayleigh quotient `x' Abar x / x' D x`. For symmetric
/// `Abar` and positive `D` that quotient never exceeds the true largest
/// eigenvalue, so a spectral bound on the pencil (like the one the
/// safeguarded 1-norm provides) also bounds the estimate — while an
/// indefinite diagonal still shows up as the nonsensical (possibly negative)
/// value the iteration actually converged to, which is the failure the
/// caller must detect.
pub fn estimate_lambda_max(
    abar: &SparseMatrix,
    diag: &DiagonalApprox,
    iterations: usize,
    seed: u64,
) -> Result<f64> {
    let n = abar.nrows();
    if abar.ncols() != n {
        return Err(Error::DimensionMismatch {
            op: "estimate_lambda_max",
            details: format!("matrix is {} x {}, expected square", n, abar.ncols()),
        });
    }
    if diag.values.len() != n {
        return Err(Error::DimensionMismatch {
            op: "estimate_lambda_max",
            details: format!("diagonal has {} entries for {} rows", diag.values.len(), n),
        });
    }
    if let Some(i) = diag.values.iter().position(|&d| d == 0.0) {
        return Err(Error::ZeroDiagonal(i));
    }
    if n == 0 {
        return Err(Error::InvalidMatrix("empty matrix has no spectrum".into()));
    }

    let mut rng = XorShift64Star::new(seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.next_centered()).collect();
    normalize(&mut x);
    for _ in 0..iterations {
        let mut y = abar.spmv(&x)?;
        for (yi, di) in y.iter_mut().zip(&diag.values) {
            *yi /= di;
        }
        if normalize(&mut y) == 0.0 {
            break; // x is in the null space; the quotient below is 0
        }
        x = y;
    }

    let y = abar.spmv(&x)?;
    let num: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
    let den: f64 = x
        .iter()
        .zip(&diag.values)
        .map(|(a, d)| a * a * d)
        .sum();
    if den == 0.0 {
        return Err(Error::InvalidMatrix(
            "eigenvalue estimate degenerated: x' D x = 0".into(),
        ));
    }
    Ok(num / den)
}

fn normalize(x: &mut [f64]) -> f64 {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in x.iter_mut() {
            *v /= norm;
        }
    }
    norm
}

/// Builds the smoothing operator `S = I - omega * D^-1 * Abar` explicitly.
///
/// The pattern is `Abar`'s with a diagonal slot inserted where missing.
pub fn smoothing_operator(
    abar: &SparseMatrix,
    diag: &DiagonalApprox,
    omega: f64,
) -> Result<SparseMatrix> {
    let n = abar.nrows();
    if abar.ncols() != n {
        return Err(Error::DimensionMismatch {
            op: "smoothing_operator",
            details: format!("matrix is {} x {}, expected square", n, abar.ncols()),
        });
    }
    if diag.values.len() != n {
        return Err(Error::DimensionMismatch {
            op: "smoothing_operator",
            details: format!("diagonal has {} entries for {} rows", diag.values.len(), n),
        });
    }
    let mut builder = CsrBuilder::new(n);
    let mut cols_buf: Vec<usize> = Vec::new();
    let mut vals_buf: Vec<f64> = Vec::new();
    for i in 0..n {
        let d = diag.values[i];
        if d == 0.0 {
            return Err(Error::ZeroDiagonal(i));
        }
        let scale = -omega / d;
        let (cols, vals) = abar.row(i);
        cols_buf.clear();
        vals_buf.clear();
        let mut placed_diag = false;
        for (&c, &v) in cols.iter().zip(vals) {
            if c == i {
                cols_buf.push(c);
                vals_buf.push(1.0 + scale * v);
                placed_diag = true;
            } else {
                if !placed_diag && c > i {
                    cols_buf.push(i);
                    vals_buf.push(1.0);
                    placed_diag = true;
                }
                cols_buf.push(c);
                vals_buf.push(scale * v);
            }
        }
        if !placed_diag {
            cols_buf.push(i);
            vals_buf.push(1.0);
        }
        builder.push_row(&cols_buf, &vals_buf)?;
    }
    Ok(builder.finish())
}

/// One damped Jacobi sweep over the tentative prolongator:
/// `P = (I - omega * D^-1 * Abar) * Ptent`.
pub fn smooth_prolongator(
    abar: &SparseMatrix,
    diag: &DiagonalApprox,
    tentative: &SparseMatrix,
    omega: f64,
) -> Result<SparseMatrix> {
    if tentative.nrows() != abar.nrows() {
        return Err(Error::DimensionMismatch {
            op: "smooth_prolongator",
            details: format!(
                "tentative prolongator has {} rows for a {}-row operator",
                tentative.nrows(),
                abar.nrows()
            ),
        });
    }
    let s = smoothing_operator(abar, diag, omega)?;
    s.spmm(tentative)
}

/// Result of the row-constraint projection: the adjusted prolongator and
/// the rows that had to fall back to their tentative form.
#[derive(Debug, Clone)]
pub struct ConstrainResult {
    pub matrix: SparseMatrix,
    /// Ascending row indices replaced by their tentative rows because no
    /// `[0, 1]` representation with the right sum exists on the pattern.
    pub fallback_rows: Vec<usize>,
}

/// Forces every prolongator row into `[0, 1]` entry-wise while preserving
/// its sum, so coarse corrections interpolate without over- or under-shoot.
///
/// Rows whose sum is negative or exceeds the number of stored entries can't
/// satisfy both constraints on their pattern and are replaced by the
/// corresponding tentative row (recorded in `fallback_rows`). A row summing
/// to exactly zero becomes explicit zeros. Otherwise entries are adjusted
/// pass by pass: the worst violator is pinned to its bound, the pinned
/// surplus is spread evenly over the still-free entries, and the process
/// repeats until the row is feasible. If every entry gets pinned while
/// surplus remains, the row likewise falls back.
pub fn constrain_rows(p: &SparseMatrix, tentative: &SparseMatrix) -> Result<ConstrainResult> {
    if p.nrows() != tentative.nrows() || p.ncols() != tentative.ncols() {
        return Err(Error::DimensionMismatch {
            op: "constrain_rows",
            details: format!(
                "prolongator is {} x {}, tentative is {} x {}",
                p.nrows(),
                p.ncols(),
                tentative.nrows(),
                tentative.ncols()
            ),
        });
    }
    let mut builder = CsrBuilder::new(p.ncols());
    let mut fallback_rows = Vec::new();
    let mut work: Vec<f64> = Vec::new();
    let mut free: Vec<usize> = Vec::new();

    for i in 0..p.nrows() {
        let (cols, vals) = p.row(i);
        let sum: f64 = vals.iter().sum();
        let count = vals.len();

        if sum < 0.0 || sum > count as f64 {
            let (tcols, tvals) = tentative.row(i);
            builder.push_row(tcols, tvals)?;
            fallback_rows.push(i);
            continue;
        }
        if sum == 0.0 {
            work.clear();
            work.resize(count, 0.0);
            builder.push_row(cols, &work)?;
            continue;
        }

        work.clear();
        work.extend_from_slice(vals);
        free.clear();
        free.extend(0..count);
        let feasible = project_row(&mut work, &mut free);
        if feasible {
            builder.push_row(cols, &work)?;
        } else {
            let (tcols, tvals) = tentative.row(i);
            builder.push_row(tcols, tvals)?;
            fallback_rows.push(i);
        }
    }
    Ok(ConstrainResult {
        matrix: builder.finish(),
        fallback_rows,
    })
}

/// In-place bound enforcement for one row; `free` holds the indices still
/// adjustable. Returns false when the surplus cannot be placed.
fn project_row(work: &mut [f64], free: &mut Vec<usize>) -> bool {
    loop {
        let mut min_slot = None;
        let mut max_slot = None;
        for (k, &slot) in free.iter().enumerate() {
            let v = work[slot];
            if v < 0.0 && min_slot.is_none_or(|(_, m)| v < m) {
                min_slot = Some((k, v));
            }
            if v > 1.0 && max_slot.is_none_or(|(_, m)| v > m) {
                max_slot = Some((k, v));
            }
        }
        if min_slot.is_none() && max_slot.is_none() {
            return true;
        }
        let mut surplus = 0.0;
        // Remove the higher position first so the indices stay valid.
        let mut to_remove = [None, None];
        if let Some((k, v)) = min_slot {
            work[free[k]] = 0.0;
            surplus += v;
            to_remove[0] = Some(k);
        }
        if let Some((k, v)) = max_slot {
            work[free[k]] = 1.0;
            surplus += v - 1.0;
            to_remove[1] = Some(k);
        }
        let mut removals: Vec<usize> = to_remove.iter().flatten().copied().collect();
        removals.sort_unstable();
        removals.dedup();
        for &k in removals.iter().rev() {
            free.swap_remove(k);
        }
        if free.is_empty() {
            return surplus == 0.0;
        }
        let share = surplus / free.len() as f64;
        for &slot in free.iter() {
            work[slot] += share;
        }
    }
}
