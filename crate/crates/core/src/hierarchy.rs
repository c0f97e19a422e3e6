//! Multigrid hierarchy construction and the V-cycle.
//!
//! Setup repeats one pipeline per level: classify coupling strength (on the
//! operator itself or on a distance Laplacian built from coordinates),
//! aggregate, form the tentative prolongator, filter weak couplings (with
//! diagonal or off-diagonal lumping), optionally sparsify, choose the
//! smoother diagonal, estimate the damping eigenvalue, smooth the
//! prolongator, optionally constrain its rows, and form the Galerkin coarse
//! operator `P' A P` — until the operator is small enough, the level budget
//! is exhausted, or coarsening stalls. The coarsest operator is factorized
//! densely.
//!
//! A nonpositive eigenvalue estimate anywhere in setup is reported as a
//! typed failure naming the level and the value: with the plain filtered
//! diagonal this is the known breakdown on meshes with large positive
//! couplings, and silently proceeding would build a divergent smoother.
//!
//! The V-cycle applies the configured Chebyshev or damped-Jacobi smoother
//! symmetrically (same parameters before and after coarse correction), so
//! the induced preconditioner is self-adjoint in the operator inner product
//! and safe inside conjugate gradients.

use crate::aggregation::{aggregate, tentative_prolongator};
use crate::dense::DenseLu;
use crate::error::{Error, Result};
use crate::filtering::{
    diag_one_norm, diag_standard, filter_offlmp, filter_standard, safeguard, sprsfy,
    DiagonalApprox, DiagonalKind,
};
use crate::prolongator::{
    constrain_rows, estimate_lambda_max, smooth_prolongator, DiagonalChoice, LambdaEstimate,
    LumpingRule, OmegaRule, ProlongatorConfig,
};
use crate::sparse::{galerkin, SparseMatrix};
use crate::strength::{classic_strength, distance_laplacian, Coordinates};

/// Where the strength-of-connection classification reads its values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StrengthSource {
    /// The operator's own entries.
    #[default]
    Matrix,
    /// A distance Laplacian built from vertex coordinates: strength follows
    /// mesh proximity instead of entry magnitudes, which large positive
    /// couplings would otherwise distort.
    DistanceLaplacian,
}

/// Relaxation used before and after coarse correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmootherKind {
    /// Chebyshev polynomial iteration of the given degree on the
    /// diagonally scaled operator, `sweeps` applications per smoothing pass.
    Chebyshev { degree: usize, sweeps: usize },
    /// One damped Jacobi sweep per smoothing pass.
    Jacobi { omega: f64 },
}

impl Default for SmootherKind {
    fn default() -> Self {
        SmootherKind::Chebyshev {
            degree: 2,
            sweeps: 2,
        }
    }
}

/// Everything `Hierarchy::setup` needs to know.
#[derive(Debug, Clone, PartialEq)]
pub struct SetupConfig {
    /// Strength threshold in `[0, 1]`.
    pub theta: f64,
    pub strength_source: StrengthSource,
    /// Coarsening stops once an operator has at most this many rows.
    pub coarse_size: usize,
    /// Hard cap on the number of levels (at least 2).
    pub max_levels: usize,
    pub smoother: SmootherKind,
    pub prolongator: ProlongatorConfig,
    /// Estimate the Chebyshev interval on the raw operator instead of the
    /// diagonally scaled one. Off by default: undamped Chebyshev on raw
    /// finite-element matrices diverges because their spectra are nowhere
    /// near `[0, O(1)]`.
    pub cheby_on_raw_matrix: bool,
}

impl Default for SetupConfig {
    fn default() -> Self {
        Self {
            theta: 0.025,
            strength_source: StrengthSource::Matrix,
            coarse_size: 1000,
            max_levels: 20,
            smoother: SmootherKind::default(),
            prolongator: ProlongatorConfig::default(),
            cheby_on_raw_matrix: false,
        }
    }
}

impl SetupConfig {
    fn validate(&self) -> Result<()> {
        if self.coarse_size < 1 {
            return Err(Error::InvalidConfig(
                "coarse_size must be at least 1".into(),
            ));
        }
        if self.max_levels < 2 {
            return Err(Error::InvalidConfig("max_levels must be at least 2".into()));
        }
        if let SmootherKind::Jacobi { omega } = self.smoother {
            if !(omega > 0.0) || !omega.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "Jacobi damping must be positive and finite, got {omega}"
                )));
            }
        }
        self.prolongator.validate()
    }
}

/// Precomputed relaxation data for one level.
#[derive(Debug, Clone)]
enum SmootherState {
    Chebyshev {
        diag: Vec<f64>,
        interval: (f64, f64),
        degree: usize,
        sweeps: usize,
    },
    Jacobi {
        diag: Vec<f64>,
        omega: f64,
    },
}

/// One level: its operator, the prolongator into it from the next-finer
/// level is stored on the *finer* level, and either smoother data or (on
/// the coarsest level) a dense factorization.
#[derive(Debug)]
struct Level {
    a: SparseMatrix,
    /// Prolongator to this level's coarse space; `None` on the coarsest.
    p: Option<SparseMatrix>,
    /// Cached transpose of `p` used for restriction.
    pt: Option<SparseMatrix>,
    smoother: Option<SmootherState>,
    coarse_solve: Option<DenseLu>,
}

/// Per-level diagnostics captured during setup.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelStats {
    pub n: usize,
    pub nnz: usize,
    /// Number of aggregates formed on this level (`None` on the coarsest).
    pub aggregates: Option<usize>,
    /// Eigenvalue estimate used for the prolongator damping weight.
    pub lambda: Option<f64>,
    /// Rows the off-diagonal lumping had to skip.
    pub skipped_rows: usize,
    /// Prolongator rows replaced by their tentative form by the row
    /// constraints.
    pub constraint_fallbacks: usize,
}

/// An immutable multigrid hierarchy: apply it with [`Hierarchy::apply`] (one
/// V-cycle from a zero guess, the preconditioner form) or drive cycles
/// explicitly with [`Hierarchy::vcycle`].
#[derive(Debug)]
pub struct Hierarchy {
    levels: Vec<Level>,
    stats: Vec<LevelStats>,
    operator_complexity: f64,
    skipped_lumping_rows: usize,
}

impl Hierarchy {
    /// Builds the hierarchy. `coords` must be present exactly when the
    /// strength source is the distance Laplacian; coarse-level coordinates
    /// are aggregate centroids.
    pub fn setup(a: SparseMatrix, coords: Option<Coordinates>, cfg: &SetupConfig) -> Result<Self> {
        cfg.validate()?;
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch {
                op: "setup",
                details: format!("matrix is {} x {}, expected square", a.nrows(), a.ncols()),
            });
        }
        match cfg.strength_source {
            StrengthSource::DistanceLaplacian if coords.is_none() => {
                return Err(Error::InvalidConfig(
                    "distance-Laplacian strength needs vertex coordinates".into(),
                ));
            }
            StrengthSource::Matrix if coords.is_some() => {
                return Err(Error::InvalidConfig(
                    "coordinates were supplied but the strength source is the matrix itself"
                        .into(),
                ));
            }
            _ => {}
        }

        let mut levels: Vec<Level> = Vec::new();
        let mut stats: Vec<LevelStats> = Vec::new();
        let mut skipped_total = 0usize;
        let mut current = a;
        let mut current_coords = coords;

        loop {
            let n = current.nrows();
            let level_index = levels.len();
            let budget_reached = level_index + 1 >= cfg.max_levels;
            if n <= cfg.coarse_size || budget_reached {
                break;
            }

            // Strength of connection, possibly via the distance Laplacian.
            // The auxiliary matrix shares the operator's pattern, so the
            // mask indexes into either one; aggregation reads connection
            // magnitudes from whichever matrix defined the strength.
            let (mask, agg) = match cfg.strength_source {
                StrengthSource::Matrix => {
                    let mask = classic_strength(&current, cfg.theta)?;
                    let agg = aggregate(&current, &mask)?;
                    (mask, agg)
                }
                StrengthSource::DistanceLaplacian => {
                    let laplacian =
                        distance_laplacian(&current, current_coords.as_ref().unwrap())?;
                    let mask = classic_strength(&laplacian, cfg.theta)?;
                    let agg = aggregate(&laplacian, &mask)?;
                    (mask, agg)
                }
            };
            if agg.num_aggregates() == n {
                // Coarsening stalled: every vertex is its own aggregate and
                // another level would change nothing.
                break;
            }

            let ptent = tentative_prolongator(&agg)?;
            let mut filtered = match cfg.prolongator.lumping {
                LumpingRule::Diagonal => filter_standard(&current, &mask)?,
                LumpingRule::OffDiagonal { tau } => filter_offlmp(&current, &mask, tau)?,
            };
            if cfg.prolongator.sparsify {
                filtered = sprsfy(&current, &filtered, &mask, &agg)?;
            }
            skipped_total += filtered.skipped_rows.len();

            let diag = match cfg.prolongator.diagonal {
                DiagonalChoice::Filtered => diag_standard(&filtered.matrix),
                DiagonalChoice::SafeguardedOneNorm => {
                    safeguard(diag_one_norm(&filtered.matrix), &filtered.matrix)?
                }
            };
            let lambda = match cfg.prolongator.lambda {
                LambdaEstimate::PowerMethod { iterations } => estimate_lambda_max(
                    &filtered.matrix,
                    &diag,
                    iterations,
                    cfg.prolongator.power_seed,
                )?,
                LambdaEstimate::Unit => 1.0,
            };
            if lambda <= 0.0 {
                return Err(Error::NonPositiveEigenvalue {
                    level: level_index,
                    value: lambda,
                });
            }
            let omega = match cfg.prolongator.omega {
                OmegaRule::FourThirds => 4.0 / (3.0 * lambda),
                OmegaRule::Fixed(w) => w,
            };

            let mut p = smooth_prolongator(&filtered.matrix, &diag, &ptent, omega)?;
            let mut constraint_fallbacks = 0;
            if cfg.prolongator.constrain {
                let constrained = constrain_rows(&p, &ptent)?;
                constraint_fallbacks = constrained.fallback_rows.len();
                p = constrained.matrix;
            }

            let coarse = galerkin(&p, &current)?;
            if let Some(ref c) = current_coords {
                current_coords = Some(agg.centroid_coordinates(c)?);
            }

            stats.push(LevelStats {
                n,
                nnz: current.nnz(),
                aggregates: Some(agg.num_aggregates()),
                lambda: Some(lambda),
                skipped_rows: filtered.skipped_rows.len(),
                constraint_fallbacks,
            });
            let smoother = Some(build_smoother(
                &current,
                cfg,
                level_index,
                cfg.prolongator.power_seed,
            )?);
            let pt = p.transpose();
            levels.push(Level {
                a: current,
                p: Some(p),
                pt: Some(pt),
                smoother,
                coarse_solve: None,
            });
            current = coarse;
        }

        // Coarsest level: dense factorization, no smoother.
        stats.push(LevelStats {
            n: current.nrows(),
            nnz: current.nnz(),
            aggregates: None,
            lambda: None,
            skipped_rows: 0,
            constraint_fallbacks: 0,
        });
        let lu = DenseLu::factor_sparse(&current)?;
        levels.push(Level {
            a: current,
            p: None,
            pt: None,
            smoother: None,
            coarse_solve: Some(lu),
        });

        let nnz_fine = levels[0].a.nnz() as f64;
        let operator_complexity =
            levels.iter().map(|l| l.a.nnz() as f64).sum::<f64>() / nnz_fine;

        Ok(Self {
            levels,
            stats,
            operator_complexity,
            skipped_lumping_rows: skipped_total,
        })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Sum of stored entries over all level operators divided by the finest
    /// level's, a proxy for memory and per-cycle cost. Exactly 1 for a
    /// single-level hierarchy.
    pub fn operator_complexity(&self) -> f64 {
        self.operator_complexity
    }

    /// Total rows skipped by off-diagonal lumping across all levels.
    pub fn skipped_lumping_rows(&self) -> usize {
        self.skipped_lumping_rows
    }

    pub fn stats(&self) -> &[LevelStats] {
        self.stats.as_slice()
    }

    /// The operator on `level` (0 is the finest).
    pub fn level_matrix(&self, level: usize) -> &SparseMatrix {
        &self.levels[level].a
    }

    /// Prolongator from `level + 1` up to `level`; `None` on the coarsest.
    pub fn level_prolongator(&self, level: usize) -> Option<&SparseMatrix> {
        self.levels[level].p.as_ref()
    }

    /// One V-cycle from a zero initial guess on the finest level: the
    /// preconditioner application `M^-1 f`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.vcycle(0, vec![0.0; f.len()], f)
    }

    /// Runs one V-cycle starting at `level` with initial guess `u`,
    /// returning the improved iterate.
    ///
    /// Panics if `u` and `f` don't match the level's dimension — the
    /// hierarchy's own recursion always keeps them consistent.
    pub fn vcycle(&self, level: usize, u: Vec<f64>, f: &[f64]) -> Vec<f64> {
        let lvl = &self.levels[level];
        let n = lvl.a.nrows();
        assert_eq!(u.len(), n, "guess length mismatch on level {level}");
        assert_eq!(f.len(), n, "right-hand side length mismatch on level {level}");

        if let Some(ref lu) = lvl.coarse_solve {
            return lu
                .solve(f)
                .expect("coarse factorization was validated during setup");
        }

        let mut u = self.smooth(level, u, f);
        // Restrict the residual.
        let au = lvl.a.spmv(&u).expect("level operator matches its vectors");
        let r: Vec<f64> = f.iter().zip(&au).map(|(fi, ai)| fi - ai).collect();
        let pt = lvl.pt.as_ref().expect("non-coarsest level has a restriction");
        let fc = pt.spmv(&r).expect("restriction matches level dimensions");
        // Coarse-grid correction from a zero coarse guess.
        let uc = self.vcycle(level + 1, vec![0.0; fc.len()], &fc);
        let p = lvl.p.as_ref().expect("non-coarsest level has a prolongator");
        let correction = p.spmv(&uc).expect("prolongation matches level dimensions");
        for (ui, ci) in u.iter_mut().zip(&correction) {
            *ui += ci;
        }
        self.smooth(level, u, f)
    }

    fn smooth(&self, level: usize, u: Vec<f64>, f: &[f64]) -> Vec<f64> {
        let lvl = &self.levels[level];
        match lvl
            .smoother
            .as_ref()
            .expect("non-coarsest level has a smoother")
        {
            SmootherState::Chebyshev {
                diag,
                interval,
                degree,
                sweeps,
            } => {
                let mut u = u;
                for _ in 0..*sweeps {
                    u = chebyshev_apply(&lvl.a, diag, u, f, *degree, *interval)
                        .expect("interval was validated during setup");
                }
                u
            }
            SmootherState::Jacobi { diag, omega } => {
                let mut u = u;
                let au = lvl.a.spmv(&u).expect("level operator matches its vectors");
                for i in 0..u.len() {
                    u[i] += omega * (f[i] - au[i]) / diag[i];
                }
                u
            }
        }
    }
}

/// Builds the relaxation state for one level's operator.
fn build_smoother(
    a: &SparseMatrix,
    cfg: &SetupConfig,
    level: usize,
    seed: u64,
) -> Result<SmootherState> {
    let plain = diag_standard(a);
    if let Some(i) = plain.values.iter().position(|&d| d == 0.0) {
        return Err(Error::ZeroDiagonal(i));
    }
    match cfg.smoother {
        SmootherKind::Jacobi { omega } => Ok(SmootherState::Jacobi {
            diag: plain.values,
            omega,
        }),
        SmootherKind::Chebyshev { degree, sweeps } => {
            // Interval top = dominant eigenvalue of the (scaled) operator
            // from a short power iteration; bottom = a tenth of it.
            let scaled_diag = if cfg.cheby_on_raw_matrix {
                DiagonalApprox {
                    values: vec![1.0; a.nrows()],
                    kind: DiagonalKind::Standard,
                }
            } else {
                plain.clone()
            };
            let lambda_top = estimate_lambda_max(a, &scaled_diag, 10, seed)?;
            if lambda_top <= 0.0 {
                return Err(Error::NonPositiveEigenvalue {
                    level,
                    value: lambda_top,
                });
            }
            Ok(SmootherState::Chebyshev {
                diag: scaled_diag.values,
                interval: (lambda_top / 10.0, lambda_top),
                degree,
                sweeps,
            })
        }
    }
}

/// One Chebyshev polynomial application of the given degree for
/// `A x = f` on the diagonally preconditioned operator, assuming its
/// spectrum lies in `interval`.
///
/// Degree 0 returns `x` unchanged. The interval must satisfy
/// `0 < lower < upper`.
pub fn chebyshev_smoother(
    a: &SparseMatrix,
    x: &[f64],
    f: &[f64],
    degree: usize,
    interval: (f64, f64),
) -> Result<Vec<f64>> {
    let diag = diag_standard(a);
    if let Some(i) = diag.values.iter().position(|&d| d == 0.0) {
        return Err(Error::ZeroDiagonal(i));
    }
    chebyshev_apply(a, &diag.values, x.to_vec(), f, degree, interval)
}

/// Classical three-term Chebyshev recurrence; `diag` is the
/// preconditioning diagonal (ones to run on the raw operator).
fn chebyshev_apply(
    a: &SparseMatrix,
    diag: &[f64],
    mut x: Vec<f64>,
    f: &[f64],
    degree: usize,
    (lower, upper): (f64, f64),
) -> Result<Vec<f64>> {
    if !(lower > 0.0) || !(upper > lower) {
        return Err(Error::InvalidInterval { lower, upper });
    }
    if x.len() != a.nrows() || f.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            op: "chebyshev_smoother",
            details: format!(
                "operator has {} rows, got x of {} and f of {}",
                a.nrows(),
                x.len(),
                f.len()
            ),
        });
    }
    if degree == 0 {
        return Ok(x);
    }

    let center = 0.5 * (upper + lower);
    let half_width = 0.5 * (upper - lower);
    let sigma = center / half_width;
    let mut rho = 1.0 / sigma;

    // d0 = z0 / center with z the preconditioned residual.
    let au = a.spmv(&x)?;
    let mut d: Vec<f64> = (0..x.len())
        .map(|i| (f[i] - au[i]) / diag[i] / center)
        .collect();

    for step in 0..degree {
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi += di;
        }
        if step + 1 == degree {
            break;
        }
        let au = a.spmv(&x)?;
        let rho_next = 1.0 / (2.0 * sigma - rho);
        for i in 0..d.len() {
            let z = (f[i] - au[i]) / diag[i];
            d[i] = rho_next * rho * d[i] + 2.0 * rho_next / half_width * z;
        }
        rho = rho_next;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::XorShift64Star;

    fn poisson_1d(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    fn poisson_2d(m: usize) -> SparseMatrix {
        let idx = |x: usize, y: usize| y + m * x;
        let n = m * m;
        let mut t = Vec::new();
        for x in 0..m {
            for y in 0..m {
                let i = idx(x, y);
                t.push((i, i, 4.0));
                if x > 0 {
                    t.push((i, idx(x - 1, y), -1.0));
                }
                if x + 1 < m {
                    t.push((i, idx(x + 1, y), -1.0));
                }
                if y > 0 {
                    t.push((i, idx(x, y - 1), -1.0));
                }
                if y + 1 < m {
                    t.push((i, idx(x, y + 1), -1.0));
                }
            }
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn residual_norm(a: &SparseMatrix, u: &[f64], f: &[f64]) -> f64 {
        let au = a.spmv(u).unwrap();
        norm(&f.iter().zip(&au).map(|(x, y)| x - y).collect::<Vec<_>>())
    }

    #[test]
    fn small_matrix_yields_single_level_direct_solve() {
        let a = poisson_1d(8);
        let cfg = SetupConfig {
            coarse_size: 10,
            ..Default::default()
        };
        let h = Hierarchy::setup(a.clone(), None, &cfg).unwrap();
        assert_eq!(h.num_levels(), 1);
        assert_eq!(h.operator_complexity(), 1.0);
        let f: Vec<f64> = (0..8).map(|i| (i as f64).sin() + 1.0).collect();
        let u = h.apply(&f);
        assert!(residual_norm(&a, &u, &f) <= 1e-10 * norm(&f));
    }

    #[test]
    fn poisson_chain_coarsens_with_sane_complexity() {
        let a = poisson_1d(100);
        let cfg = SetupConfig {
            theta: 0.0,
            coarse_size: 10,
            ..Default::default()
        };
        let h = Hierarchy::setup(a, None, &cfg).unwrap();
        assert!(h.num_levels() >= 2, "expected real coarsening");
        assert!(h.operator_complexity() > 1.0 && h.operator_complexity() < 2.0);
        // Coarse operators stay symmetric.
        for l in 1..h.num_levels() {
            let c = h.level_matrix(l);
            let d = c.to_dense();
            let n = c.nrows();
            for i in 0..n {
                for j in 0..n {
                    let diff = (d[i * n + j] - d[j * n + i]).abs();
                    assert!(diff <= 1e-12 * (1.0 + d[i * n + j].abs()));
                }
            }
        }
    }

    #[test]
    fn galerkin_chain_matches_dense_oracle() {
        let a = poisson_2d(12); // 144 unknowns
        let cfg = SetupConfig {
            theta: 0.0,
            coarse_size: 8,
            ..Default::default()
        };
        let h = Hierarchy::setup(a, None, &cfg).unwrap();
        for l in 0..h.num_levels() - 1 {
            let fine = h.level_matrix(l);
            if fine.nrows() > 200 {
                continue;
            }
            let p = h.level_prolongator(l).unwrap();
            let n = fine.nrows();
            let nc = p.ncols();
            let fd = fine.to_dense();
            let pd = p.to_dense();
            // Dense P' A P.
            let mut ap = vec![0.0; n * nc];
            for i in 0..n {
                for k in 0..n {
                    let v = fd[i * n + k];
                    if v != 0.0 {
                        for j in 0..nc {
                            ap[i * nc + j] += v * pd[k * nc + j];
                        }
                    }
                }
            }
            let mut expect = vec![0.0; nc * nc];
            for i in 0..n {
                for j in 0..nc {
                    let v = pd[i * nc + j];
                    if v != 0.0 {
                        for k in 0..nc {
                            expect[j * nc + k] += v * ap[i * nc + k];
                        }
                    }
                }
            }
            let got = h.level_matrix(l + 1).to_dense();
            for (g, e) in got.iter().zip(&expect) {
                assert!((g - e).abs() <= 1e-11 * (1.0 + e.abs()), "{g} vs {e}");
            }
        }
    }

    #[test]
    fn vcycle_contracts_error_on_homogeneous_problem() {
        let a = poisson_1d(64);
        let cfg = SetupConfig {
            theta: 0.0,
            coarse_size: 8,
            max_levels: 3,
            ..Default::default()
        };
        let h = Hierarchy::setup(a.clone(), None, &cfg).unwrap();
        let mut rng = XorShift64Star::new(5);
        let mut u: Vec<f64> = (0..64).map(|_| rng.next_centered()).collect();
        let f = vec![0.0; 64];
        let mut last = norm(&u);
        for cycle in 0..5 {
            u = h.vcycle(0, u, &f);
            let now = norm(&u);
            assert!(now < last, "cycle {cycle}: error grew from {last} to {now}");
            last = now;
        }
    }

    #[test]
    fn repeated_vcycles_solve_known_solution() {
        let a = poisson_2d(12);
        let cfg = SetupConfig {
            theta: 0.0,
            coarse_size: 12,
            ..Default::default()
        };
        let h = Hierarchy::setup(a.clone(), None, &cfg).unwrap();
        let ones = vec![1.0; a.nrows()];
        let f = a.spmv(&ones).unwrap();
        let mut u = vec![0.0; a.nrows()];
        for _ in 0..60 {
            u = h.vcycle(0, u, &f);
            if residual_norm(&a, &u, &f) <= 1e-8 * norm(&f) {
                break;
            }
        }
        assert!(residual_norm(&a, &u, &f) <= 1e-8 * norm(&f));
        let err: Vec<f64> = u.iter().map(|v| v - 1.0).collect();
        assert!(norm(&err) <= 1e-6);
    }

    #[test]
    fn stalled_coarsening_falls_back_to_direct_solve() {
        // Purely diagonal operator: everything is weak, every vertex is its
        // own aggregate, and another level would be pointless.
        let n = 30;
        let t: Vec<_> = (0..n).map(|i| (i, i, 2.0 + i as f64)).collect();
        let a = SparseMatrix::from_triplets(n, n, &t).unwrap();
        let cfg = SetupConfig {
            theta: 0.5,
            coarse_size: 5,
            ..Default::default()
        };
        let h = Hierarchy::setup(a.clone(), None, &cfg).unwrap();
        assert_eq!(h.num_levels(), 1);
        let f: Vec<f64> = (0..n).map(|i| i as f64 + 1.0).collect();
        let u = h.apply(&f);
        assert!(residual_norm(&a, &u, &f) <= 1e-10 * norm(&f));
    }

    #[test]
    fn max_levels_caps_the_hierarchy() {
        let a = poisson_1d(200);
        let cfg = SetupConfig {
            theta: 0.0,
            coarse_size: 2,
            max_levels: 2,
            ..Default::default()
        };
        let h = Hierarchy::setup(a, None, &cfg).unwrap();
        assert_eq!(h.num_levels(), 2);
        // The coarsest level is dense-solved even though it is bigger than
        // coarse_size; stats must agree with the structure.
        assert_eq!(h.stats().len(), 2);
        assert!(h.stats()[1].n > 2);
    }

    #[test]
    fn dominant_negative_mode_is_reported_as_setup_failure() {
        // 4 I - 3 J on three vertices: eigenvalues {4, 4, -5} with unit
        // diagonal, so the power method finds -5 and the damping weight
        // would flip sign — the exact breakdown the typed failure reports.
        let mut t = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                t.push((i, j, if i == j { 1.0 } else { -3.0 }));
            }
        }
        let a = SparseMatrix::from_triplets(3, 3, &t).unwrap();
        let cfg = SetupConfig {
            theta: 0.0,
            coarse_size: 1,
            ..Default::default()
        };
        match Hierarchy::setup(a, None, &cfg) {
            Err(Error::NonPositiveEigenvalue { level: 0, value }) => {
                assert!(value < 0.0, "estimate should be negative, got {value}");
                assert!((value - (-5.0)).abs() < 0.5, "estimate {value} far from -5");
            }
            other => panic!("expected NonPositiveEigenvalue, got {other:?}"),
        }
    }

    #[test]
    fn safeguarded_diagonal_survives_negative_filtered_diagonal() {
        // Star graph whose weak couplings overwhelm the center diagonal when
        // folded: center (diag 1) keeps one strong +6 coupling and loses
        // three -0.9 ones, so the filtered diagonal entry drops to -1.7. The
        // plain filtered diagonal then has mixed signs and its eigenvalue
        // estimate is untrustworthy; the safeguarded 1-norm diagonal stays
        // positive and keeps the estimate inside (0, 1].
        let mut t = vec![(0, 0, 1.0), (0, 1, 6.0), (1, 0, 6.0)];
        for j in 1..5 {
            t.push((j, j, 16.0));
        }
        for j in 2..5 {
            t.push((0, j, -0.9));
            t.push((j, 0, -0.9));
        }
        let a = SparseMatrix::from_triplets(5, 5, &t).unwrap();

        // Premise check: magnitude dropping really does push the center's
        // filtered diagonal negative at this threshold.
        let mask = crate::strength::classic_strength(&a, 0.25).unwrap();
        let filtered = crate::filtering::filter_standard(&a, &mask).unwrap();
        let (cols, vals) = filtered.matrix.row(0);
        assert!(vals[cols.iter().position(|&c| c == 0).unwrap()] < 0.0);

        let cfg = SetupConfig {
            theta: 0.25,
            coarse_size: 4,
            prolongator: ProlongatorConfig {
                diagonal: DiagonalChoice::SafeguardedOneNorm,
                ..Default::default()
            },
            ..Default::default()
        };
        let h = Hierarchy::setup(a, None, &cfg).unwrap();
        assert!(h.num_levels() >= 2);
        let lambda = h.stats()[0].lambda.unwrap();
        assert!(lambda > 0.0 && lambda <= 1.0 + 1e-12);
    }

    #[test]
    fn distance_strength_requires_coordinates_and_vice_versa() {
        let a = poisson_1d(20);
        let cfg = SetupConfig {
            strength_source: StrengthSource::DistanceLaplacian,
            coarse_size: 4,
            ..Default::default()
        };
        assert!(Hierarchy::setup(a.clone(), None, &cfg).is_err());
        let coords = Coordinates::new(1, (0..20).map(|i| i as f64).collect()).unwrap();
        let cfg2 = SetupConfig {
            coarse_size: 4,
            ..Default::default()
        };
        assert!(Hierarchy::setup(a, Some(coords), &cfg2).is_err());
    }

    #[test]
    fn distance_strength_builds_and_propagates_centroids() {
        let a = poisson_1d(40);
        let coords = Coordinates::new(1, (0..40).map(|i| i as f64 * 0.5).collect()).unwrap();
        let cfg = SetupConfig {
            theta: 0.025,
            strength_source: StrengthSource::DistanceLaplacian,
            coarse_size: 4,
            ..Default::default()
        };
        let h = Hierarchy::setup(a.clone(), Some(coords), &cfg).unwrap();
        assert!(h.num_levels() >= 2);
        let f = a.spmv(&vec![1.0; 40]).unwrap();
        let mut u = vec![0.0; 40];
        for _ in 0..40 {
            u = h.vcycle(0, u, &f);
        }
        assert!(residual_norm(&a, &u, &f) <= 1e-8 * norm(&f));
    }

    #[test]
    fn chebyshev_degree_zero_is_identity() {
        let a = poisson_1d(10);
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let f = vec![1.0; 10];
        let out = chebyshev_smoother(&a, &x, &f, 0, (0.1, 1.0)).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn chebyshev_rejects_bad_intervals() {
        let a = poisson_1d(4);
        let x = vec![0.0; 4];
        let f = vec![1.0; 4];
        for bad in [(0.0, 1.0), (-0.5, 1.0), (1.0, 1.0), (2.0, 1.0)] {
            match chebyshev_smoother(&a, &x, &f, 2, bad) {
                Err(Error::InvalidInterval { .. }) => {}
                other => panic!("interval {bad:?}: expected InvalidInterval, got {other:?}"),
            }
        }
    }

    #[test]
    fn chebyshev_error_factor_matches_analytic_value_on_identity() {
        // On A = I with interval [0.1, 1], the error after one degree-k
        // application shrinks by exactly the Chebyshev growth factor
        // T_k(11/9): the eigenvalue sits at the interval's upper endpoint
        // where the shifted polynomial equals ±1.
        let n = 6;
        let a = SparseMatrix::identity(n);
        let f: Vec<f64> = (0..n).map(|i| (i as f64) - 2.0).collect();
        let mut rng = XorShift64Star::new(3);
        let x0: Vec<f64> = (0..n).map(|_| rng.next_centered()).collect();
        let e0 = norm(&f.iter().zip(&x0).map(|(a, b)| a - b).collect::<Vec<_>>());
        let arg: f64 = 11.0 / 9.0;
        for degree in 1..=6 {
            let out = chebyshev_smoother(&a, &x0, &f, degree, (0.1, 1.0)).unwrap();
            let e = norm(&f.iter().zip(&out).map(|(a, b)| a - b).collect::<Vec<_>>());
            let t_k = ((degree as f64) * arg.acosh()).cosh();
            assert!(
                (e * t_k - e0).abs() <= 1e-9 * e0,
                "degree {degree}: error {e}, growth factor {t_k}, start {e0}"
            );
        }
    }

    #[test]
    fn chebyshev_high_degree_solves_identity_in_one_application() {
        let n = 9;
        let a = SparseMatrix::identity(n);
        let f: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).cos()).collect();
        let x = vec![0.0; n];
        let out = chebyshev_smoother(&a, &x, &f, 50, (0.1, 1.0)).unwrap();
        for (o, fi) in out.iter().zip(&f) {
            assert!((o - fi).abs() <= 1e-12, "{o} vs {fi}");
        }
    }

    #[test]
    fn chebyshev_never_amplifies_the_residual() {
        let a = poisson_1d(32);
        // Spectrum of D^-1 A lies in (0, 2).
        let interval = (0.2, 2.0);
        let mut rng = XorShift64Star::new(11);
        for _ in 0..10 {
            let x: Vec<f64> = (0..32).map(|_| rng.next_centered()).collect();
            let f = vec![0.0; 32];
            let r0 = residual_norm(&a, &x, &f);
            let out = chebyshev_smoother(&a, &x, &f, 2, interval).unwrap();
            let r1 = residual_norm(&a, &out, &f);
            assert!(r1 <= r0 * (1.0 + 1e-12), "residual grew: {r0} -> {r1}");
        }
    }

    #[test]
    fn jacobi_smoother_contracts_on_diagonally_dominant_systems() {
        let a = poisson_1d(50);
        let cfg = SetupConfig {
            theta: 0.0,
            coarse_size: 8,
            smoother: SmootherKind::Jacobi { omega: 0.7 },
            ..Default::default()
        };
        let h = Hierarchy::setup(a.clone(), None, &cfg).unwrap();
        let ones = vec![1.0; 50];
        let f = a.spmv(&ones).unwrap();
        let mut u = vec![0.0; 50];
        let mut last = residual_norm(&a, &u, &f);
        for _ in 0..30 {
            u = h.vcycle(0, u, &f);
            let now = residual_norm(&a, &u, &f);
            assert!(now <= last * (1.0 + 1e-12));
            last = now;
        }
        assert!(last <= 1e-7 * norm(&f));
    }

    #[test]
    fn config_validation_rejects_degenerate_budgets() {
        let a = poisson_1d(10);
        let bad_coarse = SetupConfig {
            coarse_size: 0,
            ..Default::default()
        };
        assert!(Hierarchy::setup(a.clone(), None, &bad_coarse).is_err());
        let bad_levels = SetupConfig {
            max_levels: 1,
            ..Default::default()
        };
        assert!(Hierarchy::setup(a.clone(), None, &bad_levels).is_err());
        let bad_jacobi = SetupConfig {
            smoother: SmootherKind::Jacobi { omega: 0.0 },
            ..Default::default()
        };
        assert!(Hierarchy::setup(a, None, &bad_jacobi).is_err());
    }

    #[test]
    fn raw_matrix_chebyshev_knob_changes_the_interval_but_still_works() {
        // With the knob on, the interval comes from the raw operator, whose
        // top eigenvalue for this chain is just under 4.
        let a = poisson_1d(40);
        let cfg = SetupConfig {
            theta: 0.0,
            coarse_size: 8,
            cheby_on_raw_matrix: true,
            ..Default::default()
        };
        let h = Hierarchy::setup(a.clone(), None, &cfg).unwrap();
        let ones = vec![1.0; 40];
        let f = a.spmv(&ones).unwrap();
        let mut u = vec![0.0; 40];
        for _ in 0..40 {
            u = h.vcycle(0, u, &f);
        }
        assert!(residual_norm(&a, &u, &f) <= 1e-8 * norm(&f));
    }
}
