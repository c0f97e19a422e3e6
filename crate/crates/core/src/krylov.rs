//! Outer Krylov solvers wrapping a multigrid preconditioner.
//!
//! Two drivers are provided: preconditioned conjugate gradients for SPD
//! systems and restarted right-preconditioned GMRES for general ones. Both
//! start from a zero initial guess, apply one V-cycle per preconditioner
//! invocation, and record the residual norm at every iteration so reports
//! can be compared across variant configurations. Right preconditioning is
//! used for GMRES so its recorded residuals are true residuals, directly
//! comparable with the conjugate-gradient history.

use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::sparse::SparseMatrix;

/// Outer solver selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KrylovMethod {
    /// Preconditioned conjugate gradients.
    Pcg,
    /// Restarted right-preconditioned GMRES.
    Gmres {
        /// Maximum Krylov subspace dimension per restart cycle.
        restart: usize,
    },
}

/// Outer solver configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovConfig {
    pub method: KrylovMethod,
    /// Relative residual reduction target.
    pub rel_tol: f64,
    /// Iteration cap across all restart cycles.
    pub max_iters: usize,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        KrylovConfig {
            method: KrylovMethod::Pcg,
            rel_tol: 1e-10,
            max_iters: 500,
        }
    }
}

impl KrylovConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !self.rel_tol.is_finite() {
            return Err(Error::InvalidConfig(
                "rel_tol must be positive and finite".into(),
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if let KrylovMethod::Gmres { restart } = self.method {
            if restart == 0 {
                return Err(Error::InvalidConfig("restart must be at least 1".into()));
            }
        }
        Ok(())
    }
}

/// Why a solve stopped without a usable answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveFailure {
    /// Hierarchy construction failed before any iteration ran.
    Setup(String),
    /// The iteration hit a state it cannot continue from, e.g. a
    /// non-positive curvature direction in conjugate gradients.
    Breakdown(String),
    /// A full restart cycle made no measurable progress.
    Stagnation(String),
}

/// Outcome of one outer solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Index of the first residual-history entry meeting the tolerance, or
    /// the number of iterations performed when the solve did not converge.
    pub iterations: usize,
    /// Residual norms; entry 0 is the initial residual, one entry per
    /// iteration afterwards.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    /// Sum of operator nonzeros across levels over fine-level nonzeros.
    pub operator_complexity: f64,
    pub failure: Option<SolveFailure>,
    /// Rows where alternative lumping fell back to plain filtering.
    pub skipped_lumping_rows: usize,
    /// Final iterate (empty for setup failures).
    pub solution: Vec<f64>,
}

impl SolveReport {
    /// Wraps a hierarchy-construction error in a report, so callers that
    /// batch many runs can treat setup failures as data rather than bailing.
    pub fn setup_failure(err: &Error) -> Self {
        SolveReport {
            iterations: 0,
            residual_history: Vec::new(),
            converged: false,
            operator_complexity: 0.0,
            failure: Some(SolveFailure::Setup(err.to_string())),
            skipped_lumping_rows: 0,
            solution: Vec::new(),
        }
    }
}

/// Approximate inverse applied once per outer iteration.
pub trait Preconditioner {
    /// Applies the approximate inverse to a residual.
    fn precondition(&self, r: &[f64]) -> Vec<f64>;
    /// Operator complexity to surface in reports.
    fn operator_complexity(&self) -> f64 {
        1.0
    }
    /// Lumping fallback rows to surface in reports.
    fn skipped_lumping_rows(&self) -> usize {
        0
    }
}

/// No-op preconditioner, turning the drivers into plain CG / GMRES.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn precondition(&self, r: &[f64]) -> Vec<f64> {
        r.to_vec()
    }
}

impl Preconditioner for Hierarchy {
    fn precondition(&self, r: &[f64]) -> Vec<f64> {
        self.apply(r)
    }

    fn operator_complexity(&self) -> f64 {
        Hierarchy::operator_complexity(self)
    }

    fn skipped_lumping_rows(&self) -> usize {
        Hierarchy::skipped_lumping_rows(self)
    }
}

/// Dispatches to the solver named by `cfg.method`.
pub fn solve<M: Preconditioner>(
    a: &SparseMatrix,
    f: &[f64],
    m: &M,
    cfg: &KrylovConfig,
) -> Result<SolveReport> {
    match cfg.method {
        KrylovMethod::Pcg => pcg(a, f, m, cfg),
        KrylovMethod::Gmres { .. } => gmres(a, f, m, cfg),
    }
}

fn check_system(a: &SparseMatrix, f: &[f64], cfg: &KrylovConfig) -> Result<()> {
    cfg.validate()?;
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            op: "krylov solve",
            details: format!("matrix is {}x{}, must be square", a.nrows(), a.ncols()),
        });
    }
    if f.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            op: "krylov solve",
            details: format!(
                "right-hand side has {} entries, matrix has {} rows",
                f.len(),
                a.nrows()
            ),
        });
    }
    Ok(())
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Preconditioned conjugate gradients from a zero initial guess.
///
/// Stops once the residual norm falls to `rel_tol` times its initial value.
/// A direction of non-positive curvature stops the solve with a breakdown
/// diagnostic; it signals an indefinite operator or preconditioner rather
/// than a programming error, so it is reported, not returned as `Err`.
pub fn pcg<M: Preconditioner>(
    a: &SparseMatrix,
    f: &[f64],
    m: &M,
    cfg: &KrylovConfig,
) -> Result<SolveReport> {
    check_system(a, f, cfg)?;
    let n = f.len();
    let mut x = vec![0.0; n];
    let mut r = f.to_vec();
    let r0 = norm(&r);
    let mut history = vec![r0];
    let report = |converged: bool, failure, history: Vec<f64>, x: Vec<f64>| SolveReport {
        iterations: history.len() - 1,
        converged,
        residual_history: history,
        operator_complexity: m.operator_complexity(),
        failure,
        skipped_lumping_rows: m.skipped_lumping_rows(),
        solution: x,
    };
    if r0 == 0.0 {
        return Ok(report(true, None, history, x));
    }
    let target = cfg.rel_tol * r0;
    let mut z = m.precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..cfg.max_iters {
        let ap = a.spmv(&p)?;
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            let failure = SolveFailure::Breakdown(format!(
                "non-positive curvature p'Ap = {pap:.3e}; operator or preconditioner is not positive definite"
            ));
            return Ok(report(false, Some(failure), history, x));
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rn = norm(&r);
        history.push(rn);
        if rn <= target {
            return Ok(report(true, None, history, x));
        }
        z = m.precondition(&r);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Ok(report(false, None, history, x))
}

/// Restarted GMRES with right preconditioning, from a zero initial guess.
///
/// Right preconditioning keeps the least-squares residual equal to the true
/// residual of the original system, so the recorded history is directly
/// comparable with the conjugate-gradient one. The true residual is
/// recomputed from the updated iterate at every restart boundary, guarding
/// against drift in the recursively updated estimate. An exact Arnoldi
/// breakdown means the solution lies in the current subspace; the iterate is
/// assembled and checked against the tolerance like any other cycle end.
pub fn gmres<M: Preconditioner>(
    a: &SparseMatrix,
    f: &[f64],
    m: &M,
    cfg: &KrylovConfig,
) -> Result<SolveReport> {
    check_system(a, f, cfg)?;
    let restart = match cfg.method {
        KrylovMethod::Gmres { restart } => restart,
        KrylovMethod::Pcg => f.len().max(1),
    };
    let n = f.len();
    let mut x = vec![0.0; n];
    let mut r = f.to_vec();
    let r0 = norm(&r);
    let mut history = vec![r0];
    let finish = |converged: bool, failure, history: Vec<f64>, x: Vec<f64>| SolveReport {
        iterations: history.len() - 1,
        converged,
        residual_history: history,
        operator_complexity: m.operator_complexity(),
        failure,
        skipped_lumping_rows: m.skipped_lumping_rows(),
        solution: x,
    };
    if r0 == 0.0 {
        return Ok(finish(true, None, history, x));
    }
    let target = cfg.rel_tol * r0;
    let mut iters = 0;
    while iters < cfg.max_iters {
        let beta = norm(&r);
        if beta == 0.0 {
            return Ok(finish(true, None, history, x));
        }
        // Arnoldi basis of the preconditioned operator, its preconditioned
        // images (for assembling the update), and the rotated Hessenberg
        // columns of the least-squares system.
        let mut basis = vec![r.iter().map(|v| v / beta).collect::<Vec<f64>>()];
        let mut images: Vec<Vec<f64>> = Vec::new();
        let mut columns: Vec<Vec<f64>> = Vec::new();
        let mut rotations: Vec<(f64, f64)> = Vec::new();
        let mut g = vec![beta];
        let mut broke_down = false;
        while columns.len() < restart && iters < cfg.max_iters {
            let j = columns.len();
            let z = m.precondition(&basis[j]);
            let mut w = a.spmv(&z)?;
            images.push(z);
            let mut col = Vec::with_capacity(j + 2);
            for v in basis.iter() {
                let h = dot(&w, v);
                axpy(-h, v, &mut w);
                col.push(h);
            }
            let h_next = norm(&w);
            col.push(h_next);
            for (i, &(c, s)) in rotations.iter().enumerate() {
                let hi = c * col[i] + s * col[i + 1];
                col[i + 1] = -s * col[i] + c * col[i + 1];
                col[i] = hi;
            }
            let (c, s) = givens(col[j], col[j + 1]);
            col[j] = c * col[j] + s * col[j + 1];
            col[j + 1] = 0.0;
            rotations.push((c, s));
            g.push(-s * g[j]);
            g[j] *= c;
            columns.push(col);
            iters += 1;
            let estimate = g[j + 1].abs();
            history.push(estimate);
            if h_next == 0.0 {
                broke_down = true;
                break;
            }
            basis.push(w.iter().map(|v| v / h_next).collect());
            if estimate <= target {
                break;
            }
        }
        // Assemble the iterate from this cycle and re-measure the residual.
        let k = columns.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut sum = g[i];
            for l in (i + 1)..k {
                sum -= columns[l][i] * y[l];
            }
            y[i] = sum / columns[i][i];
        }
        for (yi, zi) in y.iter().zip(&images) {
            axpy(*yi, zi, &mut x);
        }
        let ax = a.spmv(&x)?;
        r = f.iter().zip(&ax).map(|(fi, ai)| fi - ai).collect();
        let true_norm = norm(&r);
        *history.last_mut().unwrap() = true_norm;
        if true_norm <= target {
            return Ok(finish(true, None, history, x));
        }
        if broke_down {
            let failure = SolveFailure::Breakdown(format!(
                "Arnoldi breakdown with residual {true_norm:.3e} above tolerance; system may be singular"
            ));
            return Ok(finish(false, Some(failure), history, x));
        }
        if true_norm >= beta * (1.0 - 1e-14) && k == restart {
            let failure = SolveFailure::Stagnation(format!(
                "restart cycle left the residual at {true_norm:.3e}"
            ));
            return Ok(finish(false, Some(failure), history, x));
        }
    }
    Ok(finish(false, None, history, x))
}

/// Givens rotation (c, s) with c·a + s·b = r and -s·a + c·b = 0.
fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}
