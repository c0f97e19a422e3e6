//! Crate-wide error type.
//!
//! Setup failures that the solver is expected to survive (most prominently a
//! non-positive eigenvalue estimate during prolongator smoothing) are typed
//! variants so drivers can map them to diagnostics and exit codes instead of
//! panicking.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes are incompatible for the requested operation.
    #[error("dimension mismatch in {op}: {details}")]
    DimensionMismatch { op: &'static str, details: String },

    /// A CSR constructor was handed structurally invalid data.
    #[error("invalid matrix structure: {0}")]
    InvalidMatrix(String),

    /// A configuration value is out of range or inconsistent.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Matrix Market parse failure.
    #[error("matrix market: {0}")]
    MatrixMarket(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Two vertices that share a stored off-diagonal entry have identical
    /// coordinates, so the distance-based auxiliary operator is undefined.
    #[error("coincident coordinates for connected vertices {i} and {j}")]
    CoincidentCoordinates { i: usize, j: usize },

    /// A row needs a stored diagonal entry for the requested operation.
    #[error("row {0} has off-diagonal entries but no stored diagonal")]
    MissingDiagonal(usize),

    /// A diagonal approximation contains a zero entry where an inverse is
    /// required.
    #[error("zero diagonal entry at row {0}")]
    ZeroDiagonal(usize),

    /// A vertex was left out of every aggregate; the tentative prolongator
    /// would have an empty row.
    #[error("vertex {0} is not covered by any aggregate")]
    UncoveredVertex(usize),

    /// The eigenvalue estimate driving the prolongator smoother came out
    /// non-positive, so no damping factor exists. This is the documented
    /// failure mode of the traditional diagonal on difficult meshes.
    #[error("non-positive eigenvalue estimate {value:.6e} at level {level}")]
    NonPositiveEigenvalue { level: usize, value: f64 },

    /// The coarsest-level factorization hit a (numerically) singular pivot.
    #[error("singular coarse operator: zero pivot at elimination step {0}")]
    SingularCoarseOperator(usize),

    /// A smoothing interval or related spectral bound is empty or inverted.
    #[error("invalid spectral interval [{lower:.6e}, {upper:.6e}]")]
    InvalidInterval { lower: f64, upper: f64 },
}
