//! Smoothed-aggregation algebraic multigrid (SA-AMG) with prolongator
//! smoothing that stays robust when the fine operator carries large positive
//! off-diagonal entries (strongly anisotropic meshes, reaction terms, ...).
//!
//! The classical smoothed prolongator `P = (I - omega * D^-1 * Abar) * Pt`
//! breaks down when the filtered operator `Abar` loses diagonal dominance:
//! the eigenvalue estimate used for `omega` can come out negative and setup
//! fails outright. This crate implements that traditional path together with
//! four independent countermeasures that can be toggled per run:
//!
//! * **OneNorm** — replace the diagonal of `Abar` by its row-wise 1-norm
//!   (plus a safeguard for pathological rows), which bounds the spectrum of
//!   the smoothing operator by construction ([`filtering::diag_one_norm`],
//!   [`filtering::safeguard`]).
//! * **OffLmp** — an alternative lumping rule for dropped entries that keeps
//!   filtered diagonals positive while preserving row sums
//!   ([`filtering::filter_offlmp`]).
//! * **Cnstrnt** — post-smoothing row constraints that clamp prolongator
//!   entries into `[0, 1]` without changing row sums
//!   ([`prolongator::constrain_rows`]).
//! * **Sprsfy** — post-aggregation sparsification that prunes isolated
//!   cross-aggregate couplings before smoothing, reducing coarse-operator
//!   fill ([`filtering::sprsfy`]).
//!
//! The building blocks are exposed directly (CSR kernels, strength-of-
//! connection, greedy aggregation, filtering/lumping, prolongator smoothing,
//! V-cycle hierarchy, PCG/GMRES drivers, and hexahedral FEM problem
//! generators) so each stage can be tested and driven in isolation. The
//! `samg` binary in the companion CLI crate wires them into a benchmark
//! harness.

pub mod aggregation;
pub mod dense;
pub mod error;
pub mod filtering;
pub mod hierarchy;
pub mod krylov;
pub mod problems;
pub mod prolongator;
pub mod rng;
pub mod sparse;
pub mod strength;

pub use error::{Error, Result};
pub use sparse::SparseMatrix;
