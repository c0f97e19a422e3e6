//! Greedy aggregation of the strong-connection graph.
//!
//! Aggregates are built in three deterministic phases over ascending vertex
//! indices:
//!
//! 1. **Root sweep.** A vertex with at least one strong neighbor becomes a
//!    root when neither it nor any of its strong neighbors has been
//!    aggregated yet; the new aggregate is the root plus all of its strong
//!    neighbors. Vertices with no strong connections at all are left for
//!    phase 3 so they cannot soak up root slots.
//! 2. **Leftover attachment.** Each remaining vertex with strong neighbors
//!    joins the aggregate reached through its largest-magnitude strong
//!    connection whose endpoint is already assigned (ties broken toward the
//!    lowest aggregate id). The running assignment is consulted, so a
//!    leftover attached earlier in the sweep is a valid target.
//! 3. **Singletons.** Anything still unassigned (isolated vertices) becomes
//!    its own aggregate with itself as root.
//!
//! This greedy policy is one of several reasonable realizations of
//! root-plus-neighborhood aggregation; coarse-grid quality depends only
//! mildly on the variant, but the exact output here is pinned by tests since
//! downstream stages (sparsification in particular) reason about roots.

use std::io::Write;

use crate::error::{Error, Result};
use crate::sparse::{CsrBuilder, SparseMatrix};
use crate::strength::{Coordinates, StrengthMask};

const UNASSIGNED: usize = usize::MAX;

/// A complete disjoint cover of the vertices, with one root per aggregate.
#[derive(Debug, Clone)]
pub struct Aggregation {
    vertex_to_aggregate: Vec<usize>,
    roots: Vec<usize>,
}

impl Aggregation {
    /// Builds an aggregation from an explicit vertex→aggregate map and root
    /// list. Entries equal to `usize::MAX` mark uncovered vertices; they are
    /// accepted here so error paths can be exercised, but
    /// [`tentative_prolongator`] will reject them.
    pub fn from_map(vertex_to_aggregate: Vec<usize>, roots: Vec<usize>) -> Result<Self> {
        let num_aggregates = roots.len();
        for (v, &a) in vertex_to_aggregate.iter().enumerate() {
            if a != UNASSIGNED && a >= num_aggregates {
                return Err(Error::InvalidConfig(format!(
                    "vertex {v} assigned to aggregate {a}, only {num_aggregates} exist"
                )));
            }
        }
        for (id, &r) in roots.iter().enumerate() {
            if r >= vertex_to_aggregate.len() || vertex_to_aggregate[r] != id {
                return Err(Error::InvalidConfig(format!(
                    "root {r} of aggregate {id} is not a member of it"
                )));
            }
        }
        Ok(Self {
            vertex_to_aggregate,
            roots,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertex_to_aggregate.len()
    }

    pub fn num_aggregates(&self) -> usize {
        self.roots.len()
    }

    /// Aggregate id of vertex `v`, or `None` for an uncovered vertex (only
    /// possible for hand-built maps).
    pub fn aggregate_of(&self, v: usize) -> Option<usize> {
        match self.vertex_to_aggregate[v] {
            UNASSIGNED => None,
            a => Some(a),
        }
    }

    /// Root vertex of aggregate `id`.
    pub fn root_of(&self, id: usize) -> usize {
        self.roots[id]
    }

    pub fn is_root(&self, v: usize) -> bool {
        match self.aggregate_of(v) {
            Some(id) => self.roots[id] == v,
            None => false,
        }
    }

    /// Member lists per aggregate, each ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_aggregates()];
        for (v, &a) in self.vertex_to_aggregate.iter().enumerate() {
            if a != UNASSIGNED {
                out[a].push(v);
            }
        }
        out
    }

    /// Mean of member coordinates per aggregate; the coarse-level vertex
    /// positions when strength is computed geometrically.
    pub fn centroid_coordinates(&self, coords: &Coordinates) -> Result<Coordinates> {
        if coords.len() != self.num_vertices() {
            return Err(Error::DimensionMismatch {
                op: "centroid_coordinates",
                details: format!(
                    "{} vertices but {} coordinate rows",
                    self.num_vertices(),
                    coords.len()
                ),
            });
        }
        let dim = coords.dim();
        let mut sums = vec![0.0; self.num_aggregates() * dim];
        let mut counts = vec![0usize; self.num_aggregates()];
        for (v, &a) in self.vertex_to_aggregate.iter().enumerate() {
            if a == UNASSIGNED {
                return Err(Error::UncoveredVertex(v));
            }
            counts[a] += 1;
            for (d, &x) in coords.point(v).iter().enumerate() {
                sums[a * dim + d] += x;
            }
        }
        for (a, &c) in counts.iter().enumerate() {
            for d in 0..dim {
                sums[a * dim + d] /= c as f64;
            }
        }
        Coordinates::new(dim, sums)
    }

    /// Debug dump: `vertex,aggregate,is_root` per line with a header row.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "vertex,aggregate,is_root")?;
        for (v, &a) in self.vertex_to_aggregate.iter().enumerate() {
            if a == UNASSIGNED {
                writeln!(w, "{v},,false")?;
            } else {
                writeln!(w, "{v},{a},{}", self.roots[a] == v)?;
            }
        }
        Ok(())
    }
}

/// Runs the three-phase greedy aggregation on the strong graph of `a`.
/// `mask` must have been computed on a matrix with `a`'s exact pattern;
/// phase-2 tie-breaking uses `a`'s entry magnitudes.
pub fn aggregate(a: &SparseMatrix, mask: &StrengthMask) -> Result<Aggregation> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            op: "aggregate",
            details: format!("matrix is {} x {}, expected square", a.nrows(), a.ncols()),
        });
    }
    if mask.len() != a.nnz() {
        return Err(Error::DimensionMismatch {
            op: "aggregate",
            details: format!(
                "mask covers {} entries, matrix stores {}",
                mask.len(),
                a.nnz()
            ),
        });
    }
    let n = a.nrows();
    // Strong neighbor adjacency (neighbor, |A_vu|), self-loops excluded.
    let mut strong: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for v in 0..n {
        let lo = a.row_offsets()[v];
        let (cols, vals) = a.row(v);
        for (k, (&u, &val)) in cols.iter().zip(vals).enumerate() {
            if u != v && mask.is_strong(lo + k) {
                strong[v].push((u, val.abs()));
            }
        }
    }

    let mut assign = vec![UNASSIGNED; n];
    let mut roots = Vec::new();

    // Phase 1: root sweep.
    for v in 0..n {
        if assign[v] != UNASSIGNED || strong[v].is_empty() {
            continue;
        }
        if strong[v].iter().any(|&(u, _)| assign[u] != UNASSIGNED) {
            continue;
        }
        let id = roots.len();
        assign[v] = id;
        for &(u, _) in &strong[v] {
            assign[u] = id;
        }
        roots.push(v);
    }

    // Phase 2: attach leftovers along their strongest assigned connection.
    for v in 0..n {
        if assign[v] != UNASSIGNED || strong[v].is_empty() {
            continue;
        }
        let mut best: Option<(f64, usize)> = None;
        for &(u, mag) in &strong[v] {
            let agg = assign[u];
            if agg == UNASSIGNED {
                continue;
            }
            let better = match best {
                None => true,
                Some((bm, bid)) => mag > bm || (mag == bm && agg < bid),
            };
            if better {
                best = Some((mag, agg));
            }
        }
        if let Some((_, id)) = best {
            assign[v] = id;
        }
    }

    // Phase 3: isolated vertices become singletons. (Vertices with strong
    // neighbors always found a target in phase 2: when phase 1 skipped them
    // it was because an aggregated strong neighbor existed.)
    for v in 0..n {
        if assign[v] == UNASSIGNED {
            let id = roots.len();
            assign[v] = id;
            roots.push(v);
        }
    }

    Ok(Aggregation {
        vertex_to_aggregate: assign,
        roots,
    })
}

/// Piecewise-constant tentative prolongator: `P[v][agg(v)] = 1`.
/// Fails if the aggregation leaves a vertex uncovered (its row would vanish
/// and the coarse basis would not span constants there).
pub fn tentative_prolongator(agg: &Aggregation) -> Result<SparseMatrix> {
    let mut builder = CsrBuilder::new(agg.num_aggregates());
    for v in 0..agg.num_vertices() {
        match agg.aggregate_of(v) {
            Some(a) => builder.push_row(&[a], &[1.0])?,
            None => return Err(Error::UncoveredVertex(v)),
        }
    }
    Ok(builder.finish())
}
