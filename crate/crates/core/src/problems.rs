//! Test-problem generators: trilinear hexahedral FEM on tensor-product
//! meshes.
//!
//! Two mesh families are provided: a unit-square cross-section column with
//! randomly perturbed node spacing and a 100:1 aspect ratio, and a triaxially
//! stretched cube whose element sizes grade linearly in each direction. Both
//! yield axis-aligned box elements, so element matrices come from closed-form
//! tensor products of 1D stiffness and mass matrices rather than quadrature.
//! Assembly eliminates Dirichlet boundary nodes symmetrically, moving their
//! boundary values to the right-hand side, and returns the interior system
//! together with interior node coordinates for distance-based strength.

use std::io::Write;

use crate::error::{Error, Result};
use crate::rng::XorShift64Star;
use crate::sparse::SparseMatrix;
use crate::strength::Coordinates;

/// Scalar field sampled at node positions.
pub type ScalarField = fn([f64; 3]) -> f64;

/// Tensor-product mesh of axis-aligned hexahedral elements.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorMesh {
    pub x_coords: Vec<f64>,
    pub y_coords: Vec<f64>,
    pub z_coords: Vec<f64>,
}

impl TensorMesh {
    pub fn new(x_coords: Vec<f64>, y_coords: Vec<f64>, z_coords: Vec<f64>) -> Result<Self> {
        for (name, coords) in [("x", &x_coords), ("y", &y_coords), ("z", &z_coords)] {
            if coords.len() < 2 {
                return Err(Error::InvalidConfig(format!(
                    "{name} direction needs at least 2 nodes, got {}",
                    coords.len()
                )));
            }
            if coords.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidConfig(format!(
                    "{name} coordinates must be strictly increasing"
                )));
            }
        }
        Ok(TensorMesh {
            x_coords,
            y_coords,
            z_coords,
        })
    }

    /// Elements per direction (x, y, z).
    pub fn num_elements(&self) -> (usize, usize, usize) {
        (
            self.x_coords.len() - 1,
            self.y_coords.len() - 1,
            self.z_coords.len() - 1,
        )
    }

    /// Total node count.
    pub fn num_nodes(&self) -> usize {
        self.x_coords.len() * self.y_coords.len() * self.z_coords.len()
    }

    fn point(&self, ix: usize, iy: usize, iz: usize) -> [f64; 3] {
        [self.x_coords[ix], self.y_coords[iy], self.z_coords[iz]]
    }

    /// Dumps all node coordinates as `x,y,z` CSV lines for debugging.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "x,y,z")?;
        for &z in &self.z_coords {
            for &y in &self.y_coords {
                for &x in &self.x_coords {
                    writeln!(w, "{x},{y},{z}")?;
                }
            }
        }
        Ok(())
    }
}

/// Operator selection for assembly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProblemKind {
    /// Pure diffusion: (grad u, grad v).
    Poisson,
    /// Reaction-diffusion: sigma^-1 (u, v) + (grad u, grad v).
    ReactionDiffusion { sigma: f64 },
}

/// Boundary-value problem description: operator, Dirichlet data, and load.
#[derive(Debug, Clone, Copy)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    /// Dirichlet boundary values, sampled at boundary nodes.
    pub dirichlet: ScalarField,
    /// Load, interpolated at nodes and integrated against the mass matrix.
    pub rhs: ScalarField,
}

/// The trilinear polynomial 1 + x + y + z + xy + xz + yz + xyz; it lies in
/// the trilinear FEM space, so the discrete solution reproduces it exactly.
pub fn trilinear_polynomial([x, y, z]: [f64; 3]) -> f64 {
    1.0 + x + y + z + x * y + x * z + y * z + x * y * z
}

fn zero_field(_: [f64; 3]) -> f64 {
    0.0
}

impl ProblemSpec {
    pub fn poisson() -> Self {
        ProblemSpec {
            kind: ProblemKind::Poisson,
            dirichlet: trilinear_polynomial,
            rhs: zero_field,
        }
    }

    pub fn reaction_diffusion(sigma: f64) -> Self {
        ProblemSpec {
            kind: ProblemKind::ReactionDiffusion { sigma },
            dirichlet: trilinear_polynomial,
            rhs: zero_field,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let ProblemKind::ReactionDiffusion { sigma } = self.kind {
            if !(sigma > 0.0) || !sigma.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "reaction coefficient sigma must be positive and finite, got {sigma}"
                )));
            }
        }
        Ok(())
    }
}

/// Unit-cross-section column with randomly perturbed spacing.
///
/// Nodes sit at `i/n + 0.2*u_i/n` in x and y and at `100*(i/n + 0.2*w_i/n)`
/// in z, with independent uniform draws in `[0, 1)` per node and direction
/// (all x draws first, then y, then z, in node order). Offsets stay below
/// one uniform spacing, so coordinates remain strictly increasing.
pub fn mesh_random_cube(n: usize, seed: u64) -> Result<TensorMesh> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 elements per direction, got {n}"
        )));
    }
    let mut rng = XorShift64Star::new(seed);
    let nf = n as f64;
    let mut direction = |scale: f64| -> Vec<f64> {
        (0..=n)
            .map(|i| scale * (i as f64 / nf + 0.2 * rng.next_f64() / nf))
            .collect()
    };
    let x = direction(1.0);
    let y = direction(1.0);
    let z = direction(100.0);
    TensorMesh::new(x, y, z)
}

/// Cube with element sizes grading linearly from 0.1 to `k/10` per
/// direction, giving a total extent of `n*(0.1 + k/10)/2`.
pub fn mesh_stretched_cube(n: usize, kx: f64, ky: f64, kz: f64) -> Result<TensorMesh> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 elements per direction, got {n}"
        )));
    }
    let graded = |k: f64| -> Result<Vec<f64>> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "stretch factor must be positive and finite, got {k}"
            )));
        }
        let first = 0.1;
        let last = k / 10.0;
        let mut nodes = Vec::with_capacity(n + 1);
        let mut pos = 0.0;
        nodes.push(pos);
        for e in 0..n {
            let size = first + (last - first) * e as f64 / (n - 1) as f64;
            pos += size;
            nodes.push(pos);
        }
        Ok(nodes)
    };
    TensorMesh::new(graded(kx)?, graded(ky)?, graded(kz)?)
}

fn stiffness_1d(h: f64) -> [[f64; 2]; 2] {
    [[1.0 / h, -1.0 / h], [-1.0 / h, 1.0 / h]]
}

fn mass_1d(h: f64) -> [[f64; 2]; 2] {
    [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]]
}

/// 8x8 stiffness and mass matrices of an `hx x hy x hz` box element with
/// trilinear shape functions; local node `l` has offset bits
/// `(l & 1, l >> 1 & 1, l >> 2 & 1)` in (x, y, z).
fn element_matrices(hx: f64, hy: f64, hz: f64) -> ([[f64; 8]; 8], [[f64; 8]; 8]) {
    let (kx, mx) = (stiffness_1d(hx), mass_1d(hx));
    let (ky, my) = (stiffness_1d(hy), mass_1d(hy));
    let (kz, mz) = (stiffness_1d(hz), mass_1d(hz));
    let mut stiff = [[0.0; 8]; 8];
    let mut mass = [[0.0; 8]; 8];
    for a in 0..8 {
        let (ax, ay, az) = (a & 1, (a >> 1) & 1, (a >> 2) & 1);
        for b in 0..8 {
            let (bx, by, bz) = (b & 1, (b >> 1) & 1, (b >> 2) & 1);
            stiff[a][b] = kx[ax][bx] * my[ay][by] * mz[az][bz]
                + mx[ax][bx] * ky[ay][by] * mz[az][bz]
                + mx[ax][bx] * my[ay][by] * kz[az][bz];
            mass[a][b] = mx[ax][bx] * my[ay][by] * mz[az][bz];
        }
    }
    (stiff, mass)
}

struct Assembly {
    triplets: Vec<(usize, usize, f64)>,
    load: Vec<f64>,
}

/// Walks all elements, handing each (global_i, global_j, operator_value,
/// mass_value) pair plus nodewise load contributions to the accumulator.
fn assemble_entries(mesh: &TensorMesh, spec: &ProblemSpec) -> Result<Assembly> {
    spec.validate()?;
    let (nx, ny, nz) = mesh.num_elements();
    let node = |ix: usize, iy: usize, iz: usize| ix + (nx + 1) * (iy + (ny + 1) * iz);
    let inv_sigma = match spec.kind {
        ProblemKind::Poisson => 0.0,
        ProblemKind::ReactionDiffusion { sigma } => 1.0 / sigma,
    };
    let mut triplets = Vec::with_capacity(nx * ny * nz * 64);
    let mut load = vec![0.0; mesh.num_nodes()];
    for ez in 0..nz {
        let hz = mesh.z_coords[ez + 1] - mesh.z_coords[ez];
        for ey in 0..ny {
            let hy = mesh.y_coords[ey + 1] - mesh.y_coords[ey];
            for ex in 0..nx {
                let hx = mesh.x_coords[ex + 1] - mesh.x_coords[ex];
                let (stiff, mass) = element_matrices(hx, hy, hz);
                let corners: Vec<usize> = (0..8)
                    .map(|l: usize| node(ex + (l & 1), ey + ((l >> 1) & 1), ez + ((l >> 2) & 1)))
                    .collect();
                let f_vals: Vec<f64> = (0..8)
                    .map(|l: usize| {
                        (spec.rhs)(mesh.point(
                            ex + (l & 1),
                            ey + ((l >> 1) & 1),
                            ez + ((l >> 2) & 1),
                        ))
                    })
                    .collect();
                for a in 0..8 {
                    for b in 0..8 {
                        let v = stiff[a][b] + inv_sigma * mass[a][b];
                        triplets.push((corners[a], corners[b], v));
                        load[corners[a]] += mass[a][b] * f_vals[b];
                    }
                }
            }
        }
    }
    Ok(Assembly { triplets, load })
}

fn all_points(mesh: &TensorMesh) -> Vec<[f64; 3]> {
    let mut points = Vec::with_capacity(mesh.num_nodes());
    for &z in &mesh.z_coords {
        for &y in &mesh.y_coords {
            for &x in &mesh.x_coords {
                points.push([x, y, z]);
            }
        }
    }
    points
}

/// Assembles the operator with natural (no-flux) boundaries: every node is
/// kept as an unknown and nothing moves to the right-hand side. Used for
/// stencil inspection and row-sum checks.
pub fn assemble_natural(
    mesh: &TensorMesh,
    spec: &ProblemSpec,
) -> Result<(SparseMatrix, Coordinates)> {
    let assembly = assemble_entries(mesh, spec)?;
    let n = mesh.num_nodes();
    let a = SparseMatrix::from_triplets(n, n, &assembly.triplets)?;
    Ok((a, Coordinates::from_points_3d(&all_points(mesh))))
}

/// Assembles the interior system with Dirichlet boundary values eliminated
/// symmetrically: boundary unknowns are removed and their couplings times
/// the boundary data move to the right-hand side.
pub fn assemble(
    mesh: &TensorMesh,
    spec: &ProblemSpec,
) -> Result<(SparseMatrix, Vec<f64>, Coordinates)> {
    let assembly = assemble_entries(mesh, spec)?;
    let points = all_points(mesh);
    let (nx, ny, nz) = mesh.num_elements();
    if nx < 2 || ny < 2 || nz < 2 {
        return Err(Error::InvalidConfig(
            "Dirichlet elimination needs at least 2 elements per direction, \
             otherwise no interior nodes remain"
                .into(),
        ));
    }
    let boundary = |g: usize| -> bool {
        let ix = g % (nx + 1);
        let iy = (g / (nx + 1)) % (ny + 1);
        let iz = g / ((nx + 1) * (ny + 1));
        ix == 0 || ix == nx || iy == 0 || iy == ny || iz == 0 || iz == nz
    };
    let mut interior = vec![usize::MAX; mesh.num_nodes()];
    let mut interior_points = Vec::new();
    for (g, point) in points.iter().enumerate() {
        if !boundary(g) {
            interior[g] = interior_points.len();
            interior_points.push(*point);
        }
    }
    let n = interior_points.len();
    let mut rhs = vec![0.0; n];
    let mut triplets = Vec::with_capacity(assembly.triplets.len());
    for &(gi, gj, v) in &assembly.triplets {
        let i = interior[gi];
        if i == usize::MAX {
            continue;
        }
        let j = interior[gj];
        if j == usize::MAX {
            rhs[i] -= v * (spec.dirichlet)(points[gj]);
        } else {
            triplets.push((i, j, v));
        }
    }
    for (g, l) in assembly.load.iter().enumerate() {
        if interior[g] != usize::MAX {
            rhs[interior[g]] += l;
        }
    }
    let a = SparseMatrix::from_triplets(n, n, &triplets)?;
    Ok((a, rhs, Coordinates::from_points_3d(&interior_points)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DenseLu;

    fn uniform_mesh(n: usize, hx: f64, hy: f64, hz: f64) -> TensorMesh {
        let axis = |h: f64| (0..=n).map(|i| i as f64 * h).collect();
        TensorMesh::new(axis(hx), axis(hy), axis(hz)).unwrap()
    }

    #[test]
    fn mesh_rejects_degenerate_input() {
        assert!(TensorMesh::new(vec![0.0], vec![0.0, 1.0], vec![0.0, 1.0]).is_err());
        assert!(TensorMesh::new(vec![0.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]).is_err());
        assert!(TensorMesh::new(vec![0.0, -1.0], vec![0.0, 1.0], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn tall_element_stencil_matches_golden_values() {
        // Uniform 1 x 1 x sqrt(7)/2 elements. After scaling by 36*hz the
        // interior 27-point stencil takes the documented values per
        // neighbor class.
        let hz = (7.0f64).sqrt() / 2.0;
        let mesh = uniform_mesh(4, 1.0, 1.0, hz);
        let (a, _) = assemble_natural(&mesh, &ProblemSpec::poisson()).unwrap();
        let id = |ix: usize, iy: usize, iz: usize| ix + 5 * (iy + 5 * iz);
        let center = id(2, 2, 2);
        let (cols, vals) = a.row(center);
        assert_eq!(cols.len(), 27);
        let golden = |dx: i64, dy: i64, dz: i64| -> f64 {
            match (dx.abs(), dy.abs(), dz.abs()) {
                (0, 0, 0) => 144.0,
                (1, 1, 1) => -4.5,
                (1, 0, 1) | (0, 1, 1) => -7.5,
                (0, 0, 1) => 12.0,
                (1, 1, 0) => -12.0,
                (1, 0, 0) | (0, 1, 0) => -6.0,
                _ => unreachable!(),
            }
        };
        for (&c, &v) in cols.iter().zip(vals) {
            let ix = (c % 5) as i64;
            let iy = ((c / 5) % 5) as i64;
            let iz = (c / 25) as i64;
            let want = golden(ix - 2, iy - 2, iz - 2);
            assert!(
                (36.0 * hz * v - want).abs() < 1e-10,
                "offset ({},{},{}): got {}, want {want}",
                ix - 2,
                iy - 2,
                iz - 2,
                36.0 * hz * v
            );
        }
    }

    #[test]
    fn natural_poisson_rows_sum_to_zero() {
        let mesh = mesh_stretched_cube(4, 2.0, 5.0, 9.0).unwrap();
        let (a, _) = assemble_natural(&mesh, &ProblemSpec::poisson()).unwrap();
        for (i, s) in a.row_sums().iter().enumerate() {
            let (_, vals) = a.row(i);
            let scale: f64 = vals.iter().map(|v| v.abs()).sum();
            assert!(s.abs() <= 1e-12 * scale, "row {i} sums to {s}");
        }
    }

    #[test]
    fn reaction_rows_sum_to_scaled_mass_row_sums() {
        let sigma = 1e3;
        let mesh = mesh_stretched_cube(3, 1.0, 4.0, 10.0).unwrap();
        let (a, _) = assemble_natural(&mesh, &ProblemSpec::reaction_diffusion(sigma)).unwrap();
        // The mass row sum at a node is the volume of its basis-function
        // support divided by 8 per direction pair: the product over
        // directions of half the adjacent element widths.
        let half_widths = |coords: &[f64], i: usize| -> f64 {
            let left = if i > 0 { coords[i] - coords[i - 1] } else { 0.0 };
            let right = if i + 1 < coords.len() {
                coords[i + 1] - coords[i]
            } else {
                0.0
            };
            (left + right) / 2.0
        };
        let (nx, ny, _) = mesh.num_elements();
        for (g, s) in a.row_sums().iter().enumerate() {
            let ix = g % (nx + 1);
            let iy = (g / (nx + 1)) % (ny + 1);
            let iz = g / ((nx + 1) * (ny + 1));
            let want = half_widths(&mesh.x_coords, ix)
                * half_widths(&mesh.y_coords, iy)
                * half_widths(&mesh.z_coords, iz)
                / sigma;
            assert!(*s > 0.0);
            // The stiffness part cancels to zero only up to roundoff at the
            // scale of its O(1) entries, which dwarfs the tiny mass sum.
            let (_, vals) = a.row(g);
            let scale: f64 = vals.iter().map(|v| v.abs()).sum();
            assert!(
                (s - want).abs() <= 1e-13 * scale,
                "row {g}: {s} vs {want}"
            );
        }
    }

    #[test]
    fn assembled_interior_system_is_symmetric() {
        let mesh = mesh_random_cube(5, 11).unwrap();
        let (a, _, _) = assemble(&mesh, &ProblemSpec::poisson()).unwrap();
        for i in 0..a.nrows() {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let (jcols, jvals) = a.row(j);
                let back = jvals[jcols.iter().position(|&c| c == i).unwrap()];
                assert!(
                    (v - back).abs() <= 1e-13 * v.abs().max(back.abs()),
                    "asymmetry at ({i},{j}): {v} vs {back}"
                );
            }
        }
    }

    #[test]
    fn interior_system_is_positive_definite() {
        for (mesh, spec) in [
            (mesh_random_cube(6, 3).unwrap(), ProblemSpec::poisson()),
            (
                mesh_stretched_cube(5, 1.0, 5.0, 10.0).unwrap(),
                ProblemSpec::reaction_diffusion(100.0),
            ),
        ] {
            let (a, _, _) = assemble(&mesh, &spec).unwrap();
            let n = a.nrows();
            let mut dense = nalgebra::DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                let (cols, vals) = a.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    dense[(i, j)] = v;
                }
            }
            let min_eig = dense
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            assert!(min_eig > 0.0, "smallest eigenvalue {min_eig}");
        }
    }

    #[test]
    fn trilinear_boundary_data_is_reproduced_exactly() {
        // The trilinear polynomial lies in the FEM space, so the discrete
        // solution matches it at the nodes up to solver roundoff.
        let mesh = mesh_random_cube(4, 99).unwrap();
        let (a, rhs, coords) = assemble(&mesh, &ProblemSpec::poisson()).unwrap();
        let lu = DenseLu::factor_sparse(&a).unwrap();
        let u = lu.solve(&rhs).unwrap();
        for (i, ui) in u.iter().enumerate() {
            let p = coords.point(i);
            let want = trilinear_polynomial([p[0], p[1], p[2]]);
            assert!(
                (ui - want).abs() <= 1e-8 * want.abs().max(1.0),
                "node {i}: {ui} vs {want}"
            );
        }
    }

    #[test]
    fn random_cube_perturbations_stay_within_envelope() {
        for n in [2, 17, 60] {
            let mesh = mesh_random_cube(n, 7).unwrap();
            let nf = n as f64;
            for i in 0..=n {
                let base = i as f64 / nf;
                let bound = 0.2 / nf + 1e-15;
                assert!((mesh.x_coords[i] - base).abs() <= bound);
                assert!(mesh.x_coords[i] >= base);
                assert!((mesh.y_coords[i] - base).abs() <= bound);
                assert!((mesh.z_coords[i] - 100.0 * base) <= 100.0 * bound);
                assert!(mesh.z_coords[i] >= 100.0 * base);
            }
        }
    }

    #[test]
    fn random_cube_is_deterministic_per_seed() {
        let a = mesh_random_cube(12, 5).unwrap();
        let b = mesh_random_cube(12, 5).unwrap();
        assert_eq!(a, b);
        let c = mesh_random_cube(12, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_cube_coordinates_stay_monotone_across_seeds() {
        for seed in 0..50 {
            let mesh = mesh_random_cube(60, seed).unwrap();
            for coords in [&mesh.x_coords, &mesh.y_coords, &mesh.z_coords] {
                assert!(coords.windows(2).all(|w| w[1] > w[0]));
            }
        }
    }

    #[test]
    fn stretched_cube_matches_analytic_extents() {
        let mesh = mesh_stretched_cube(60, 1.0, 5.0, 10.0).unwrap();
        let (nx, ny, nz) = mesh.num_elements();
        assert_eq!((nx, ny, nz), (60, 60, 60));
        // kx = 1 grades 0.1 -> 0.1: uniform spacing.
        for w in mesh.x_coords.windows(2) {
            assert!((w[1] - w[0] - 0.1).abs() < 1e-12);
        }
        let extent = |coords: &[f64]| coords.last().unwrap() - coords.first().unwrap();
        assert!((extent(&mesh.x_coords) - 6.0).abs() < 1e-12);
        assert!((extent(&mesh.y_coords) - 18.0).abs() < 1e-12);
        assert!((extent(&mesh.z_coords) - 33.0).abs() < 1e-12);
    }

    #[test]
    fn stretched_cube_rejects_nonpositive_stretch() {
        assert!(mesh_stretched_cube(10, 0.0, 1.0, 1.0).is_err());
        assert!(mesh_stretched_cube(10, 1.0, -2.0, 1.0).is_err());
        assert!(mesh_stretched_cube(1, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn reaction_spec_requires_positive_sigma() {
        assert!(ProblemSpec::reaction_diffusion(0.0).validate().is_err());
        assert!(ProblemSpec::reaction_diffusion(-1.0).validate().is_err());
        assert!(ProblemSpec::reaction_diffusion(10.0).validate().is_ok());
    }

    #[test]
    fn elimination_requires_interior_nodes() {
        let mesh = uniform_mesh(1, 1.0, 1.0, 1.0);
        assert!(assemble(&mesh, &ProblemSpec::poisson()).is_err());
    }

    #[test]
    fn csv_dump_lists_every_node() {
        let mesh = uniform_mesh(2, 1.0, 1.0, 1.0);
        let mut out = Vec::new();
        mesh.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 1 + mesh.num_nodes());
        assert!(text.starts_with("x,y,z\n"));
    }
}
