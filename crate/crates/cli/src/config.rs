//! Run configuration: structured-text parsing, validation, and translation
//! into library setup/solve configs and assembled systems.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::ops::Range;
use std::path::{Path, PathBuf};

use samg::error::Error;
use samg::hierarchy::{SetupConfig, StrengthSource};
use samg::krylov::{KrylovConfig, KrylovMethod};
use samg::problems::{assemble, mesh_random_cube, mesh_stretched_cube, ProblemSpec};
use samg::prolongator::{DiagonalChoice, LumpingRule, ProlongatorConfig};
use samg::sparse::matrix_market::read_matrix_market;
use samg::sparse::SparseMatrix;
use samg::strength::Coordinates;
use serde::Deserialize;

/// Dominance growth allowance used whenever off-diagonal lumping is enabled.
const OFFLMP_TAU: f64 = 1.1;

/// Default restart length when GMRES is selected without one.
const GMRES_RESTART: usize = 30;

/// Unusable input: the config file, CLI flags, or data files they point
/// to. Always exits with code 1; failures of well-formed runs are instead
/// reported in-band with their own exit codes.
#[derive(Debug)]
pub struct CliError(pub String);

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One benchmark run as described by a configuration file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub theta: f64,
    pub coarse_size: usize,
    #[serde(default)]
    pub strength_source: StrengthSourceConfig,
    #[serde(default)]
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub krylov: KrylovSection,
    pub max_levels: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError(format!("{}: {e}", path.display())))
    }

    /// Hierarchy configuration with the file's own variant list applied.
    pub fn to_setup(&self) -> SetupConfig {
        let mut setup = SetupConfig {
            theta: self.theta,
            coarse_size: self.coarse_size,
            strength_source: self.strength_source.to_core(),
            ..SetupConfig::default()
        };
        if let Some(m) = self.max_levels {
            setup.max_levels = m;
        }
        VariantSet::from_list(&self.variants).apply(&mut setup.prolongator);
        setup
    }

    pub fn to_krylov(&self) -> Result<KrylovConfig, CliError> {
        self.krylov.to_core()
    }
}

/// Problem selection; each kind rejects keys it does not define.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemConfig {
    RandomCube(RandomCube),
    StretchedCube(StretchedCube),
    MatrixMarket(MatrixMarketInput),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomCube {
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StretchedCube {
    pub n: usize,
    pub kx: f64,
    pub ky: f64,
    pub kz: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixMarketInput {
    pub path: PathBuf,
    #[serde(default)]
    pub coords_path: Option<PathBuf>,
}

/// Assembled linear system ready for setup and solve.
pub struct System {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub coords: Option<Coordinates>,
}

impl ProblemConfig {
    pub fn build(&self) -> Result<System, CliError> {
        let cfg = |e: Error| CliError(e.to_string());
        match self {
            ProblemConfig::RandomCube(p) => {
                let mesh = mesh_random_cube(p.n, p.seed).map_err(cfg)?;
                let (matrix, rhs, coords) =
                    assemble(&mesh, &ProblemSpec::poisson()).map_err(cfg)?;
                Ok(System { matrix, rhs, coords: Some(coords) })
            }
            ProblemConfig::StretchedCube(p) => {
                let mesh = mesh_stretched_cube(p.n, p.kx, p.ky, p.kz).map_err(cfg)?;
                let (matrix, rhs, coords) =
                    assemble(&mesh, &ProblemSpec::reaction_diffusion(p.sigma)).map_err(cfg)?;
                Ok(System { matrix, rhs, coords: Some(coords) })
            }
            ProblemConfig::MatrixMarket(p) => {
                let matrix = read_matrix_market(&p.path).map_err(cfg)?;
                let coords = match &p.coords_path {
                    Some(path) => Some(read_coords_csv(path)?),
                    None => None,
                };
                let rhs = vec![1.0; matrix.nrows()];
                Ok(System { matrix, rhs, coords })
            }
        }
    }

    /// Stable one-line description used in reports.
    pub fn describe(&self) -> String {
        match self {
            ProblemConfig::RandomCube(p) => format!("random_cube(n={}, seed={})", p.n, p.seed),
            ProblemConfig::StretchedCube(p) => format!(
                "stretched_cube(n={}, kx={}, ky={}, kz={}, sigma={})",
                p.n, p.kx, p.ky, p.kz, p.sigma
            ),
            ProblemConfig::MatrixMarket(p) => match &p.coords_path {
                Some(c) => format!(
                    "matrix_market(path={}, coords_path={})",
                    p.path.display(),
                    c.display()
                ),
                None => format!("matrix_market(path={})", p.path.display()),
            },
        }
    }

    /// Same problem with a different seed; only seeded problems qualify.
    pub fn with_seed(&self, seed: u64) -> Result<ProblemConfig, CliError> {
        match self {
            ProblemConfig::RandomCube(p) => {
                Ok(ProblemConfig::RandomCube(RandomCube { n: p.n, seed }))
            }
            _ => Err(CliError(
                "--seeds requires a random_cube problem".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrengthSourceConfig {
    #[default]
    Matrix,
    DistanceLaplacian,
}

impl StrengthSourceConfig {
    pub fn to_core(self) -> StrengthSource {
        match self {
            StrengthSourceConfig::Matrix => StrengthSource::Matrix,
            StrengthSourceConfig::DistanceLaplacian => StrengthSource::DistanceLaplacian,
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            StrengthSourceConfig::Matrix => "matrix",
            StrengthSourceConfig::DistanceLaplacian => "distance_laplacian",
        }
    }
}

/// Prolongator modifications, named as the measurement columns name them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum Variant {
    OneNorm,
    OffLmp,
    Cnstrnt,
    Sprsfy,
}

/// A combination of enabled variants.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VariantSet {
    pub one_norm: bool,
    pub offlmp: bool,
    pub cnstrnt: bool,
    pub sprsfy: bool,
}

impl VariantSet {
    pub fn from_list(list: &[Variant]) -> Self {
        let mut set = VariantSet::default();
        for v in list {
            match v {
                Variant::OneNorm => set.one_norm = true,
                Variant::OffLmp => set.offlmp = true,
                Variant::Cnstrnt => set.cnstrnt = true,
                Variant::Sprsfy => set.sprsfy = true,
            }
        }
        set
    }

    /// Combination `bits` in sweep order: bit 0 = OneNorm, bit 1 = OffLmp,
    /// bit 2 = Cnstrnt, bit 3 = Sprsfy.
    pub fn from_bits(bits: usize) -> Self {
        VariantSet {
            one_norm: bits & 1 != 0,
            offlmp: bits & 2 != 0,
            cnstrnt: bits & 4 != 0,
            sprsfy: bits & 8 != 0,
        }
    }

    pub fn apply(&self, p: &mut ProlongatorConfig) {
        p.diagonal = if self.one_norm {
            DiagonalChoice::SafeguardedOneNorm
        } else {
            DiagonalChoice::Filtered
        };
        p.lumping = if self.offlmp {
            LumpingRule::OffDiagonal { tau: OFFLMP_TAU }
        } else {
            LumpingRule::Diagonal
        };
        p.constrain = self.cnstrnt;
        p.sparsify = self.sprsfy;
    }

    pub fn label(&self) -> String {
        let names: Vec<&str> = [
            (self.one_norm, "OneNorm"),
            (self.offlmp, "OffLmp"),
            (self.cnstrnt, "Cnstrnt"),
            (self.sprsfy, "Sprsfy"),
        ]
        .iter()
        .filter_map(|&(on, name)| on.then_some(name))
        .collect();
        if names.is_empty() {
            "Trad".to_string()
        } else {
            names.join("+")
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KrylovSection {
    #[serde(default)]
    pub method: MethodConfig,
    pub restart: Option<usize>,
    pub rel_tol: Option<f64>,
    pub max_iters: Option<usize>,
}

impl KrylovSection {
    pub fn to_core(&self) -> Result<KrylovConfig, CliError> {
        let method = match (self.method, self.restart) {
            (MethodConfig::Pcg, Some(_)) => {
                return Err(CliError("restart only applies to gmres".into()));
            }
            (MethodConfig::Pcg, None) => KrylovMethod::Pcg,
            (MethodConfig::Gmres, restart) => KrylovMethod::Gmres {
                restart: restart.unwrap_or(GMRES_RESTART),
            },
        };
        let defaults = KrylovConfig::default();
        let cfg = KrylovConfig {
            method,
            rel_tol: self.rel_tol.unwrap_or(defaults.rel_tol),
            max_iters: self.max_iters.unwrap_or(defaults.max_iters),
        };
        cfg.validate()
            .map_err(|e| CliError(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodConfig {
    #[default]
    Pcg,
    Gmres,
}

pub fn describe_krylov(cfg: &KrylovConfig) -> String {
    match cfg.method {
        KrylovMethod::Pcg => format!(
            "pcg(rel_tol={:e}, max_iters={})",
            cfg.rel_tol, cfg.max_iters
        ),
        KrylovMethod::Gmres { restart } => format!(
            "gmres(restart={restart}, rel_tol={:e}, max_iters={})",
            cfg.rel_tol, cfg.max_iters
        ),
    }
}

/// Problem list for grid sweeps.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub runs: Vec<ProblemConfig>,
}

impl GridFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError(format!("cannot read {}: {e}", path.display())))?;
        let grid: GridFile = toml::from_str(&text)
            .map_err(|e| CliError(format!("{}: {e}", path.display())))?;
        if grid.runs.is_empty() {
            return Err(CliError("grid file lists no runs".into()));
        }
        Ok(grid)
    }
}

/// Parses a half-open seed range written as `a..b`.
pub fn parse_seed_range(s: &str) -> Result<Range<u64>, CliError> {
    let err = || CliError(format!("seed range must look like a..b, got {s:?}"));
    let (lo, hi) = s.split_once("..").ok_or_else(err)?;
    let lo: u64 = lo.trim().parse().map_err(|_| err())?;
    let hi: u64 = hi.trim().parse().map_err(|_| err())?;
    if lo >= hi {
        return Err(CliError(format!("seed range {s} is empty")));
    }
    Ok(lo..hi)
}

/// Reads vertex coordinates from comma-separated lines (one vertex per
/// line, one column per dimension); a leading non-numeric header line is
/// skipped.
pub fn read_coords_csv(path: &Path) -> Result<Coordinates, CliError> {
    let bad = |msg: String| CliError(format!("{}: {msg}", path.display()));
    let file = fs::File::open(path)
        .map_err(|e| CliError(format!("cannot read {}: {e}", path.display())))?;
    let mut data = Vec::new();
    let mut dim = 0usize;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| bad(e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Result<Vec<f64>, _> =
            trimmed.split(',').map(|f| f.trim().parse::<f64>()).collect();
        let fields = match fields {
            Ok(f) => f,
            Err(_) if lineno == 0 => continue, // header line
            Err(e) => return Err(bad(format!("line {}: {e}", lineno + 1))),
        };
        if dim == 0 {
            dim = fields.len();
        } else if fields.len() != dim {
            return Err(bad(format!(
                "line {}: expected {dim} columns, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        data.extend(fields);
    }
    Coordinates::new(dim, data).map_err(|e| bad(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_config() -> &'static str {
        r#"
            theta = 0.025
            coarse_size = 40
            strength_source = "distance_laplacian"
            variants = ["OneNorm", "Sprsfy"]
            max_levels = 6

            [problem.random_cube]
            n = 5
            seed = 3

            [krylov]
            method = "gmres"
            restart = 20
            rel_tol = 1e-8
            max_iters = 300
        "#
    }

    #[test]
    fn parses_full_config() {
        let cfg: RunConfig = toml::from_str(full_config()).unwrap();
        assert!(matches!(
            cfg.problem,
            ProblemConfig::RandomCube(RandomCube { n: 5, seed: 3 })
        ));
        let setup = cfg.to_setup();
        assert_eq!(setup.theta, 0.025);
        assert_eq!(setup.coarse_size, 40);
        assert_eq!(setup.max_levels, 6);
        assert_eq!(setup.strength_source, StrengthSource::DistanceLaplacian);
        assert_eq!(setup.prolongator.diagonal, DiagonalChoice::SafeguardedOneNorm);
        assert_eq!(setup.prolongator.lumping, LumpingRule::Diagonal);
        assert!(!setup.prolongator.constrain);
        assert!(setup.prolongator.sparsify);
        let krylov = cfg.to_krylov().unwrap();
        assert_eq!(krylov.method, KrylovMethod::Gmres { restart: 20 });
        assert_eq!(krylov.rel_tol, 1e-8);
        assert_eq!(krylov.max_iters, 300);
    }

    #[test]
    fn rejects_unknown_keys_at_every_level() {
        let top = "theta = 0.1\ncoarse_size = 10\nbogus = 1\n[problem.random_cube]\nn = 4\nseed = 1\n";
        assert!(toml::from_str::<RunConfig>(top).is_err());
        let problem =
            "theta = 0.1\ncoarse_size = 10\n[problem.random_cube]\nn = 4\nseed = 1\nbogus = 2\n";
        assert!(toml::from_str::<RunConfig>(problem).is_err());
        let krylov = "theta = 0.1\ncoarse_size = 10\n[problem.random_cube]\nn = 4\nseed = 1\n[krylov]\nbogus = 3\n";
        assert!(toml::from_str::<RunConfig>(krylov).is_err());
    }

    #[test]
    fn variant_names_are_exact() {
        let lower = "theta = 0.1\ncoarse_size = 10\nvariants = [\"onenorm\"]\n[problem.random_cube]\nn = 4\nseed = 1\n";
        assert!(toml::from_str::<RunConfig>(lower).is_err());
    }

    #[test]
    fn variant_bits_cover_all_sixteen_labels() {
        let labels: Vec<String> = (0..16).map(|b| VariantSet::from_bits(b).label()).collect();
        assert_eq!(labels[0], "Trad");
        assert_eq!(labels[1], "OneNorm");
        assert_eq!(labels[2], "OffLmp");
        assert_eq!(labels[3], "OneNorm+OffLmp");
        assert_eq!(labels[4], "Cnstrnt");
        assert_eq!(labels[8], "Sprsfy");
        assert_eq!(labels[15], "OneNorm+OffLmp+Cnstrnt+Sprsfy");
        let mut unique = labels.clone();
        unique.sort();
        unique.dedup();
        assert_eq!(unique.len(), 16);
    }

    #[test]
    fn restart_with_pcg_is_rejected() {
        let cfg = "theta = 0.1\ncoarse_size = 10\n[problem.random_cube]\nn = 4\nseed = 1\n[krylov]\nrestart = 10\n";
        let cfg: RunConfig = toml::from_str(cfg).unwrap();
        assert!(cfg.to_krylov().is_err());
    }

    #[test]
    fn gmres_defaults_restart() {
        let cfg = "theta = 0.1\ncoarse_size = 10\n[problem.random_cube]\nn = 4\nseed = 1\n[krylov]\nmethod = \"gmres\"\n";
        let cfg: RunConfig = toml::from_str(cfg).unwrap();
        let krylov = cfg.to_krylov().unwrap();
        assert_eq!(krylov.method, KrylovMethod::Gmres { restart: 30 });
    }

    #[test]
    fn seed_ranges_parse_and_validate() {
        assert_eq!(parse_seed_range("3..7").unwrap(), 3..7);
        assert_eq!(parse_seed_range("0..1").unwrap(), 0..1);
        assert!(parse_seed_range("7..3").is_err());
        assert!(parse_seed_range("5..5").is_err());
        assert!(parse_seed_range("5").is_err());
        assert!(parse_seed_range("a..b").is_err());
    }

    #[test]
    fn seed_override_requires_random_cube() {
        let stretched = ProblemConfig::StretchedCube(StretchedCube {
            n: 4,
            kx: 1.0,
            ky: 1.0,
            kz: 1.0,
            sigma: 10.0,
        });
        assert!(stretched.with_seed(1).is_err());
        let cube = ProblemConfig::RandomCube(RandomCube { n: 4, seed: 0 });
        match cube.with_seed(9).unwrap() {
            ProblemConfig::RandomCube(p) => assert_eq!(p.seed, 9),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn coords_csv_reads_with_and_without_header() {
        let dir = std::env::temp_dir();
        let path = dir.join(format!("samg-coords-{}.csv", std::process::id()));
        std::fs::write(&path, "x,y,z\n0,0,0\n1e0,0,0\n0,1,0\n").unwrap();
        let coords = read_coords_csv(&path).unwrap();
        assert_eq!(coords.len(), 3);
        assert_eq!(coords.dim(), 3);
        assert_eq!(coords.point(1), &[1.0, 0.0, 0.0]);
        std::fs::write(&path, "0,0\n1,0\n").unwrap();
        let coords = read_coords_csv(&path).unwrap();
        assert_eq!(coords.dim(), 2);
        std::fs::write(&path, "0,0\n1,0,3\n").unwrap();
        assert!(read_coords_csv(&path).is_err());
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn grid_file_parses_mixed_problems() {
        let text = r#"
            [[runs]]
            [runs.random_cube]
            n = 4
            seed = 0

            [[runs]]
            [runs.stretched_cube]
            n = 4
            kx = 1.0
            ky = 5.0
            kz = 10.0
            sigma = 1000.0
        "#;
        let grid: GridFile = toml::from_str(text).unwrap();
        assert_eq!(grid.runs.len(), 2);
        assert!(matches!(grid.runs[1], ProblemConfig::StretchedCube(_)));
    }
}
