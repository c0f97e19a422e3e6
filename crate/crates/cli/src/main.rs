//! Benchmark harness: generate or load a linear system, build the multigrid
//! hierarchy under a named variant combination, solve, and emit
//! machine-readable measurements.

mod config;
mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use samg::error::Error;
use samg::hierarchy::Hierarchy;
use samg::krylov::solve;

use config::{parse_seed_range, CliError, GridFile, ProblemConfig, RunConfig, VariantSet};
use report::{render_run_report, render_sweep_csv, RunOutcome, SweepRow};

#[derive(Parser)]
#[command(name = "samg", version, about = "Algebraic multigrid benchmark driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build, solve, and report the run described by a config file.
    ///
    /// Exit codes: 0 converged, 1 unusable configuration, 2 hierarchy
    /// setup failure, 3 solve did not converge.
    Run {
        config: PathBuf,
        /// Write the report to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every variant combination (16 in total) over a seed range or a
    /// problem grid and emit aggregate CSV. The config's own `variants`
    /// key is ignored; failed runs count in `failures` and are excluded
    /// from the means.
    Sweep {
        config: PathBuf,
        /// Half-open seed range `a..b` applied to a random_cube problem.
        #[arg(long, value_name = "A..B")]
        seeds: Option<String>,
        /// File with a `[[runs]]` problem list to sweep instead of seeds.
        #[arg(long, conflicts_with = "seeds")]
        grid: Option<PathBuf>,
        /// Write the CSV to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => cmd_run(&config, out.as_deref()),
        Command::Sweep {
            config,
            seeds,
            grid,
            out,
        } => cmd_sweep(&config, seeds.as_deref(), grid.as_deref(), out.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn cmd_run(config_path: &Path, out: Option<&Path>) -> Result<ExitCode, CliError> {
    let cfg = RunConfig::load(config_path)?;
    let outcome = execute(&cfg)?;
    emit(out, &render_run_report(&cfg, &outcome))?;
    Ok(ExitCode::from(outcome.exit_code()))
}

/// Runs one configuration end to end. Only configuration-level problems
/// surface as `Err`; setup and convergence failures come back as outcomes
/// so they reach the report.
fn execute(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let system = cfg.problem.build()?;
    let krylov = cfg.to_krylov()?;
    match Hierarchy::setup(system.matrix.clone(), system.coords.clone(), &cfg.to_setup()) {
        Err(Error::InvalidConfig(msg)) => Err(CliError(msg)),
        Err(err) => Ok(RunOutcome::SetupFailed(err)),
        Ok(hierarchy) => {
            let levels = (0..hierarchy.num_levels())
                .map(|l| {
                    let m = hierarchy.level_matrix(l);
                    (m.nrows(), m.nnz())
                })
                .collect();
            let report = solve(&system.matrix, &system.rhs, &hierarchy, &krylov)
                .map_err(|e| CliError(e.to_string()))?;
            Ok(RunOutcome::Solved { report, levels })
        }
    }
}

#[derive(Clone, Copy, Default)]
struct ComboStats {
    failures: usize,
    converged: usize,
    iterations: f64,
    complexity: f64,
}

fn cmd_sweep(
    config_path: &Path,
    seeds: Option<&str>,
    grid: Option<&Path>,
    out: Option<&Path>,
) -> Result<ExitCode, CliError> {
    let cfg = RunConfig::load(config_path)?;
    let problems: Vec<ProblemConfig> = match (seeds, grid) {
        (None, None) => {
            return Err(CliError("sweep needs --seeds a..b or --grid <file>".into()));
        }
        (Some(_), Some(_)) => unreachable!("clap rejects --seeds with --grid"),
        (Some(range), None) => parse_seed_range(range)?
            .map(|seed| cfg.problem.with_seed(seed))
            .collect::<Result<_, _>>()?,
        (None, Some(path)) => GridFile::load(path)?.runs,
    };
    let krylov = cfg.to_krylov()?;

    let mut stats = [ComboStats::default(); 16];
    for problem in &problems {
        let system = problem.build()?;
        for (bits, stat) in stats.iter_mut().enumerate() {
            let mut setup = cfg.to_setup();
            VariantSet::from_bits(bits).apply(&mut setup.prolongator);
            match Hierarchy::setup(system.matrix.clone(), system.coords.clone(), &setup) {
                Err(Error::InvalidConfig(msg)) => return Err(CliError(msg)),
                Err(_) => stat.failures += 1,
                Ok(hierarchy) => {
                    let report = solve(&system.matrix, &system.rhs, &hierarchy, &krylov)
                        .map_err(|e| CliError(e.to_string()))?;
                    if report.converged {
                        stat.converged += 1;
                        stat.iterations += report.iterations as f64;
                        stat.complexity += report.operator_complexity;
                    } else {
                        stat.failures += 1;
                    }
                }
            }
        }
    }

    let rows: Vec<SweepRow> = stats
        .iter()
        .enumerate()
        .map(|(bits, s)| SweepRow {
            label: VariantSet::from_bits(bits).label(),
            runs: problems.len(),
            failures: s.failures,
            mean_iterations: s.iterations / s.converged as f64,
            mean_complexity: s.complexity / s.converged as f64,
        })
        .collect();
    emit(out, &render_sweep_csv(&rows))?;
    Ok(ExitCode::SUCCESS)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
