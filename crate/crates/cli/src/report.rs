//! Stable, versioned structured-text report for single runs and CSV
//! aggregation for sweeps. Field names and ordering are part of the
//! interface; downstream tooling diffs them.

use std::fmt::Write;

use samg::error::Error;
use samg::krylov::{SolveFailure, SolveReport};

use crate::config::{describe_krylov, RunConfig, VariantSet};

pub const REPORT_VERSION: &str = "samg-report v1";

/// Everything a run can end in, once the configuration itself is valid.
pub enum RunOutcome {
    SetupFailed(Error),
    Solved {
        report: SolveReport,
        /// `(rows, nonzeros)` per level, finest first.
        levels: Vec<(usize, usize)>,
    },
}

impl RunOutcome {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunOutcome::SetupFailed(_) => 2,
            RunOutcome::Solved { report, .. } if report.converged => 0,
            RunOutcome::Solved { .. } => 3,
        }
    }
}

fn status_line(outcome: &RunOutcome) -> (&'static str, Option<String>) {
    match outcome {
        RunOutcome::SetupFailed(err) => ("setup_failure", Some(err.to_string())),
        RunOutcome::Solved { report, .. } => {
            if report.converged {
                ("converged", None)
            } else {
                match &report.failure {
                    Some(SolveFailure::Breakdown(msg)) => ("breakdown", Some(msg.clone())),
                    Some(SolveFailure::Stagnation(msg)) => ("stagnation", Some(msg.clone())),
                    Some(SolveFailure::Setup(msg)) => ("setup_failure", Some(msg.clone())),
                    None => ("not_converged", None),
                }
            }
        }
    }
}

pub fn render_run_report(cfg: &RunConfig, outcome: &RunOutcome) -> String {
    let mut out = String::new();
    let w = &mut out;
    writeln!(w, "{REPORT_VERSION}").unwrap();
    writeln!(w, "problem = {}", cfg.problem.describe()).unwrap();
    writeln!(w, "theta = {}", cfg.theta).unwrap();
    writeln!(w, "strength_source = {}", cfg.strength_source.describe()).unwrap();
    writeln!(w, "variants = {}", VariantSet::from_list(&cfg.variants).label()).unwrap();
    if let Ok(krylov) = cfg.to_krylov() {
        writeln!(w, "krylov = {}", describe_krylov(&krylov)).unwrap();
    }
    let (status, detail) = status_line(outcome);
    writeln!(w, "status = {status}").unwrap();
    if let Some(detail) = detail {
        writeln!(w, "error = {detail}").unwrap();
    }
    if let RunOutcome::Solved { report, levels } = outcome {
        writeln!(w, "iterations = {}", report.iterations).unwrap();
        let rel = match report.residual_history.as_slice() {
            [first, .., last] if *first > 0.0 => last / first,
            _ => 0.0,
        };
        writeln!(w, "relative_residual = {rel:.3e}").unwrap();
        writeln!(w, "operator_complexity = {:.4}", report.operator_complexity).unwrap();
        writeln!(w, "skipped_lumping_rows = {}", report.skipped_lumping_rows).unwrap();
        writeln!(w, "levels = {}", levels.len()).unwrap();
        writeln!(w, "level rows nnz").unwrap();
        for (level, (rows, nnz)) in levels.iter().enumerate() {
            writeln!(w, "{level} {rows} {nnz}").unwrap();
        }
    }
    out
}

/// One sweep CSV row: a variant combination with its aggregate measurements.
pub struct SweepRow {
    pub label: String,
    pub runs: usize,
    pub failures: usize,
    pub mean_iterations: f64,
    pub mean_complexity: f64,
}

pub fn render_sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("variants,runs,failures,mean_iterations,mean_complexity\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{:.2},{:.4}\n",
            row.label, row.runs, row.failures, row.mean_iterations, row.mean_complexity
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ProblemConfig;

    fn config() -> RunConfig {
        toml::from_str(
            "theta = 0.25\ncoarse_size = 8\nvariants = [\"OneNorm\"]\n[problem.random_cube]\nn = 4\nseed = 1\n",
        )
        .unwrap()
    }

    fn solved(converged: bool) -> RunOutcome {
        RunOutcome::Solved {
            report: SolveReport {
                iterations: 7,
                residual_history: vec![10.0, 1.0, 1e-10],
                converged,
                operator_complexity: 1.25,
                failure: None,
                skipped_lumping_rows: 0,
                solution: vec![0.0; 4],
            },
            levels: vec![(27, 343), (4, 16)],
        }
    }

    #[test]
    fn report_schema_is_stable() {
        let text = render_run_report(&config(), &solved(true));
        let expected = "samg-report v1\n\
                        problem = random_cube(n=4, seed=1)\n\
                        theta = 0.25\n\
                        strength_source = matrix\n\
                        variants = OneNorm\n\
                        krylov = pcg(rel_tol=1e-10, max_iters=500)\n\
                        status = converged\n\
                        iterations = 7\n\
                        relative_residual = 1.000e-11\n\
                        operator_complexity = 1.2500\n\
                        skipped_lumping_rows = 0\n\
                        levels = 2\n\
                        level rows nnz\n\
                        0 27 343\n\
                        1 4 16\n";
        assert_eq!(text, expected);
    }

    #[test]
    fn exit_codes_follow_outcomes() {
        assert_eq!(solved(true).exit_code(), 0);
        assert_eq!(solved(false).exit_code(), 3);
        let setup = RunOutcome::SetupFailed(Error::ZeroDiagonal(0));
        assert_eq!(setup.exit_code(), 2);
        let text = render_run_report(&config(), &setup);
        assert!(text.contains("status = setup_failure"));
        assert!(text.contains("error = zero diagonal entry at row 0"));
        assert!(!text.contains("iterations"));
    }

    #[test]
    fn problem_descriptions_round_trip_fields() {
        let cube = config().problem.describe();
        assert_eq!(cube, "random_cube(n=4, seed=1)");
        let stretched: ProblemConfig = toml::from_str(
            "[stretched_cube]\nn = 6\nkx = 1.0\nky = 5.0\nkz = 10.0\nsigma = 1000.0\n",
        )
        .unwrap();
        assert_eq!(
            stretched.describe(),
            "stretched_cube(n=6, kx=1, ky=5, kz=10, sigma=1000)"
        );
    }

    #[test]
    fn sweep_csv_has_header_and_fixed_precision() {
        let rows = vec![
            SweepRow {
                label: "Trad".into(),
                runs: 10,
                failures: 2,
                mean_iterations: 26.125,
                mean_complexity: 1.2804,
            },
            SweepRow {
                label: "OneNorm".into(),
                runs: 10,
                failures: 0,
                mean_iterations: f64::NAN,
                mean_complexity: f64::NAN,
            },
        ];
        let csv = render_sweep_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "variants,runs,failures,mean_iterations,mean_complexity");
        assert_eq!(lines[1], "Trad,10,2,26.12,1.2804");
        assert_eq!(lines[2], "OneNorm,10,0,NaN,NaN");
    }
}
