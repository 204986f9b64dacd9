//! Batch front end for the mean-field reflected BSDE solvers: parse a JSON
//! config, build and validate the problem, run the requested scheme(s) and
//! write CSV/JSON results. Exit codes: 0 success, 2 validation failure,
//! 3 non-convergence, 4 config error.

pub mod config;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use mfrbsde::model::validate;
use mfrbsde::penalty::{penalty_solve, PenaltyOptions};
use mfrbsde::snell::{picard_solve, PicardOptions};
use mfrbsde::{simulate_paths, Engine, LatticeEngine, ProblemSpec, RegressionEngine, SolutionBundle, SolveError};

use config::{Config, EngineKind, SchemeKind};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("config error at {0}: missing")]
    MissingField(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::MissingField(_) | CliError::Io(_) => 4,
            CliError::InvalidProblem(_) | CliError::Validation(_) => 2,
            CliError::NonConvergence(_) => 3,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub scheme: Option<SchemeKind>,
    pub engine: Option<EngineKind>,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub force: bool,
    pub threads: Option<usize>,
}

pub struct RunSummary {
    pub out_dir: PathBuf,
    pub schemes_run: Vec<String>,
    pub cross_scheme_distance: Option<f64>,
}

pub fn run(config_path: &Path, overrides: &Overrides) -> Result<RunSummary, CliError> {
    let text = fs::read_to_string(config_path)
        .map_err(|e| CliError::Config(format!("{}: {e}", config_path.display())))?;
    let config = config::parse_config(&text)?;
    run_config(&config, overrides)
}

pub fn run_config(config: &Config, overrides: &Overrides) -> Result<RunSummary, CliError> {
    let built = config::build_problem(config)?;
    let problem = &built.problem;
    let seed = overrides.seed.or(config.seed).unwrap_or(1);
    let scheme = overrides.scheme.unwrap_or(config.scheme.kind);
    let engine_kind = overrides.engine.unwrap_or(config.engine.kind);
    let out_dir = overrides
        .out
        .clone()
        .or_else(|| config.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    // standing assumptions; --force downgrades failures to warnings
    let report = validate(problem, 10_000);
    let failing: Vec<String> = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}: {}", c.name, c.witness))
        .collect();
    let hard_fail = !report.h1_ok || !report.gamma_feasible;
    if hard_fail {
        let msg = if failing.is_empty() {
            "feasibility condition failed".to_string()
        } else {
            failing.join("; ")
        };
        if overrides.force {
            log::warn!("validation failed ({msg}); continuing because --force is set");
        } else {
            return Err(CliError::Validation(msg));
        }
    } else if !failing.is_empty() {
        log::warn!("validation warnings: {}", failing.join("; "));
    }
    if !report.penalization_theorem_applies {
        log::info!(
            "penalization convergence hypotheses do not all hold (driver monotone in mean: {}, obstacle monotone: {}); both schemes still run",
            report.h2_driver_monotone_m,
            report.h2_obstacle_monotone
        );
    }

    let ensemble;
    let (engine, paths_ref, engine_label) = match engine_kind {
        EngineKind::Lattice => (
            Engine::Lattice(LatticeEngine::new(&problem.forward, &problem.grid)),
            None,
            "lattice",
        ),
        EngineKind::Mc => {
            let n_paths = overrides.paths.unwrap_or(config.engine.paths);
            ensemble = simulate_paths(&problem.forward, &problem.grid, n_paths, seed)
                .map_err(|e| CliError::InvalidProblem(e.to_string()))?;
            (
                Engine::MonteCarlo(RegressionEngine::new(
                    config.engine.basis_degree,
                    config.engine.ridge,
                )),
                Some(&ensemble),
                "mc",
            )
        }
    };

    let picard = PicardOptions {
        tol: config.tolerances.picard,
        windowed: config.scheme.windowed,
        force: overrides.force,
        root_tol: config.tolerances.reflection_root,
        ..Default::default()
    };

    fs::create_dir_all(&out_dir).map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;

    let mut docs = Vec::new();
    let mut schemes_run = Vec::new();
    let mut snell_bundle: Option<SolutionBundle> = None;
    let mut penalty_bundle: Option<SolutionBundle> = None;

    if matches!(scheme, SchemeKind::Snell | SchemeKind::Both) {
        let bundle =
            picard_solve(problem, &engine, paths_ref, &picard).map_err(solve_error_to_cli)?;
        emit(&bundle, problem, config, "snell", engine_label, seed, overrides, &out_dir, scheme)?;
        docs.push(report::diagnostics_doc(&bundle, problem, "snell", engine_label, seed, overrides.threads));
        schemes_run.push("snell".to_string());
        snell_bundle = Some(bundle);
    }
    if matches!(scheme, SchemeKind::Penalty | SchemeKind::Both) {
        let opts = PenaltyOptions {
            picard: PicardOptions { windowed: false, ..picard.clone() },
            level_tol: config.tolerances.picard,
            auto_theta: config.scheme.auto_theta,
            schedule: (0..=config.scheme.max_penalty_exponent)
                .map(|k| 2f64.powi(k as i32))
                .collect(),
        };
        let bundle =
            penalty_solve(problem, &engine, paths_ref, &opts).map_err(solve_error_to_cli)?;
        if !bundle.diagnostics.converged {
            return Err(CliError::NonConvergence(format!(
                "penalty schedule exhausted at level {} with last update {:.3e}",
                bundle.diagnostics.penalty_level,
                bundle
                    .diagnostics
                    .penalty_levels
                    .last()
                    .map(|s| s.sup_update)
                    .unwrap_or(f64::NAN)
            )));
        }
        emit(&bundle, problem, config, "penalty", engine_label, seed, overrides, &out_dir, scheme)?;
        docs.push(report::diagnostics_doc(&bundle, problem, "penalty", engine_label, seed, overrides.threads));
        schemes_run.push("penalty".to_string());
        penalty_bundle = Some(bundle);
    }

    let cross = match (&snell_bundle, &penalty_bundle) {
        (Some(a), Some(b)) => {
            let sup = (0..a.y.len())
                .map(|i| (a.mean_y(i) - b.mean_y(i)).abs())
                .fold(0.0f64, f64::max);
            if sup > config.tolerances.cross_scheme {
                log::warn!(
                    "cross-scheme mean gap {sup:.3e} exceeds tolerance {:.3e}",
                    config.tolerances.cross_scheme
                );
            }
            Some(sup)
        }
        _ => None,
    };
    for doc in &mut docs {
        doc.cross_scheme_distance = cross;
    }
    report::write_diagnostics(&docs, &out_dir.join("diagnostics.json"))?;

    Ok(RunSummary { out_dir, schemes_run, cross_scheme_distance: cross })
}

#[allow(clippy::too_many_arguments)]
fn emit(
    bundle: &SolutionBundle,
    problem: &ProblemSpec,
    config: &Config,
    scheme: &str,
    _engine_label: &str,
    _seed: u64,
    _overrides: &Overrides,
    out_dir: &Path,
    requested: SchemeKind,
) -> Result<(), CliError> {
    let scheme_dir = if requested == SchemeKind::Both {
        let dir = out_dir.join(scheme);
        fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        dir
    } else {
        out_dir.to_path_buf()
    };
    report::write_timeseries(bundle, problem, &scheme_dir.join("timeseries.csv"))?;
    if config.output.plotdata {
        report::write_plotdata(bundle, problem, &scheme_dir.join("plotdata.csv"))?;
    }
    Ok(())
}

fn solve_error_to_cli(err: SolveError) -> CliError {
    match err {
        SolveError::PicardDiverged { .. } | SolveError::ImplicitSolve
        | SolveError::BranchInconsistency => CliError::NonConvergence(err.to_string()),
        SolveError::Infeasible { .. } => CliError::Validation(err.to_string()),
        other => CliError::InvalidProblem(other.to_string()),
    }
}
