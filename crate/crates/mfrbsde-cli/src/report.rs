//! Result emission: per-time CSV, versioned JSON diagnostics and optional
//! quantile plot data. Floats are written with a fixed format so identical
//! runs produce byte-identical files.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use mfrbsde::{ProblemSpec, SolutionBundle, UnitWeights};

use crate::CliError;

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

/// `timeseries.csv` with columns t, mean_Y, std_Y, mean_K, mean_Z,
/// constraint_violation; mean_K is the cumulative mean of the increasing
/// process, and the terminal mean_Z row repeats the last step value.
pub fn write_timeseries(
    bundle: &SolutionBundle,
    problem: &ProblemSpec,
    path: &Path,
) -> Result<(), CliError> {
    let n = bundle.steps();
    let mean_k = bundle.mean_cumulative_k();
    let mut out = String::from("t,mean_Y,std_Y,mean_K,mean_Z,constraint_violation\n");
    for (i, k_value) in mean_k.iter().enumerate() {
        let z_index = i.min(n.saturating_sub(1));
        let row = [
            fmt(problem.grid.times[i]),
            fmt(bundle.mean_y(i)),
            fmt(bundle.std_y(i)),
            fmt(*k_value),
            fmt(bundle.mean_z(z_index)),
            fmt(bundle.constraint_violation_at(i, problem)),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// `plotdata.csv` with per-time 5, 50 and 95 percent quantiles of Y.
pub fn write_plotdata(bundle: &SolutionBundle, problem: &ProblemSpec, path: &Path) -> Result<(), CliError> {
    let mut out = String::from("t,q05,q50,q95\n");
    for i in 0..bundle.y.len() {
        let (q05, q50, q95) = weighted_quantiles(bundle, i);
        let row = [fmt(problem.grid.times[i]), fmt(q05), fmt(q50), fmt(q95)];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn weighted_quantiles(bundle: &SolutionBundle, step: usize) -> (f64, f64, f64) {
    let values = &bundle.y[step];
    let mut pairs: Vec<(f64, f64)> = match &bundle.weights {
        UnitWeights::Uniform => {
            let w = 1.0 / values.len() as f64;
            values.iter().map(|&v| (v, w)).collect()
        }
        UnitWeights::PerStep(w) => values.iter().copied().zip(w[step].iter().copied()).collect(),
    };
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let at = |q: f64| -> f64 {
        let mut acc = 0.0;
        for &(v, w) in &pairs {
            acc += w;
            if acc >= q {
                return v;
            }
        }
        pairs.last().map(|p| p.0).unwrap_or(f64::NAN)
    };
    (at(0.05), at(0.50), at(0.95))
}

#[derive(Serialize)]
pub struct DiagnosticsDoc {
    pub schema_version: u32,
    pub scheme: String,
    pub engine: String,
    pub seed: u64,
    pub threads: Option<usize>,
    pub gamma_condition_value: f64,
    pub delta_used: Option<f64>,
    pub picard_iters: usize,
    pub window_iters: Vec<usize>,
    pub windows: Vec<(usize, usize)>,
    pub final_distance: f64,
    pub skorohod_residual: f64,
    pub constraint_violation: f64,
    pub penalty_level: f64,
    pub penalty_schedule: Vec<PenaltyLevelDoc>,
    pub converged: bool,
    pub theta_used: f64,
    pub max_mean_jump: f64,
    pub value_at_zero: f64,
    pub exercise_policy_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_scheme_distance: Option<f64>,
}

#[derive(Serialize)]
pub struct PenaltyLevelDoc {
    pub level: f64,
    pub sup_update: f64,
    pub monotonicity_defect: f64,
    pub constraint_defect: f64,
    pub skorohod_residual: f64,
}

pub fn diagnostics_doc(
    bundle: &SolutionBundle,
    problem: &ProblemSpec,
    scheme: &str,
    engine: &str,
    seed: u64,
    threads: Option<usize>,
) -> DiagnosticsDoc {
    let d = &bundle.diagnostics;
    DiagnosticsDoc {
        schema_version: 1,
        scheme: scheme.to_string(),
        engine: engine.to_string(),
        seed,
        threads,
        gamma_condition_value: d.gamma_condition_value,
        delta_used: d.delta_used,
        picard_iters: d.picard_iters,
        window_iters: d.window_iters.clone(),
        windows: d.windows.clone(),
        final_distance: d.final_distance,
        skorohod_residual: d.skorohod_residual,
        constraint_violation: d.constraint_violation,
        penalty_level: d.penalty_level,
        penalty_schedule: d
            .penalty_levels
            .iter()
            .map(|s| PenaltyLevelDoc {
                level: s.level,
                sup_update: s.sup_update,
                monotonicity_defect: s.monotonicity_defect,
                constraint_defect: s.constraint_defect,
                skorohod_residual: s.skorohod_residual,
            })
            .collect(),
        converged: d.converged,
        theta_used: d.theta_used,
        max_mean_jump: d.max_mean_jump,
        value_at_zero: bundle.mean_y(0),
        exercise_policy_value: mfrbsde::exercise_policy_value(bundle, problem),
        cross_scheme_distance: None,
    }
}

pub fn write_diagnostics(docs: &[DiagnosticsDoc], path: &Path) -> Result<(), CliError> {
    let body = if docs.len() == 1 {
        serde_json::to_string_pretty(&docs[0])
    } else {
        serde_json::to_string_pretty(&docs)
    }
    .map_err(|e| CliError::Io(e.to_string()))?;
    let mut file =
        fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    file.write_all(body.as_bytes())
        .and_then(|_| file.write_all(b"\n"))
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
