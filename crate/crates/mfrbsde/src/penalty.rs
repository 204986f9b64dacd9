//! Penalization scheme: start from the unreflected mean-field solution, then
//! at each level n re-solve a standard backward equation whose driver gains
//! the term n (y - L)^- against the obstacle level L frozen from the previous
//! iterate. Levels increase geometrically; under the monotonicity hypotheses
//! (or after an exponential tilt that restores them) the iterates increase
//! toward the minimal reflected solution.

use crate::analysis::theta_transform;
use crate::condexp::Engine;
use crate::lawtools::LawCurve;
use crate::model::{DriverSpec, LawView, PathEnsemble, ProblemSpec};
use crate::snell::{self, PicardOptions, SolutionBundle, SolveError};
use crate::solution::PenaltyLevelStats;
use crate::sweep::{backward_sweep, Ens, ReflectMode};

#[derive(Debug, Clone)]
pub struct PenaltyOptions {
    /// penalty intensities, increasing; default 2^0 .. 2^10
    pub schedule: Vec<f64>,
    /// early-stop threshold on sup |Y_level - Y_prev|
    pub level_tol: f64,
    /// options for the law fixed point of the base (unreflected) solve
    pub picard: PicardOptions,
    /// tilt the problem when the driver is not nondecreasing in y
    pub auto_theta: bool,
}

impl Default for PenaltyOptions {
    fn default() -> Self {
        PenaltyOptions {
            schedule: (0..=10).map(|k| f64::from(1u32 << k)).collect(),
            level_tol: 1e-4,
            picard: PicardOptions { windowed: false, ..Default::default() },
            auto_theta: true,
        }
    }
}

impl PenaltyOptions {
    pub fn with_tols(level_tol: f64, picard_tol: f64) -> Self {
        PenaltyOptions {
            level_tol,
            picard: PicardOptions { tol: picard_tol, windowed: false, ..Default::default() },
            ..Default::default()
        }
    }
}

/// Unreflected mean-field solve: the law curve is iterated to a fixed point
/// on the whole horizon with no obstacle term; dK is identically zero.
pub fn base_solve(
    problem: &ProblemSpec,
    engine: &Engine,
    paths: Option<&PathEnsemble>,
    opts: &PicardOptions,
) -> Result<SolutionBundle, SolveError> {
    let mut opts = opts.clone();
    opts.windowed = false;
    snell::solve_with_mode(problem, engine, paths, &opts, snell::SolveKind::Unreflected)
}

/// One penalized backward pass at intensity `level`. Both the driver's law
/// argument and the obstacle level are frozen from `prev`; each node solves a
/// piecewise-linear implicit equation, closed-form on the penalized branch.
pub fn penalized_pass(
    problem: &ProblemSpec,
    prev: &SolutionBundle,
    level: f64,
    engine: &Engine,
    paths: Option<&PathEnsemble>,
) -> Result<SolutionBundle, SolveError> {
    let ens = Ens::new(engine, paths, problem)?;
    snell::check_grid(problem)?;
    let n = problem.grid.steps;
    if prev.steps() != n {
        return Err(SolveError::Mismatch(format!(
            "previous bundle has {} steps, grid has {n}",
            prev.steps()
        )));
    }

    let (frozen_law, levels) = frozen_obstacle(problem, prev, &ens);
    let xi = snell::terminal_values(problem, &ens);
    let pass = backward_sweep(
        problem,
        &frozen_law,
        &ens,
        &ReflectMode::Penalized { level, obstacle_levels: &levels },
        0,
        n,
        &xi,
        1e-12,
    )?;

    // a penalized iterate carries the law of its own output
    let out_law = LawCurve::new((0..=n).map(|i| ens.law(i, &pass.y[i])).collect());
    let mut bundle = snell::assemble(problem, &ens, pass.y, pass.z, pass.dk, out_law);
    bundle.diagnostics.picard_iters = 1;
    bundle.diagnostics.penalty_level = level;
    bundle.diagnostics.converged = true;
    snell::finalize_diagnostics(&mut bundle, problem);
    Ok(bundle)
}

/// Law curve of the previous iterate and the frozen barrier levels
/// L_i(unit) = h(t_i, x_i, Y_prev, law_prev_i).
fn frozen_obstacle(
    problem: &ProblemSpec,
    prev: &SolutionBundle,
    ens: &Ens,
) -> (LawCurve, Vec<Vec<f64>>) {
    let n = problem.grid.steps;
    let views: Vec<LawView> = (0..=n).map(|i| ens.law(i, &prev.y[i])).collect();
    let levels: Vec<Vec<f64>> = (0..=n)
        .map(|i| {
            let t = problem.grid.times[i];
            let law = &views[i];
            prev.y[i]
                .iter()
                .enumerate()
                .map(|(u, &y)| problem.obstacle.eval(t, prev.x[i][u], y, law))
                .collect()
        })
        .collect();
    (LawCurve::new(views), levels)
}

/// Run the base solve and the whole penalty schedule, stopping early once
/// consecutive iterates agree to `level_tol`. When the driver is not
/// nondecreasing in y and `auto_theta` is set, the problem is tilted by
/// theta = C_f + 1 first and the result mapped back.
pub fn penalty_solve(
    problem: &ProblemSpec,
    engine: &Engine,
    paths: Option<&PathEnsemble>,
    opts: &PenaltyOptions,
) -> Result<SolutionBundle, SolveError> {
    if opts.auto_theta && !problem.driver.monotone_in_y {
        let theta = problem.driver.c_f() + 1.0;
        let tt = theta_transform(problem, theta);
        let tilted_engine = match engine {
            Engine::MonteCarlo(reg) => Engine::MonteCarlo(*reg),
            Engine::Lattice(lat) => Engine::Lattice(lat.clone()),
        };
        let mut inner_opts = opts.clone();
        inner_opts.auto_theta = false;
        let inner = penalty_solve(&tt.problem, &tilted_engine, paths, &inner_opts)?;
        let mut out = tt.untransform(&inner);
        out.diagnostics.theta_used = theta;
        snell::finalize_diagnostics(&mut out, problem);
        return Ok(out);
    }

    let mut prev = base_solve(problem, engine, paths, &opts.picard)?;
    let base_diag = prev.diagnostics.clone();
    let mut stats: Vec<PenaltyLevelStats> = Vec::with_capacity(opts.schedule.len());
    let mut converged = false;
    let mut last_level = 0.0;

    for &level in &opts.schedule {
        let next = penalized_pass(problem, &prev, level, engine, paths)?;
        let sup_update = next.sup_abs_diff(&prev);
        let monotonicity_defect = prev.max_excess_over(&next);
        let constraint_defect = constraint_defect(problem, &prev, &next);
        let residual = next.diagnostics.skorohod_residual;
        stats.push(PenaltyLevelStats {
            level,
            sup_update,
            monotonicity_defect,
            constraint_defect,
            skorohod_residual: residual,
        });
        last_level = level;
        prev = next;
        if sup_update < opts.level_tol {
            converged = true;
            break;
        }
    }

    prev.diagnostics.picard_iters = base_diag.picard_iters + stats.len();
    prev.diagnostics.window_iters = base_diag.window_iters;
    prev.diagnostics.windows = base_diag.windows;
    prev.diagnostics.gamma_condition_value = base_diag.gamma_condition_value;
    prev.diagnostics.delta_used = base_diag.delta_used;
    prev.diagnostics.penalty_level = last_level;
    prev.diagnostics.penalty_levels = stats;
    prev.diagnostics.converged = converged;
    Ok(prev)
}

/// E of sum_i (Y_next_i - h(Y_prev_i, m_prev_i))^- dt, the pre-limit
/// constraint defect; equals mean K_T / level by construction.
fn constraint_defect(problem: &ProblemSpec, prev: &SolutionBundle, next: &SolutionBundle) -> f64 {
    let n = problem.grid.steps;
    let dt = problem.grid.dt;
    let mut acc = 0.0f64;
    for i in 0..n {
        let t = problem.grid.times[i];
        let law = prev.law_curve.view(i);
        let mut step = 0.0;
        for (u, &y_next) in next.y[i].iter().enumerate() {
            let barrier = problem.obstacle.eval(t, prev.x[i][u], prev.y[i][u], law);
            let shortfall = (barrier - y_next).max(0.0);
            step += shortfall * unit_weight(next, i, u);
        }
        acc += step * dt;
    }
    acc
}

fn unit_weight(bundle: &SolutionBundle, step: usize, unit: usize) -> f64 {
    match &bundle.weights {
        crate::solution::UnitWeights::Uniform => 1.0 / bundle.y[step].len() as f64,
        crate::solution::UnitWeights::PerStep(w) => w[step][unit],
    }
}

#[derive(Debug, Clone)]
pub struct DominationReport {
    /// min over probe points of (dominating driver - f); nonnegative iff the
    /// domination holds on the probe box
    pub probe_margin: f64,
    /// max over levels and nodes of (Y_level - upper bound)^+
    pub sandwich_gap: f64,
    pub levels_checked: usize,
}

/// Check the declared z-free dominating driver: f <= dominating driver on a
/// sampled box, then solve the dominated reflected problem on the lattice and
/// verify every penalized iterate stays below that upper solution nodewise.
pub fn domination_check(
    problem: &ProblemSpec,
    samples: usize,
    seed: u64,
) -> Result<DominationReport, SolveError> {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    let dom = match &problem.driver.domination {
        Some(d) => d.clone(),
        None => {
            return Err(if problem.driver.depends_on_z {
                SolveError::DominationRequired
            } else {
                SolveError::DominationMissing
            });
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe_margin = f64::INFINITY;
    for _ in 0..samples {
        let t = rng.random_range(0.0..problem.grid.horizon);
        let x = rng.random_range(0.25..2.0) * problem.forward.x0.abs().max(1.0);
        let y = rng.random_range(-2.0..2.0);
        let z = rng.random_range(-2.0..2.0);
        let m = rng.random_range(-2.0..2.0);
        let law = LawView::degenerate(m);
        let f_value = problem.driver.eval(t, x, y, &[z], &law);
        let dom_value = dom.eval(t, x, y, &law);
        probe_margin = probe_margin.min(dom_value - f_value);
        if f_value > dom_value + 1e-9 {
            return Err(SolveError::DominationViolated { f_value, dom_value, t, x, y, z, m });
        }
    }

    // upper bound: reflected solve with the dominating z-free driver
    let dominated_driver = DriverSpec::new(dom.lip_y, dom.lip_m, {
        let dom = dom.clone();
        move |t, x, y, law: &LawView| dom.eval(t, x, y, law)
    })
    .expect("nonnegative constants")
    .monotone(true, true);
    let dominated = ProblemSpec {
        grid: problem.grid.clone(),
        forward: problem.forward,
        driver: dominated_driver,
        obstacle: problem.obstacle.clone(),
        terminal: problem.terminal.clone(),
        p_exponent: problem.p_exponent,
    };
    let lattice = Engine::Lattice(crate::condexp::LatticeEngine::new(
        &problem.forward,
        &problem.grid,
    ));
    let opts = PicardOptions { tol: 1e-10, windowed: false, ..Default::default() };
    let upper = snell::picard_solve(&dominated, &lattice, None, &opts)?;

    let mut sandwich_gap = 0.0f64;
    let mut prev = base_solve(problem, &lattice, None, &opts)?;
    let schedule: Vec<f64> = (0..=6).map(|k| f64::from(1u32 << k)).collect();
    let levels_checked = schedule.len();
    for &level in &schedule {
        let next = penalized_pass(problem, &prev, level, &lattice, None)?;
        let gap = next.max_excess_over(&upper);
        sandwich_gap = sandwich_gap.max(gap);
        if gap > 1e-8 {
            return Err(SolveError::SandwichViolated { level, gap });
        }
        prev = next;
    }

    Ok(DominationReport { probe_margin, sandwich_gap, levels_checked })
}
