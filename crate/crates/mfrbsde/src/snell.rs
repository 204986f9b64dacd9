//! Reflected solver: for a frozen law curve the backward pass computes the
//! discrete reflected equation by dynamic programming (reflection is the
//! closed-form projection onto the half-line above the obstacle root); the
//! law curve is then iterated to a fixed point, either globally or window by
//! window backward from the horizon with window length picked so the
//! law-update map is a strict contraction.

pub use crate::solution::{Diagnostics, PenaltyLevelStats, SolutionBundle, SolveError, UnitWeights};

use crate::analysis::feasibility_report;
use crate::condexp::Engine;
use crate::lawtools::{CurveMetric, LawCurve};
use crate::model::{LawView, ObstacleSpec, PathEnsemble, ProblemSpec};
use crate::sweep::{backward_sweep, Ens, ReflectMode};

#[derive(Debug, Clone)]
pub struct PicardOptions {
    /// stopping tolerance on the law-curve distance
    pub tol: f64,
    /// cap on backward passes per window
    pub max_outer: usize,
    /// paste contraction windows backward from T instead of iterating globally
    pub windowed: bool,
    /// run even when the feasibility condition fails (damped updates)
    pub force: bool,
    /// fraction of the critical window length to actually use
    pub safety: f64,
    pub metric: CurveMetric,
    /// law-update damping in force mode; feasible runs use plain iteration
    pub damping: f64,
    /// absolute tolerance of the reflection-threshold root
    pub root_tol: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            tol: 1e-4,
            max_outer: 200,
            windowed: true,
            force: false,
            safety: 0.9,
            metric: CurveMetric::MeanOnly,
            damping: 0.5,
            root_tol: 1e-12,
        }
    }
}

impl PicardOptions {
    pub fn with_tol(tol: f64) -> Self {
        PicardOptions { tol, ..Default::default() }
    }

    pub fn global(tol: f64) -> Self {
        PicardOptions { tol, windowed: false, ..Default::default() }
    }
}

/// Root of y = h(t, x, y, m). Unique because gamma1 < 1 makes
/// y - h(y, m) strictly increasing; the admissible set is [root, inf).
/// Bracket by doubling, bisect to `tol`, then polish with two guarded
/// Newton steps.
pub fn reflect_threshold(
    obstacle: &ObstacleSpec,
    law: &LawView,
    t: f64,
    x: f64,
) -> Result<f64, SolveError> {
    reflect_threshold_at(obstacle, law, t, x, 1e-12)
}

pub(crate) fn reflect_threshold_at(
    obstacle: &ObstacleSpec,
    law: &LawView,
    t: f64,
    x: f64,
    tol: f64,
) -> Result<f64, SolveError> {
    if obstacle.gamma1 == 0.0 {
        // barrier constant in y: the root is its value
        return Ok(obstacle.eval(t, x, 0.0, law));
    }
    let g = |y: f64| y - obstacle.eval(t, x, y, law);
    let center = obstacle.eval(t, x, 0.0, law);
    let mut lo = center - 1.0;
    let mut hi = center + 1.0;
    let mut width = 1.0;
    let mut count = 0usize;
    while g(lo) > 0.0 {
        lo -= width;
        width *= 2.0;
        count += 1;
        if count > 1000 {
            return Err(SolveError::ThresholdBracket);
        }
    }
    width = 1.0;
    count = 0;
    while g(hi) < 0.0 {
        hi += width;
        width *= 2.0;
        count += 1;
        if count > 1000 {
            return Err(SolveError::ThresholdBracket);
        }
    }
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut y = 0.5 * (lo + hi);
    let floor_slope = (1.0 - obstacle.gamma1).max(1e-6);
    for _ in 0..2 {
        let h = 1e-7 * (1.0 + y.abs());
        let slope = ((g(y + h) - g(y - h)) / (2.0 * h)).max(floor_slope);
        y = (y - g(y) / slope).clamp(lo - tol, hi + tol);
    }
    Ok(y)
}

/// One application of the law-update map: solve the reflected equation
/// backward against the frozen `law_curve`. The returned bundle keeps that
/// input curve, which is what its reflection was computed against.
pub fn backward_pass(
    problem: &ProblemSpec,
    law_curve: &LawCurve,
    engine: &Engine,
    paths: Option<&PathEnsemble>,
) -> Result<SolutionBundle, SolveError> {
    let ens = Ens::new(engine, paths, problem)?;
    check_grid(problem)?;
    let n = problem.grid.steps;
    let xi = terminal_values(problem, &ens);
    let pass = backward_sweep(problem, law_curve, &ens, &ReflectMode::Snell, 0, n, &xi, 1e-12)?;
    let mut bundle = assemble(problem, &ens, pass.y, pass.z, pass.dk, law_curve.clone());
    bundle.diagnostics.picard_iters = 1;
    bundle.diagnostics.converged = true;
    finalize_diagnostics(&mut bundle, problem);
    Ok(bundle)
}

/// Iterate the law-update map to a fixed point. In windowed mode the grid is
/// cut backward from T into blocks no longer than the admissible window, each
/// iterated to tolerance with the later block's initial values as terminal
/// data; in global mode the whole horizon is iterated at once.
pub fn picard_solve(
    problem: &ProblemSpec,
    engine: &Engine,
    paths: Option<&PathEnsemble>,
    opts: &PicardOptions,
) -> Result<SolutionBundle, SolveError> {
    solve_with_mode(problem, engine, paths, opts, SolveKind::Reflected)
}

/// Shared fixed-point loop for the reflected and unreflected equations.
pub(crate) enum SolveKind {
    Reflected,
    Unreflected,
}

pub(crate) fn solve_with_mode(
    problem: &ProblemSpec,
    engine: &Engine,
    paths: Option<&PathEnsemble>,
    opts: &PicardOptions,
    kind: SolveKind,
) -> Result<SolutionBundle, SolveError> {
    let ens = Ens::new(engine, paths, problem)?;
    check_grid(problem)?;
    let grid = &problem.grid;
    let n = grid.steps;
    let p = problem.p_exponent;

    let feas = feasibility_report(
        p,
        problem.driver.c_f(),
        problem.obstacle.gamma1,
        problem.obstacle.gamma2,
        opts.safety,
        Some(grid.horizon),
    );
    let reflected = matches!(kind, SolveKind::Reflected);
    if reflected && !feas.feasible && !opts.force {
        return Err(SolveError::Infeasible { value: feas.gamma_condition_value });
    }

    let xi = terminal_values(problem, &ens);
    let terminal_mean = ens.mean(n, &xi);
    let mut law = LawCurve::constant(LawView::degenerate(terminal_mean), n + 1);
    law.set_view(n, ens.law(n, &xi));

    let windows: Vec<(usize, usize)> = if opts.windowed && feas.feasible {
        if feas.delta_used.is_finite() {
            let w = (feas.delta_used / grid.dt).floor() as usize;
            if w == 0 {
                return Err(SolveError::WindowTooShort);
            }
            let mut out = Vec::new();
            let mut hi = n;
            while hi > 0 {
                let lo = hi.saturating_sub(w);
                out.push((lo, hi));
                hi = lo;
            }
            out
        } else {
            vec![(0, n)]
        }
    } else {
        vec![(0, n)]
    };

    let mut y: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    y[n] = xi;
    let mut z: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut dk: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut window_iters = Vec::with_capacity(windows.len());
    let mut total_passes = 0usize;
    let mut final_distance = 0.0f64;

    let mode = match kind {
        SolveKind::Reflected => ReflectMode::Snell,
        SolveKind::Unreflected => ReflectMode::Unreflected,
    };

    for &(lo, hi) in &windows {
        let terminal = y[hi].clone();
        let mut converged = false;
        let mut last_distance = f64::INFINITY;
        for k in 1..=opts.max_outer {
            let mut pass =
                backward_sweep(problem, &law, &ens, &mode, lo, hi, &terminal, opts.root_tol)?;
            total_passes += 1;
            let mut dist = 0.0f64;
            let mut new_views: Vec<LawView> = Vec::with_capacity(hi - lo);
            for i in lo..hi {
                let view = ens.law(i, &pass.y[i - lo]);
                let gap = match opts.metric {
                    CurveMetric::MeanOnly => (view.mean() - law.view(i).mean()).abs(),
                    CurveMetric::Wasserstein => {
                        crate::lawtools::wasserstein_p(&view, law.view(i), p.max(1.0))?
                    }
                };
                dist = dist.max(gap);
                new_views.push(view);
            }
            last_distance = dist;
            if dist < opts.tol {
                for i in lo..hi {
                    y[i] = std::mem::take(&mut pass.y[i - lo]);
                    z[i] = std::mem::take(&mut pass.z[i - lo]);
                    dk[i] = std::mem::take(&mut pass.dk[i - lo]);
                }
                window_iters.push(k);
                final_distance = final_distance.max(dist);
                converged = true;
                break;
            }
            let damping = if !feas.feasible && opts.force { opts.damping } else { 1.0 };
            for (offset, view) in new_views.into_iter().enumerate() {
                let i = lo + offset;
                let updated = if damping < 1.0 {
                    blend_views(law.view(i), &view, damping)
                } else {
                    view
                };
                law.set_view(i, updated);
            }
        }
        if !converged {
            return Err(SolveError::PicardDiverged {
                max_outer: opts.max_outer,
                last_distance,
            });
        }
    }

    let mut bundle = assemble(problem, &ens, y, z, dk, law);
    bundle.diagnostics.picard_iters = total_passes;
    bundle.diagnostics.window_iters = window_iters;
    bundle.diagnostics.windows = windows;
    bundle.diagnostics.final_distance = final_distance;
    bundle.diagnostics.delta_used = Some(feas.delta_used);
    bundle.diagnostics.gamma_condition_value = feas.gamma_condition_value;
    bundle.diagnostics.converged = true;
    finalize_diagnostics(&mut bundle, problem);
    Ok(bundle)
}

/// Convex blend of two law views, used only for damped updates in force mode.
fn blend_views(old: &LawView, new: &LawView, weight_new: f64) -> LawView {
    if old.len() == new.len() {
        let mixed: Vec<f64> = (0..old.len())
            .map(|k| (1.0 - weight_new) * old.atom(k) + weight_new * new.atom(k))
            .collect();
        LawView::from_sample(mixed)
    } else {
        new.clone()
    }
}

/// Mean over units of sum_i |Y_i - h(Y_i, m_i)| dK_i evaluated against the
/// bundle's own law curve. Zero (to root tolerance) for reflected bundles by
/// construction; for penalized bundles it measures the distance from the
/// flatness condition and shrinks along the penalty schedule.
pub fn skorohod_residual(bundle: &SolutionBundle, problem: &ProblemSpec) -> f64 {
    let n = bundle.steps();
    let mut per_unit_total = vec![0.0f64; bundle.y[0].len().max(1)];
    let mut weighted = 0.0f64;
    let uniform = matches!(bundle.weights, UnitWeights::Uniform);
    for i in 0..n {
        let t = problem.grid.times[i];
        let law = bundle.law_curve.view(i);
        if uniform {
            for (u, &dk) in bundle.dk[i].iter().enumerate() {
                if dk != 0.0 {
                    let y = bundle.y[i][u];
                    let h = problem.obstacle.eval(t, bundle.x[i][u], y, law);
                    per_unit_total[u] += (y - h).abs() * dk;
                }
            }
        } else {
            let mut step_sum = 0.0;
            for (u, &dk) in bundle.dk[i].iter().enumerate() {
                if dk != 0.0 {
                    let y = bundle.y[i][u];
                    let h = problem.obstacle.eval(t, bundle.x[i][u], y, law);
                    step_sum += (y - h).abs() * dk * weight_of(bundle, i, u);
                }
            }
            weighted += step_sum;
        }
    }
    if uniform {
        per_unit_total.iter().sum::<f64>() / per_unit_total.len() as f64
    } else {
        weighted
    }
}

fn weight_of(bundle: &SolutionBundle, step: usize, unit: usize) -> f64 {
    match &bundle.weights {
        UnitWeights::Uniform => 1.0 / bundle.y[step].len() as f64,
        UnitWeights::PerStep(w) => w[step][unit],
    }
}

/// Time-zero value of the exercise rule encoded in a Monte-Carlo bundle: per
/// path, stop at the first step whose reflection is active (dK > 0), collect
/// the running driver cost up to the stop plus the barrier value there (the
/// terminal payoff when the rule never stops). Averaging realized cash flows
/// sidesteps the upward bias that iterated fitted maxima accumulate, so this
/// is the price readout for Monte-Carlo runs; returns None for weighted
/// (lattice) bundles, whose node values are already exact.
pub fn exercise_policy_value(bundle: &SolutionBundle, problem: &ProblemSpec) -> Option<f64> {
    if !matches!(bundle.weights, UnitWeights::Uniform) {
        return None;
    }
    let n = bundle.steps();
    let paths = bundle.y[0].len();
    let dt = problem.grid.dt;
    let mut acc = 0.0f64;
    for p in 0..paths {
        let mut value = 0.0f64;
        let mut stopped = false;
        for i in 0..n {
            if bundle.dk[i][p] > 0.0 {
                value += bundle.y[i][p];
                stopped = true;
                break;
            }
            let t = problem.grid.times[i];
            value += problem.driver.eval(
                t,
                bundle.x[i][p],
                bundle.y[i][p],
                &[bundle.z[i][p]],
                bundle.law_curve.view(i),
            ) * dt;
        }
        if !stopped {
            value += bundle.y[n][p];
        }
        acc += value;
    }
    Some(acc / paths as f64)
}

pub(crate) fn terminal_values(problem: &ProblemSpec, ens: &Ens) -> Vec<f64> {
    ens.states(problem.grid.steps)
        .iter()
        .map(|&x| problem.terminal.eval(x))
        .collect()
}

pub(crate) fn check_grid(problem: &ProblemSpec) -> Result<(), SolveError> {
    let c = problem.driver.c_f() * problem.grid.dt;
    if c >= 1.0 {
        return Err(SolveError::GridTooCoarse(c));
    }
    Ok(())
}

pub(crate) fn assemble(
    _problem: &ProblemSpec,
    ens: &Ens,
    y: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    dk: Vec<Vec<f64>>,
    law_curve: LawCurve,
) -> SolutionBundle {
    SolutionBundle {
        y,
        z,
        dk,
        x: ens.x_columns(),
        weights: ens.weights(),
        law_curve,
        diagnostics: Diagnostics::default(),
    }
}

pub(crate) fn finalize_diagnostics(bundle: &mut SolutionBundle, problem: &ProblemSpec) {
    bundle.diagnostics.skorohod_residual = skorohod_residual(bundle, problem);
    bundle.diagnostics.constraint_violation = bundle.constraint_violation(problem);
    bundle.diagnostics.max_mean_jump = bundle.max_mean_jump();
}
