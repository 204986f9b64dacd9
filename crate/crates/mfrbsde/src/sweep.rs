//! Shared backward-induction machinery: a unified view over the two
//! conditional-expectation engines and the one-pass sweep used by both the
//! reflected and the penalized solvers.
//!
//! The driver integral is discretized with the trapezoidal rule: the step-i
//! equation is y = A_i + (dt/2) f(t_i, x_i, y, z_i, m_i) with
//! A_i = E[ Y_{i+1} + (dt/2) f(t_{i+1}, X_{i+1}, Y_{i+1}, z_i, m_{i+1}) | state_i ].

use crate::condexp::{Engine, RegressionEngine};
use crate::lawtools::{self, LawCurve};
use crate::model::{LawView, PathEnsemble, ProblemSpec};
use crate::par;
use crate::solution::{SolveError, UnitWeights};

pub(crate) enum Ens<'a> {
    Mc { reg: &'a RegressionEngine, ensemble: &'a PathEnsemble, law_free: bool },
    Lat(&'a crate::condexp::LatticeEngine),
}

impl<'a> Ens<'a> {
    pub fn new(
        engine: &'a Engine,
        paths: Option<&'a PathEnsemble>,
        problem: &ProblemSpec,
    ) -> Result<Self, SolveError> {
        match engine {
            Engine::MonteCarlo(reg) => {
                let ensemble = paths.ok_or(SolveError::MissingPaths)?;
                if ensemble.steps != problem.grid.steps {
                    return Err(SolveError::Mismatch(format!(
                        "ensemble has {} steps, grid has {}",
                        ensemble.steps, problem.grid.steps
                    )));
                }
                // coefficients that cannot see the law permit a mean-only summary
                let law_free = problem.driver.lip_m == 0.0 && problem.obstacle.gamma2 == 0.0;
                Ok(Ens::Mc { reg, ensemble, law_free })
            }
            Engine::Lattice(lat) => {
                if !lat.grid.same_as(&problem.grid) {
                    return Err(SolveError::Mismatch(format!(
                        "lattice has {} steps over T = {}, grid has {} over T = {}",
                        lat.grid.steps, lat.grid.horizon, problem.grid.steps, problem.grid.horizon
                    )));
                }
                Ok(Ens::Lat(lat))
            }
        }
    }

    pub fn units(&self, step: usize) -> usize {
        match self {
            Ens::Mc { ensemble, .. } => ensemble.paths,
            Ens::Lat(_) => step + 1,
        }
    }

    pub fn states(&self, step: usize) -> &[f64] {
        match self {
            Ens::Mc { ensemble, .. } => ensemble.states_at(step),
            Ens::Lat(lat) => lat.nodes_at(step),
        }
    }

    pub fn mean(&self, step: usize, values: &[f64]) -> f64 {
        match self {
            Ens::Mc { .. } => values.iter().sum::<f64>() / values.len() as f64,
            Ens::Lat(lat) => lat.weighted_mean(step, values),
        }
    }

    /// Law summary of a cross-section. Lattice views keep the exact weighted
    /// mean as a single atom; Monte-Carlo views keep the whole sorted sample
    /// unless the coefficients cannot read the law anyway.
    pub fn law(&self, step: usize, values: &[f64]) -> LawView {
        match self {
            Ens::Mc { law_free, .. } => {
                if *law_free {
                    LawView::degenerate(self.mean(step, values))
                } else {
                    lawtools::law_of(values)
                }
            }
            Ens::Lat(lat) => LawView::degenerate(lat.weighted_mean(step, values)),
        }
    }

    pub fn weights(&self) -> UnitWeights {
        match self {
            Ens::Mc { .. } => UnitWeights::Uniform,
            Ens::Lat(lat) => UnitWeights::PerStep(
                (0..=lat.grid.steps).map(|i| lat.weights_at(i).to_vec()).collect(),
            ),
        }
    }

    pub fn x_columns(&self) -> Vec<Vec<f64>> {
        let n = match self {
            Ens::Mc { ensemble, .. } => ensemble.steps,
            Ens::Lat(lat) => lat.grid.steps,
        };
        (0..=n).map(|i| self.states(i).to_vec()).collect()
    }

}

/// How the backward step treats the obstacle.
pub(crate) enum ReflectMode<'a> {
    Unreflected,
    Snell,
    /// Frozen per-(step, unit) obstacle levels with penalty intensity.
    Penalized { level: f64, obstacle_levels: &'a [Vec<f64>] },
}

pub(crate) struct SweepResult {
    /// columns lo..=hi (the hi column is the terminal data, cloned)
    pub y: Vec<Vec<f64>>,
    /// columns lo..hi
    pub z: Vec<Vec<f64>>,
    /// columns lo..hi
    pub dk: Vec<Vec<f64>>,
}

/// One backward pass over steps hi-1..lo against a frozen law curve.
#[allow(clippy::too_many_arguments)]
pub(crate) fn backward_sweep(
    problem: &ProblemSpec,
    law: &LawCurve,
    ens: &Ens,
    mode: &ReflectMode,
    lo: usize,
    hi: usize,
    terminal: &[f64],
    root_tol: f64,
) -> Result<SweepResult, SolveError> {
    let grid = &problem.grid;
    let dt = grid.dt;
    let half_dt = 0.5 * dt;
    let window = hi - lo;

    let mut y_cols: Vec<Vec<f64>> = vec![Vec::new(); window + 1];
    let mut z_cols: Vec<Vec<f64>> = vec![Vec::new(); window];
    let mut dk_cols: Vec<Vec<f64>> = vec![Vec::new(); window];
    y_cols[window] = terminal.to_vec();

    for i in (lo..hi).rev() {
        let t_i = grid.times[i];
        let t_next = grid.times[i + 1];
        let x_i = ens.states(i);
        let x_next = ens.states(i + 1);
        let law_i = law.view(i);
        let law_next = law.view(i + 1);
        let y_next = &y_cols[i + 1 - lo];

        let driver = &problem.driver;
        let (a_col, z_col) = match ens {
            Ens::Mc { reg, ensemble, .. } => {
                let db = ensemble.db_at(i);
                let scaled: Vec<f64> =
                    par::map_indexed(y_next.len(), |p| y_next[p] * db[p] / dt);
                let z = reg.project(x_i, &scaled)?;
                let aug: Vec<f64> = par::map_indexed(y_next.len(), |p| {
                    y_next[p]
                        + half_dt * driver.eval(t_next, x_next[p], y_next[p], &[z[p]], law_next)
                });
                let a = reg.project(x_i, &aug)?;
                (a, z)
            }
            Ens::Lat(lat) => {
                let z = lat.one_step_z(y_next);
                let a = par::map_indexed(z.len(), |k| {
                    let up = y_next[k + 1]
                        + half_dt
                            * driver.eval(t_next, x_next[k + 1], y_next[k + 1], &[z[k]], law_next);
                    let dn = y_next[k]
                        + half_dt * driver.eval(t_next, x_next[k], y_next[k], &[z[k]], law_next);
                    0.5 * (up + dn)
                });
                (a, z)
            }
        };

        // reflection threshold: one root per step unless the barrier reads x
        let shared_threshold = match mode {
            ReflectMode::Snell if !problem.obstacle.state_dependent => Some(
                crate::snell::reflect_threshold_at(&problem.obstacle, law_i, t_i, 0.0, root_tol)?,
            ),
            _ => None,
        };

        let units = ens.units(i);
        let solved: Vec<Result<(f64, f64, f64), SolveError>> = par::map_indexed(units, |u| {
            let a = a_col[u];
            let zv = z_col[u];
            let x = x_i[u];
            let f = |y: f64| driver.eval(t_i, x, y, &[zv], law_i);
            match mode {
                ReflectMode::Unreflected => {
                    let y = implicit_fix(a, half_dt, &f)?;
                    Ok((y, zv, 0.0))
                }
                ReflectMode::Snell => {
                    let y_hat = implicit_fix(a, half_dt, &f)?;
                    let threshold = match shared_threshold {
                        Some(v) => v,
                        None => crate::snell::reflect_threshold_at(
                            &problem.obstacle,
                            law_i,
                            t_i,
                            x,
                            root_tol,
                        )?,
                    };
                    let y = y_hat.max(threshold);
                    Ok((y, zv, y - y_hat))
                }
                ReflectMode::Penalized { level, obstacle_levels } => {
                    let barrier = obstacle_levels[i][u];
                    let y_hat = implicit_fix(a, half_dt, &f)?;
                    if y_hat >= barrier || *level == 0.0 {
                        Ok((y_hat, zv, 0.0))
                    } else {
                        let n_dt = level * dt;
                        let denom = 1.0 + n_dt;
                        let mut y = (a + n_dt * barrier) / denom;
                        let mut ok = false;
                        for _ in 0..100 {
                            let y_new = (a + half_dt * f(y) + n_dt * barrier) / denom;
                            if (y_new - y).abs() <= 1e-14 * (1.0 + y_new.abs()) {
                                y = y_new;
                                ok = true;
                                break;
                            }
                            y = y_new;
                        }
                        if !ok {
                            return Err(SolveError::BranchInconsistency);
                        }
                        let dk = n_dt * (barrier - y).max(0.0);
                        Ok((y, zv, dk))
                    }
                }
            }
        });

        let mut y_col = Vec::with_capacity(units);
        let mut dk_col = Vec::with_capacity(units);
        for r in solved {
            let (y, _z, dk) = r?;
            y_col.push(y);
            dk_col.push(dk);
        }
        y_cols[i - lo] = y_col;
        z_cols[i - lo] = z_col;
        dk_cols[i - lo] = dk_col;
    }

    Ok(SweepResult { y: y_cols, z: z_cols, dk: dk_cols })
}

/// Fixed point of y = a + half_dt f(y); contracts because C_f dt < 1 is
/// checked at solver entry.
fn implicit_fix<F: Fn(f64) -> f64>(a: f64, half_dt: f64, f: &F) -> Result<f64, SolveError> {
    let mut y = a;
    for _ in 0..100 {
        let y_new = a + half_dt * f(y);
        if (y_new - y).abs() <= 1e-14 * (1.0 + y_new.abs()) {
            return Ok(y_new);
        }
        y = y_new;
    }
    Err(SolveError::ImplicitSolve)
}
