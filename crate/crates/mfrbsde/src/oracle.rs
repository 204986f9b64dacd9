//! Independent reference implementations used to generate ground truth for
//! the solver tests: a closed-form/RK4 integrator for linear mean-field
//! drivers, a textbook equal-probability binomial American put pricer, a
//! self-contained mean-field lattice solver, and the comparison harness.
//! These share nothing with the solver modules beyond the problem types.

use crate::model::{LawView, PathEnsemble, ProblemSpec, TimeGrid};

/// Deterministic mean curve of the linear mean-field equation with driver
/// a y + b m + c and deterministic terminal mean `xi`: the mean solves
/// m'(t) = -((a + b) m + c) with m(T) = xi. Closed form, sampled on the grid.
pub fn ode_linear_solve(a: f64, b: f64, c: f64, xi: f64, grid: &TimeGrid) -> Vec<f64> {
    let s = a + b;
    grid.times
        .iter()
        .map(|&t| {
            let tau = grid.horizon - t;
            if s == 0.0 {
                xi + c * tau
            } else {
                let kappa = c / s;
                (xi + kappa) * (s * tau).exp() - kappa
            }
        })
        .collect()
}

/// Fourth-order Runge-Kutta integration of the same backward equation,
/// `substeps` stages per grid interval; cross-checks the closed form.
pub fn ode_linear_rk4(a: f64, b: f64, c: f64, xi: f64, grid: &TimeGrid, substeps: usize) -> Vec<f64> {
    let s = a + b;
    let rhs = |m: f64| s * m + c; // dm/dtau with tau = T - t
    let n = grid.steps;
    let h = grid.dt / substeps as f64;
    let mut out = vec![0.0; n + 1];
    out[n] = xi;
    let mut m = xi;
    for i in (0..n).rev() {
        for _ in 0..substeps {
            let k1 = rhs(m);
            let k2 = rhs(m + 0.5 * h * k1);
            let k3 = rhs(m + 0.5 * h * k2);
            let k4 = rhs(m + h * k3);
            m += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        out[i] = m;
    }
    out
}

/// American put on an equal-probability recombining tree: log-space moves
/// (rate - vol^2/2) dt +- vol sqrt(dt) with probability 1/2 each, cash flows
/// discounted at `rate`, exercise allowed at every node.
pub fn american_binomial(
    strike: f64,
    vol: f64,
    rate: f64,
    horizon: f64,
    steps: usize,
    x0: f64,
) -> f64 {
    assert!(steps >= 1);
    let dt = horizon / steps as f64;
    let nudge = (rate - 0.5 * vol * vol) * dt;
    let spread = vol * dt.sqrt();
    let disc = (-rate * dt).exp();

    let node = |i: usize, k: usize| -> f64 {
        x0 * (nudge * i as f64 + spread * (2.0 * k as f64 - i as f64)).exp()
    };

    let mut values: Vec<f64> = (0..=steps).map(|k| (strike - node(steps, k)).max(0.0)).collect();
    for i in (0..steps).rev() {
        for k in 0..=i {
            let cont = disc * 0.5 * (values[k] + values[k + 1]);
            let exercise = (strike - node(i, k)).max(0.0);
            values[k] = cont.max(exercise);
        }
        values.truncate(i + 1);
    }
    values[0]
}

/// Self-contained unreflected mean-field lattice solver (z-free drivers):
/// backward Euler in the driver with a scalar fixed point per node, and a
/// Picard iteration on the deterministic mean curve. Returns node values per
/// step plus the mean curve. Independent of the solver modules.
pub fn mean_field_lattice_solve(
    problem: &ProblemSpec,
    picard_tol: f64,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let grid = &problem.grid;
    let n = grid.steps;
    let dt = grid.dt;
    let sqrt_dt = dt.sqrt();

    let node = |i: usize, k: usize| -> f64 {
        problem.forward.state_at(grid.times[i], (2.0 * k as f64 - i as f64) * sqrt_dt)
    };

    // binomial weights per step
    let mut weights: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    weights.push(vec![1.0]);
    for i in 1..=n {
        let prev = &weights[i - 1];
        let mut w = vec![0.0; i + 1];
        for k in 0..i {
            w[k] += 0.5 * prev[k];
            w[k + 1] += 0.5 * prev[k];
        }
        weights.push(w);
    }

    let xi: Vec<f64> = (0..=n).map(|k| problem.terminal.eval(node(n, k))).collect();
    let terminal_mean: f64 = weights[n].iter().zip(&xi).map(|(w, v)| w * v).sum();

    let mut means = vec![terminal_mean; n + 1];
    let mut values: Vec<Vec<f64>> = Vec::new();
    for _ in 0..500 {
        values = vec![Vec::new(); n + 1];
        values[n] = xi.clone();
        for i in (0..n).rev() {
            let t = grid.times[i];
            let law = LawView::degenerate(means[i]);
            let mut col = Vec::with_capacity(i + 1);
            for k in 0..=i {
                let cont = 0.5 * (values[i + 1][k] + values[i + 1][k + 1]);
                let x = node(i, k);
                // backward Euler fixed point in the driver's y argument
                let mut y = cont;
                for _ in 0..200 {
                    let y_new = cont + dt * problem.driver.eval(t, x, y, &[0.0], &law);
                    if (y_new - y).abs() <= 1e-15 * (1.0 + y_new.abs()) {
                        y = y_new;
                        break;
                    }
                    y = y_new;
                }
                col.push(y);
            }
            values[i] = col;
        }
        let mut dist = 0.0f64;
        let mut new_means = vec![terminal_mean; n + 1];
        for i in 0..n {
            let m: f64 = weights[i].iter().zip(&values[i]).map(|(w, v)| w * v).sum();
            dist = dist.max((m - means[i]).abs());
            new_means[i] = m;
        }
        new_means[n] = terminal_mean;
        means = new_means;
        if dist < picard_tol {
            break;
        }
    }
    (values, means)
}

#[derive(Debug, Clone)]
pub enum ComparisonVerdict {
    /// Y <= Y' nodewise; the reported value is the largest (Y - Y')^+ seen.
    Pass { max_violation: f64 },
    /// A hypothesis probe failed, so the ordering claim is not asserted.
    Skipped { reason: String },
    Fail { max_violation: f64, step: usize, node: usize },
}

/// Comparison harness for unreflected mean-field solutions: probe the
/// ordering hypotheses (ordered terminals, ordered drivers along the probe
/// set, driver of the smaller problem nondecreasing in the mean), then solve
/// both problems with the independent lattice solver and check Y <= Y'
/// nodewise.
pub fn comparison_check(
    problem_a: &ProblemSpec,
    problem_b: &ProblemSpec,
    probe: &PathEnsemble,
) -> ComparisonVerdict {
    let tol = 1e-9;
    let n = problem_a.grid.steps;

    // (a) terminal ordering on the probe ensemble
    for &x in probe.states_at(probe.steps) {
        let (xa, xb) = (problem_a.terminal.eval(x), problem_b.terminal.eval(x));
        if xa > xb + tol {
            return ComparisonVerdict::Skipped {
                reason: format!("terminal ordering fails at x = {x}: {xa} > {xb}"),
            };
        }
    }
    // (b) driver ordering and (c) monotonicity in the mean on probe points
    for i in 0..=n.min(probe.steps) {
        let t = problem_a.grid.times[i.min(problem_a.grid.steps)];
        for (j, &x) in probe.states_at(i).iter().enumerate().take(64) {
            let y = -1.5 + 3.0 * (j as f64 / 63.0);
            let m = -1.0 + 2.0 * (j as f64 / 63.0);
            let law = LawView::degenerate(m);
            let fa = problem_a.driver.eval(t, x, y, &[0.0], &law);
            let fb = problem_b.driver.eval(t, x, y, &[0.0], &law);
            if fa > fb + tol {
                return ComparisonVerdict::Skipped {
                    reason: format!("driver ordering fails at (t, x, y, m) = ({t}, {x}, {y}, {m})"),
                };
            }
            let bumped = problem_a.driver.eval(t, x, y, &[0.0], &law.shifted(0.1));
            if bumped < fa - tol {
                return ComparisonVerdict::Skipped {
                    reason: format!(
                        "driver of the smaller problem decreases in the mean at (t, x, y, m) = ({t}, {x}, {y}, {m})"
                    ),
                };
            }
        }
    }

    let (va, _) = mean_field_lattice_solve(problem_a, 1e-12);
    let (vb, _) = mean_field_lattice_solve(problem_b, 1e-12);
    let mut max_violation = 0.0f64;
    let mut worst = (0usize, 0usize);
    for i in 0..=n {
        for k in 0..va[i].len() {
            let excess = va[i][k] - vb[i][k];
            if excess > max_violation {
                max_violation = excess;
                worst = (i, k);
            }
        }
    }
    if max_violation <= 1e-10 {
        ComparisonVerdict::Pass { max_violation }
    } else {
        ComparisonVerdict::Fail { max_violation, step: worst.0, node: worst.1 }
    }
}
