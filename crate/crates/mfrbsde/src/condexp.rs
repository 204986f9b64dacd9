//! Conditional-expectation engines: polynomial least-squares regression over
//! Monte-Carlo paths, and exact one-step expectations on a recombining
//! binomial tree built from the forward model's exact transition applied to
//! two-point shocks of mean 0 and variance dt.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::{ForwardModel, TimeGrid};
use crate::par;

#[derive(Debug, Error)]
pub enum CondExpError {
    #[error("regression needs at least {needed} rows for degree {degree}, got {got}")]
    TooFewRows { needed: usize, degree: usize, got: usize },
    #[error("rank-deficient design matrix with ridge = 0; set ridge > 0")]
    RankDeficient,
    #[error("states ({states}) and targets ({targets}) have incompatible lengths")]
    SizeMismatch { states: usize, targets: usize },
    #[error("Monte-Carlo z estimation needs the Brownian increments")]
    MissingIncrements,
}

/// Least-squares projection on monomials 1, x, ..., x^d with standardized
/// columns and an optional ridge on the non-intercept block.
#[derive(Debug, Clone, Copy)]
pub struct RegressionEngine {
    pub degree: usize,
    pub ridge: f64,
}

impl Default for RegressionEngine {
    fn default() -> Self {
        RegressionEngine { degree: 3, ridge: 1e-8 }
    }
}

impl RegressionEngine {
    pub fn new(degree: usize, ridge: f64) -> Self {
        RegressionEngine { degree, ridge }
    }

    /// Fit targets on basis(states) and evaluate the fit back at states.
    /// One chunked pass accumulates raw power sums and cross moments in a
    /// fixed combination order; the standardization (zero mean, unit
    /// variance per monomial column) is applied to the normal equations
    /// algebraically.
    pub fn project(&self, states: &[f64], targets: &[f64]) -> Result<Vec<f64>, CondExpError> {
        let n = states.len();
        if n != targets.len() {
            return Err(CondExpError::SizeMismatch { states: n, targets: targets.len() });
        }
        let dim = self.degree + 1;
        if n < dim {
            return Err(CondExpError::TooFewRows { needed: dim, degree: self.degree, got: n });
        }
        let nf = n as f64;
        let top = 2 * self.degree;

        // partial (power sums, cross moments) per fixed-size chunk
        let chunks = n.div_ceil(par::CHUNK);
        let partials: Vec<(Vec<f64>, Vec<f64>)> = par::map_indexed(chunks, |c| {
            let lo = c * par::CHUNK;
            let hi = ((c + 1) * par::CHUNK).min(n);
            let mut s = vec![0.0f64; top + 1]; // s[m] = sum of x^m
            let mut t = vec![0.0f64; dim]; // t[j] = sum of x^j * target
            for i in lo..hi {
                let x = states[i];
                let y = targets[i];
                let mut xp = 1.0;
                for (m, slot) in s.iter_mut().enumerate() {
                    *slot += xp;
                    if m < dim {
                        t[m] += xp * y;
                    }
                    xp *= x;
                }
            }
            (s, t)
        });
        let mut s = vec![0.0f64; top + 1];
        let mut t = vec![0.0f64; dim];
        for (ps, pt) in &partials {
            for (acc, v) in s.iter_mut().zip(ps) {
                *acc += v;
            }
            for (acc, v) in t.iter_mut().zip(pt) {
                *acc += v;
            }
        }

        let mut means = vec![0.0; dim];
        let mut scales = vec![0.0; dim];
        for j in 1..dim {
            means[j] = s[j] / nf;
            let var = s[2 * j] / nf - means[j] * means[j];
            scales[j] = if var > 1e-300 { var.sqrt() } else { 0.0 };
        }
        let degenerate = (1..dim).any(|j| scales[j] == 0.0);
        if degenerate && self.ridge == 0.0 {
            return Err(CondExpError::RankDeficient);
        }

        // normal equations in the standardized basis; the intercept column is
        // orthogonal to every centered column by construction
        let mut gram = DMatrix::<f64>::zeros(dim, dim);
        let mut rhs = DVector::<f64>::zeros(dim);
        gram[(0, 0)] = nf;
        rhs[0] = t[0];
        for j in 1..dim {
            if scales[j] == 0.0 {
                gram[(j, j)] = self.ridge * nf;
                continue;
            }
            for k in j..dim {
                if scales[k] == 0.0 {
                    continue;
                }
                let centered = s[j + k] - means[j] * s[k] - means[k] * s[j] + nf * means[j] * means[k];
                let v = centered / (scales[j] * scales[k]);
                gram[(j, k)] = v;
                gram[(k, j)] = v;
            }
            gram[(j, j)] += self.ridge * nf;
            rhs[j] = (t[j] - means[j] * t[0]) / scales[j];
        }

        let beta = match gram.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => {
                if self.ridge == 0.0 {
                    return Err(CondExpError::RankDeficient);
                }
                gram.lu().solve(&rhs).ok_or(CondExpError::RankDeficient)?
            }
        };

        let beta: Vec<f64> = beta.iter().copied().collect();
        let means = means;
        let scales = scales;
        Ok(par::map_indexed(n, move |i| {
            let x = states[i];
            let mut acc = beta[0];
            let mut xp = 1.0;
            for j in 1..dim {
                xp *= x;
                if scales[j] > 0.0 {
                    acc += beta[j] * (xp - means[j]) / scales[j];
                }
            }
            acc
        }))
    }
}

/// Recombining tree for the forward model: node k at step i is the exact
/// transition map applied to k up-shocks and i-k down-shocks of size
/// sqrt(dt), each with probability 1/2. Exact for one-step conditional
/// expectations of tree functionals.
#[derive(Debug, Clone)]
pub struct LatticeEngine {
    pub grid: TimeGrid,
    pub forward: ForwardModel,
    nodes: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
    sqrt_dt: f64,
}

impl LatticeEngine {
    pub fn new(forward: &ForwardModel, grid: &TimeGrid) -> Self {
        let n = grid.steps;
        let sqrt_dt = grid.dt.sqrt();
        let nodes: Vec<Vec<f64>> = (0..=n)
            .map(|i| {
                (0..=i)
                    .map(|k| {
                        let w = (2.0 * k as f64 - i as f64) * sqrt_dt;
                        forward.state_at(grid.times[i], w)
                    })
                    .collect()
            })
            .collect();
        // binomial node probabilities, built recursively to stay in f64 range
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
        LatticeEngine { grid: grid.clone(), forward: *forward, nodes, weights, sqrt_dt }
    }

    pub fn nodes_at(&self, step: usize) -> &[f64] {
        &self.nodes[step]
    }

    pub fn weights_at(&self, step: usize) -> &[f64] {
        &self.weights[step]
    }

    /// Exact one-step expectation: parent k averages children k and k+1.
    pub fn one_step_expectation(&self, child_values: &[f64]) -> Vec<f64> {
        (0..child_values.len() - 1)
            .map(|k| 0.5 * (child_values[k] + child_values[k + 1]))
            .collect()
    }

    /// Martingale-representation proxy: (up - down) / (2 sqrt(dt)).
    pub fn one_step_z(&self, child_values: &[f64]) -> Vec<f64> {
        (0..child_values.len() - 1)
            .map(|k| (child_values[k + 1] - child_values[k]) / (2.0 * self.sqrt_dt))
            .collect()
    }

    /// Exact mean of a tree functional at a step.
    pub fn weighted_mean(&self, step: usize, values: &[f64]) -> f64 {
        self.weights[step]
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum()
    }
}

/// Engine selector consumed by the solvers.
pub enum Engine {
    MonteCarlo(RegressionEngine),
    Lattice(LatticeEngine),
}

/// Projection of step-(i+1) targets onto the step-i information set:
/// regression onto basis(states) in Monte-Carlo mode, the exact pairwise
/// average on the lattice (targets then live on the child nodes).
pub fn fit_condexp(
    engine: &Engine,
    states: &[f64],
    targets: &[f64],
) -> Result<Vec<f64>, CondExpError> {
    match engine {
        Engine::MonteCarlo(reg) => reg.project(states, targets),
        Engine::Lattice(lat) => {
            if targets.len() != states.len() + 1 {
                return Err(CondExpError::SizeMismatch {
                    states: states.len(),
                    targets: targets.len(),
                });
            }
            Ok(lat.one_step_expectation(targets))
        }
    }
}

/// Estimate Z_i ~ E[Y_{i+1} dB_i | state_i] / dt: regression of
/// targets * dB / dt in Monte-Carlo mode, the exact two-node difference
/// quotient on the lattice.
pub fn estimate_z(
    engine: &Engine,
    states: &[f64],
    targets: &[f64],
    db: Option<&[f64]>,
    dt: f64,
) -> Result<Vec<f64>, CondExpError> {
    match engine {
        Engine::MonteCarlo(reg) => {
            let db = db.ok_or(CondExpError::MissingIncrements)?;
            if db.len() != targets.len() {
                return Err(CondExpError::SizeMismatch { states: db.len(), targets: targets.len() });
            }
            let scaled: Vec<f64> = targets.iter().zip(db).map(|(t, b)| t * b / dt).collect();
            reg.project(states, &scaled)
        }
        Engine::Lattice(lat) => {
            if targets.len() != states.len() + 1 {
                return Err(CondExpError::SizeMismatch {
                    states: states.len(),
                    targets: targets.len(),
                });
            }
            Ok(lat.one_step_z(targets))
        }
    }
}
