//! Solution container shared by the fixed-point and penalization solvers,
//! plus the solver error type.

use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::condexp::CondExpError;
use crate::lawtools::{LawCurve, LawError};
use crate::model::ProblemSpec;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("refine grid: driver Lipschitz constant times dt = {0:.4} must stay below 1")]
    GridTooCoarse(f64),
    #[error("implicit scalar solve did not converge within 100 iterations")]
    ImplicitSolve,
    #[error("penalized branch solve inconsistent after 100 inner iterations")]
    BranchInconsistency,
    #[error("reflection threshold bracket expansion exceeded 1000 doublings (pathological obstacle)")]
    ThresholdBracket,
    #[error("Picard iteration hit the cap of {max_outer} passes; last curve distance {last_distance:.3e}")]
    PicardDiverged { max_outer: usize, last_distance: f64 },
    #[error("no contraction window exists: feasibility condition value {value:.6} >= 1 (pass force to run anyway)")]
    Infeasible { value: f64 },
    #[error("contraction window is shorter than one grid step; refine the grid")]
    WindowTooShort,
    #[error("Monte-Carlo engine needs a simulated path ensemble")]
    MissingPaths,
    #[error("z-dependent driver requires a declared dominating z-free driver")]
    DominationRequired,
    #[error("driver has no declared dominating driver")]
    DominationMissing,
    #[error("domination violated: f = {f_value} > {dom_value} at (t, x, y, z, m) = ({t}, {x}, {y}, {z}, {m})")]
    DominationViolated { f_value: f64, dom_value: f64, t: f64, x: f64, y: f64, z: f64, m: f64 },
    #[error("upper-bound sandwich violated at level {level}: node value exceeds the dominated solution by {gap:.3e}")]
    SandwichViolated { level: f64, gap: f64 },
    #[error("ensemble does not match the problem grid: {0}")]
    Mismatch(String),
    #[error(transparent)]
    CondExp(#[from] CondExpError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Law(#[from] LawError),
}

/// Cross-sectional weights per time step. Monte-Carlo units are equally
/// weighted; lattice nodes carry binomial probabilities.
#[derive(Debug, Clone)]
pub enum UnitWeights {
    Uniform,
    PerStep(Vec<Vec<f64>>),
}

/// Per-level penalization statistics.
#[derive(Debug, Clone)]
pub struct PenaltyLevelStats {
    pub level: f64,
    /// sup over (step, unit) of |Y_level - Y_prev|
    pub sup_update: f64,
    /// max over (step, unit) of (Y_prev - Y_level)^+
    pub monotonicity_defect: f64,
    /// E of sum_i (Y_i - h(Y_prev_i, m_prev_i))^- dt
    pub constraint_defect: f64,
    pub skorohod_residual: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    /// total number of backward passes performed
    pub picard_iters: usize,
    /// passes per contraction window, rightmost window first
    pub window_iters: Vec<usize>,
    /// step-index ranges of the windows, rightmost first
    pub windows: Vec<(usize, usize)>,
    pub final_distance: f64,
    pub delta_used: Option<f64>,
    pub gamma_condition_value: f64,
    pub skorohod_residual: f64,
    pub constraint_violation: f64,
    /// final penalty intensity (0 for purely reflected or unreflected solves)
    pub penalty_level: f64,
    pub penalty_levels: Vec<PenaltyLevelStats>,
    pub converged: bool,
    /// exponential tilt applied internally (0 when none)
    pub theta_used: f64,
    /// max |E[Y_{i+1}] - E[Y_i]| of the returned solution
    pub max_mean_jump: f64,
}

/// Discrete solution triple plus the forward states it was computed on.
/// Columns are indexed by time step; `y` and `x` have N+1 columns, `z` and
/// `dk` have N. `law_curve` is the curve the final backward pass was solved
/// against; at a converged fixed point it coincides with the law of `y` up
/// to the Picard tolerance.
#[derive(Debug, Clone)]
pub struct SolutionBundle {
    pub y: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub dk: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
    pub weights: UnitWeights,
    pub law_curve: LawCurve,
    pub diagnostics: Diagnostics,
}

impl SolutionBundle {
    pub fn steps(&self) -> usize {
        self.y.len() - 1
    }

    pub fn weighted_mean(&self, step: usize, values: &[f64]) -> f64 {
        match &self.weights {
            UnitWeights::Uniform => values.iter().sum::<f64>() / values.len() as f64,
            UnitWeights::PerStep(w) => w[step].iter().zip(values).map(|(a, b)| a * b).sum(),
        }
    }

    pub fn mean_y(&self, step: usize) -> f64 {
        self.weighted_mean(step, &self.y[step])
    }

    pub fn mean_y_curve(&self) -> Vec<f64> {
        (0..self.y.len()).map(|i| self.mean_y(i)).collect()
    }

    pub fn std_y(&self, step: usize) -> f64 {
        let m = self.mean_y(step);
        let var = match &self.weights {
            UnitWeights::Uniform => {
                self.y[step].iter().map(|v| (v - m) * (v - m)).sum::<f64>()
                    / self.y[step].len() as f64
            }
            UnitWeights::PerStep(w) => w[step]
                .iter()
                .zip(&self.y[step])
                .map(|(wk, v)| wk * (v - m) * (v - m))
                .sum(),
        };
        var.max(0.0).sqrt()
    }

    pub fn mean_z(&self, step: usize) -> f64 {
        self.weighted_mean(step, &self.z[step])
    }

    /// Mean of the cumulative increasing process K at each grid time;
    /// entry 0 is zero and the column is nondecreasing.
    pub fn mean_cumulative_k(&self) -> Vec<f64> {
        let n = self.steps();
        let mut out = Vec::with_capacity(n + 1);
        out.push(0.0);
        let mut acc = 0.0;
        for i in 0..n {
            acc += self.weighted_mean(i, &self.dk[i]);
            out.push(acc);
        }
        out
    }

    /// max over (step, unit) of (h - y)^+ against the bundle's law curve.
    pub fn constraint_violation(&self, problem: &ProblemSpec) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.y.len() {
            worst = worst.max(self.constraint_violation_at(i, problem));
        }
        worst
    }

    pub fn constraint_violation_at(&self, step: usize, problem: &ProblemSpec) -> f64 {
        let t = problem.grid.times[step];
        let law = self.law_curve.view(step);
        let mut worst = 0.0f64;
        for (u, &y) in self.y[step].iter().enumerate() {
            let h = problem.obstacle.eval(t, self.x[step][u], y, law);
            worst = worst.max(h - y);
        }
        worst.max(0.0)
    }

    /// Largest absolute gap between two bundles' y values over all steps.
    pub fn sup_abs_diff(&self, other: &SolutionBundle) -> f64 {
        let mut sup = 0.0f64;
        for (a, b) in self.y.iter().zip(&other.y) {
            for (va, vb) in a.iter().zip(b) {
                sup = sup.max((va - vb).abs());
            }
        }
        sup
    }

    /// max over (step, unit) of (self - other)^+; zero when self <= other.
    pub fn max_excess_over(&self, other: &SolutionBundle) -> f64 {
        let mut sup = 0.0f64;
        for (a, b) in self.y.iter().zip(&other.y) {
            for (va, vb) in a.iter().zip(b) {
                sup = sup.max(va - vb);
            }
        }
        sup.max(0.0)
    }

    pub fn max_mean_jump(&self) -> f64 {
        let means = self.mean_y_curve();
        means.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
    }
}
