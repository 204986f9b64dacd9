//! Solvers for reflected backward stochastic differential equations of
//! mean-field type, where both the driver and the lower obstacle may depend
//! on the marginal law of the solution. Two routes to the same object: a
//! Snell-envelope fixed point iterated over contraction windows, and a
//! penalization scheme converging monotonically to the minimal solution.
//! Conditional expectations run on least-squares Monte-Carlo regression or
//! on an exact recombining lattice; an independent oracle module generates
//! reference values for testing.

pub mod analysis;
pub mod condexp;
pub mod lawtools;
pub mod model;
pub mod oracle;
pub mod penalty;
pub mod snell;
pub mod solution;

pub(crate) mod par;
pub(crate) mod sweep;

pub use condexp::{Engine, LatticeEngine, RegressionEngine};
pub use lawtools::{CurveMetric, LawCurve};
pub use model::{
    simulate_paths, validate, DriverSpec, ForwardModel, LawView, ObstacleSpec, PathEnsemble,
    ProblemSpec, TerminalSpec, TimeGrid,
};
pub use snell::{
    backward_pass, exercise_policy_value, picard_solve, reflect_threshold, skorohod_residual,
    PicardOptions,
};
pub use penalty::{base_solve, penalized_pass, penalty_solve, PenaltyOptions};
pub use solution::{Diagnostics, SolutionBundle, SolveError, UnitWeights};
