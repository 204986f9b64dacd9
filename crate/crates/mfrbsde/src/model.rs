//! Problem description: time grid, forward state model, driver/obstacle/terminal
//! coefficients, standing-assumption validation and path simulation.
//!
//! Coefficients are opaque closures, so Lipschitz constants and monotonicity
//! flags are declared at construction and spot-checked by [`validate`] with
//! dense random probing.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use thiserror::Error;

use crate::par;

pub type DriverFn = Arc<dyn Fn(f64, f64, f64, &[f64], &LawView) -> f64 + Send + Sync>;
pub type ObstacleFn = Arc<dyn Fn(f64, f64, f64, &LawView) -> f64 + Send + Sync>;
pub type DominationFn = Arc<dyn Fn(f64, f64, f64, &LawView) -> f64 + Send + Sync>;
pub type TerminalFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("time grid needs horizon > 0 and steps >= 1, got T={horizon}, N={steps}")]
    InvalidGrid { horizon: f64, steps: usize },
    #[error("forward model needs vol >= 0, got {0}")]
    NegativeVol(f64),
    #[error("geometric forward model needs x0 > 0, got {0}")]
    NonPositiveStart(f64),
    #[error("obstacle slope gamma1 = {0} violates gamma1 < 1; y - h(y, m) must be strictly increasing")]
    Gamma1TooLarge(f64),
    #[error("negative Lipschitz constant {0}")]
    NegativeLipschitz(f64),
    #[error("p exponent must be 1 or > 1, got {0}")]
    InvalidExponent(f64),
    #[error("insurance bonus fraction mu must lie in (0, 1), got {0}")]
    InvalidMu(f64),
    #[error("insurance coefficient {name} must be nonnegative on [0, T] (found {value} at t = {t})")]
    NegativeCoefficient { name: &'static str, value: f64, t: f64 },
    #[error("path simulation needs paths >= 1")]
    NoPaths,
}

/// Uniform partition of [0, T].
#[derive(Debug, Clone)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
    pub dt: f64,
    pub times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self, ModelError> {
        if horizon.is_nan() || horizon <= 0.0 || steps == 0 {
            return Err(ModelError::InvalidGrid { horizon, steps });
        }
        let dt = horizon / steps as f64;
        let mut times: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
        times[steps] = horizon;
        Ok(TimeGrid { horizon, steps, dt, times })
    }

    pub fn same_as(&self, other: &TimeGrid) -> bool {
        self.steps == other.steps && (self.horizon - other.horizon).abs() <= 1e-12 * self.horizon.abs().max(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForwardKind {
    Brownian,
    ArithmeticBm { drift: f64, vol: f64 },
    GeometricBm { drift: f64, vol: f64 },
}

/// Markov forward state driving all randomness. Transitions are exact
/// (closed form per step), not Euler.
#[derive(Debug, Clone, Copy)]
pub struct ForwardModel {
    pub kind: ForwardKind,
    pub x0: f64,
}

impl ForwardModel {
    pub fn brownian(x0: f64) -> Self {
        ForwardModel { kind: ForwardKind::Brownian, x0 }
    }

    pub fn arithmetic(x0: f64, drift: f64, vol: f64) -> Result<Self, ModelError> {
        if vol < 0.0 {
            return Err(ModelError::NegativeVol(vol));
        }
        Ok(ForwardModel { kind: ForwardKind::ArithmeticBm { drift, vol }, x0 })
    }

    pub fn geometric(x0: f64, drift: f64, vol: f64) -> Result<Self, ModelError> {
        if vol < 0.0 {
            return Err(ModelError::NegativeVol(vol));
        }
        if x0 <= 0.0 {
            return Err(ModelError::NonPositiveStart(x0));
        }
        Ok(ForwardModel { kind: ForwardKind::GeometricBm { drift, vol }, x0 })
    }

    /// One exact transition given a Brownian increment `db` over `dt`.
    pub fn transition(&self, x: f64, dt: f64, db: f64) -> f64 {
        match self.kind {
            ForwardKind::Brownian => x + db,
            ForwardKind::ArithmeticBm { drift, vol } => x + drift * dt + vol * db,
            ForwardKind::GeometricBm { drift, vol } => {
                x * ((drift - 0.5 * vol * vol) * dt + vol * db).exp()
            }
        }
    }

    /// State reached from x0 at time t with accumulated Brownian value w.
    pub fn state_at(&self, t: f64, w: f64) -> f64 {
        match self.kind {
            ForwardKind::Brownian => self.x0 + w,
            ForwardKind::ArithmeticBm { drift, vol } => self.x0 + drift * t + vol * w,
            ForwardKind::GeometricBm { drift, vol } => {
                self.x0 * ((drift - 0.5 * vol * vol) * t + vol * w).exp()
            }
        }
    }
}

/// Summary of a one-dimensional law: its mean and a sorted sample.
/// Lattice engines carry the exact mean with a single-atom sample;
/// Monte-Carlo engines carry the full empirical sample. The atoms sit
/// behind a shared pointer with a lazy positive scale factor, so the
/// exponential-tilt transforms can rescale a law in O(1) per evaluation.
#[derive(Debug, Clone)]
pub struct LawView {
    mean: f64,
    sample: Arc<[f64]>,
    scale: f64,
}

impl LawView {
    pub fn from_sample(mut sample: Vec<f64>) -> Self {
        assert!(!sample.is_empty(), "law view needs at least one atom");
        sample.sort_by(f64::total_cmp);
        let mean = sample.iter().sum::<f64>() / sample.len() as f64;
        LawView { mean, sample: sample.into(), scale: 1.0 }
    }

    /// Point mass at `mean`.
    pub fn degenerate(mean: f64) -> Self {
        LawView { mean, sample: vec![mean].into(), scale: 1.0 }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// k-th order statistic.
    pub fn atom(&self, k: usize) -> f64 {
        self.sample[k] * self.scale
    }

    /// Sorted atoms, materialized.
    pub fn sorted_sample(&self) -> Vec<f64> {
        self.sample.iter().map(|v| v * self.scale).collect()
    }

    pub fn len(&self) -> usize {
        self.sample.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample.is_empty()
    }

    /// Shift the whole law by a constant (mean and every atom).
    pub fn shifted(&self, delta: f64) -> Self {
        LawView {
            mean: self.mean + delta,
            sample: self.sample.iter().map(|v| v * self.scale + delta).collect::<Vec<_>>().into(),
            scale: 1.0,
        }
    }

    /// Scale the whole law by a positive constant; the atoms are shared, so
    /// this is constant time.
    pub fn scaled(&self, factor: f64) -> Self {
        debug_assert!(factor > 0.0);
        LawView {
            mean: self.mean * factor,
            sample: Arc::clone(&self.sample),
            scale: self.scale * factor,
        }
    }
}

/// Driver f(t, x, y, z, law). Lipschitz constants and monotone flags are
/// declared; `validate` probes them.
#[derive(Clone)]
pub struct DriverSpec {
    eval: DriverFn,
    pub lip_y: f64,
    pub lip_z: f64,
    pub lip_m: f64,
    pub monotone_in_y: bool,
    pub monotone_in_m: bool,
    pub depends_on_z: bool,
    pub domination: Option<DominationSpec>,
}

impl DriverSpec {
    /// z-free driver (t, x, y, law) -> f.
    pub fn new<F>(lip_y: f64, lip_m: f64, f: F) -> Result<Self, ModelError>
    where
        F: Fn(f64, f64, f64, &LawView) -> f64 + Send + Sync + 'static,
    {
        check_nonneg(lip_y)?;
        check_nonneg(lip_m)?;
        Ok(DriverSpec {
            eval: Arc::new(move |t, x, y, _z, law| f(t, x, y, law)),
            lip_y,
            lip_z: 0.0,
            lip_m,
            monotone_in_y: false,
            monotone_in_m: false,
            depends_on_z: false,
            domination: None,
        })
    }

    /// Driver with a z slot (t, x, y, z, law) -> f.
    pub fn with_z<F>(lip_y: f64, lip_z: f64, lip_m: f64, f: F) -> Result<Self, ModelError>
    where
        F: Fn(f64, f64, f64, &[f64], &LawView) -> f64 + Send + Sync + 'static,
    {
        check_nonneg(lip_y)?;
        check_nonneg(lip_z)?;
        check_nonneg(lip_m)?;
        Ok(DriverSpec {
            eval: Arc::new(f),
            lip_y,
            lip_z,
            lip_m,
            monotone_in_y: false,
            monotone_in_m: false,
            depends_on_z: true,
            domination: None,
        })
    }

    pub fn monotone(mut self, in_y: bool, in_m: bool) -> Self {
        self.monotone_in_y = in_y;
        self.monotone_in_m = in_m;
        self
    }

    pub fn with_domination(mut self, dom: DominationSpec) -> Self {
        self.domination = Some(dom);
        self
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64, y: f64, z: &[f64], law: &LawView) -> f64 {
        (self.eval)(t, x, y, z, law)
    }

    /// Single Lipschitz constant covering every argument; this is the C_f
    /// used by the contraction analysis.
    pub fn c_f(&self) -> f64 {
        self.lip_y.max(self.lip_z).max(self.lip_m)
    }
}

/// z-free upper bound for a z-dependent driver.
#[derive(Clone)]
pub struct DominationSpec {
    eval: DominationFn,
    pub lip_y: f64,
    pub lip_m: f64,
}

impl DominationSpec {
    pub fn new<F>(lip_y: f64, lip_m: f64, f: F) -> Self
    where
        F: Fn(f64, f64, f64, &LawView) -> f64 + Send + Sync + 'static,
    {
        DominationSpec { eval: Arc::new(f), lip_y, lip_m }
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64, y: f64, law: &LawView) -> f64 {
        (self.eval)(t, x, y, law)
    }
}

/// Lower barrier h. The admissible set { y : y >= h(y, m) } is the half-line
/// above the reflection threshold because gamma1 < 1 is enforced here.
#[derive(Clone)]
pub struct ObstacleSpec {
    eval: ObstacleFn,
    pub gamma1: f64,
    pub gamma2: f64,
    pub monotone_in_y: bool,
    pub monotone_in_m: bool,
    /// Whether eval actually reads the forward state; false lets solvers
    /// compute one threshold per time step instead of one per node.
    pub state_dependent: bool,
    pub time_dependent: bool,
}

impl ObstacleSpec {
    /// Barrier h(y, law), constant in time and state.
    pub fn new<F>(gamma1: f64, gamma2: f64, h: F) -> Result<Self, ModelError>
    where
        F: Fn(f64, &LawView) -> f64 + Send + Sync + 'static,
    {
        Self::check_gammas(gamma1, gamma2)?;
        Ok(ObstacleSpec {
            eval: Arc::new(move |_t, _x, y, law| h(y, law)),
            gamma1,
            gamma2,
            monotone_in_y: false,
            monotone_in_m: false,
            state_dependent: false,
            time_dependent: false,
        })
    }

    /// Barrier that reads the forward state, h(t, x, y, law).
    pub fn with_state<F>(gamma1: f64, gamma2: f64, h: F) -> Result<Self, ModelError>
    where
        F: Fn(f64, f64, f64, &LawView) -> f64 + Send + Sync + 'static,
    {
        Self::check_gammas(gamma1, gamma2)?;
        Ok(ObstacleSpec {
            eval: Arc::new(h),
            gamma1,
            gamma2,
            monotone_in_y: false,
            monotone_in_m: false,
            state_dependent: true,
            time_dependent: true,
        })
    }

    /// Time-indexed barrier, state-free (produced by the theta transform).
    pub fn time_indexed<F>(gamma1: f64, gamma2: f64, h: F) -> Result<Self, ModelError>
    where
        F: Fn(f64, f64, &LawView) -> f64 + Send + Sync + 'static,
    {
        Self::check_gammas(gamma1, gamma2)?;
        Ok(ObstacleSpec {
            eval: Arc::new(move |t, _x, y, law| h(t, y, law)),
            gamma1,
            gamma2,
            monotone_in_y: false,
            monotone_in_m: false,
            state_dependent: false,
            time_dependent: true,
        })
    }

    fn check_gammas(gamma1: f64, gamma2: f64) -> Result<(), ModelError> {
        check_nonneg(gamma1)?;
        check_nonneg(gamma2)?;
        if gamma1 >= 1.0 {
            return Err(ModelError::Gamma1TooLarge(gamma1));
        }
        Ok(())
    }

    pub fn monotone(mut self, in_y: bool, in_m: bool) -> Self {
        self.monotone_in_y = in_y;
        self.monotone_in_m = in_m;
        self
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64, y: f64, law: &LawView) -> f64 {
        (self.eval)(t, x, y, law)
    }
}

#[derive(Clone)]
pub struct TerminalSpec {
    eval: TerminalFn,
}

impl TerminalSpec {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        TerminalSpec { eval: Arc::new(f) }
    }

    pub fn constant(c: f64) -> Self {
        TerminalSpec { eval: Arc::new(move |_| c) }
    }

    #[inline]
    pub fn eval(&self, x_terminal: f64) -> f64 {
        (self.eval)(x_terminal)
    }
}

/// A complete mean-field reflected BSDE problem on a grid.
#[derive(Clone)]
pub struct ProblemSpec {
    pub grid: TimeGrid,
    pub forward: ForwardModel,
    pub driver: DriverSpec,
    pub obstacle: ObstacleSpec,
    pub terminal: TerminalSpec,
    pub p_exponent: f64,
}

impl ProblemSpec {
    pub fn new(
        grid: TimeGrid,
        forward: ForwardModel,
        driver: DriverSpec,
        obstacle: ObstacleSpec,
        terminal: TerminalSpec,
        p_exponent: f64,
    ) -> Result<Self, ModelError> {
        if p_exponent.is_nan() || p_exponent < 1.0 {
            return Err(ModelError::InvalidExponent(p_exponent));
        }
        Ok(ProblemSpec { grid, forward, driver, obstacle, terminal, p_exponent })
    }
}

fn check_nonneg(v: f64) -> Result<f64, ModelError> {
    if v < 0.0 || !v.is_finite() {
        Err(ModelError::NegativeLipschitz(v))
    } else {
        Ok(v)
    }
}

// ---------------------------------------------------------------------------
// Path simulation
// ---------------------------------------------------------------------------

/// Simulated Brownian increments and forward states, stored per time step.
/// `db[i]` and `x[i]` hold one entry per path; `x` has N+1 columns.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub paths: usize,
    pub steps: usize,
    db: Vec<Vec<f64>>,
    x: Vec<Vec<f64>>,
    pub seed: u64,
}

impl PathEnsemble {
    pub fn db_at(&self, step: usize) -> &[f64] {
        &self.db[step]
    }

    pub fn states_at(&self, step: usize) -> &[f64] {
        &self.x[step]
    }
}

/// Gaussian increments with variance dt and exact forward transitions.
/// Each path draws from its own counter-based stream, so the ensemble is
/// identical for a given seed no matter how many threads run.
pub fn simulate_paths(
    forward: &ForwardModel,
    grid: &TimeGrid,
    paths: usize,
    seed: u64,
) -> Result<PathEnsemble, ModelError> {
    if paths == 0 {
        return Err(ModelError::NoPaths);
    }
    let n = grid.steps;
    let sqrt_dt = grid.dt.sqrt();
    let fwd = *forward;
    let dt = grid.dt;

    let rows: Vec<(Vec<f64>, Vec<f64>)> = par::map_indexed(paths, move |p| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(p as u64);
        let mut db_row = Vec::with_capacity(n);
        let mut x_row = Vec::with_capacity(n + 1);
        let mut x = fwd.x0;
        x_row.push(x);
        for _ in 0..n {
            let g: f64 = StandardNormal.sample(&mut rng);
            let db = g * sqrt_dt;
            db_row.push(db);
            x = fwd.transition(x, dt, db);
            x_row.push(x);
        }
        (db_row, x_row)
    });

    let mut db = vec![vec![0.0; paths]; n];
    let mut x = vec![vec![0.0; paths]; n + 1];
    for (p, (db_row, x_row)) in rows.iter().enumerate() {
        for i in 0..n {
            db[i][p] = db_row[i];
        }
        for i in 0..=n {
            x[i][p] = x_row[i];
        }
    }
    Ok(PathEnsemble { paths, steps: n, db, x, seed })
}

// ---------------------------------------------------------------------------
// Insurance example
// ---------------------------------------------------------------------------

/// Coefficients of the guaranteed endowment contract with a surrender option:
/// driver alpha_t - delta_t y + beta_t max(theta_t, y - m) and barrier
/// u - c(y) + mu (m - u)^+. The terminal payoff is max(guarantee, x_T).
pub struct InsuranceParams {
    pub alpha: TimeFn,
    pub beta: TimeFn,
    pub theta: TimeFn,
    pub delta_rate: TimeFn,
    pub u: f64,
    pub mu: f64,
    pub fee: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub fee_lip: f64,
    pub guarantee: f64,
}

impl InsuranceParams {
    /// alpha = 0.1, beta = 0.05, theta = 0, delta = 0.03, u = 1, mu = 0.5,
    /// c(y) = 0.01 y, guarantee 1.2.
    pub fn defaults() -> Self {
        InsuranceParams {
            alpha: Arc::new(|_| 0.1),
            beta: Arc::new(|_| 0.05),
            theta: Arc::new(|_| 0.0),
            delta_rate: Arc::new(|_| 0.03),
            u: 1.0,
            mu: 0.5,
            fee: Arc::new(|y| 0.01 * y),
            fee_lip: 0.01,
            guarantee: 1.2,
        }
    }
}

pub fn insurance_problem(
    params: InsuranceParams,
    grid: TimeGrid,
    forward: ForwardModel,
) -> Result<ProblemSpec, ModelError> {
    if !(params.mu > 0.0 && params.mu < 1.0) {
        return Err(ModelError::InvalidMu(params.mu));
    }
    // sup of the time coefficients on a dense subgrid
    let probe = |f: &TimeFn, name: &'static str, require_nonneg: bool| -> Result<f64, ModelError> {
        let mut sup = 0.0f64;
        for k in 0..=1000 {
            let t = grid.horizon * k as f64 / 1000.0;
            let v = f(t);
            if require_nonneg && v < 0.0 {
                return Err(ModelError::NegativeCoefficient { name, value: v, t });
            }
            sup = sup.max(v.abs());
        }
        Ok(sup)
    };
    let sup_beta = probe(&params.beta, "beta", true)?;
    probe(&params.theta, "theta", true)?;
    let sup_delta = probe(&params.delta_rate, "delta_rate", false)?;

    let lip_y = sup_delta + sup_beta;
    let lip_m = sup_beta;

    let alpha = params.alpha.clone();
    let beta = params.beta.clone();
    let theta = params.theta.clone();
    let delta = params.delta_rate.clone();
    let driver_fn = move |t: f64, _x: f64, y: f64, law: &LawView| -> f64 {
        alpha(t) - delta(t) * y + beta(t) * (theta(t)).max(y - law.mean())
    };
    // f <= alpha + |delta||y| + beta (|theta| + |y| + |m|) pointwise
    let (da, db_, dth, dd) = (
        params.alpha.clone(),
        params.beta.clone(),
        params.theta.clone(),
        params.delta_rate.clone(),
    );
    let dom = DominationSpec::new(lip_y, lip_m, move |t, _x, y, law| {
        da(t) + dd(t).abs() * y.abs() + db_(t) * (dth(t).abs() + y.abs() + law.mean().abs())
    });
    let driver = DriverSpec::new(lip_y, lip_m, driver_fn)?
        .monotone(sup_delta == 0.0, sup_beta == 0.0)
        .with_domination(dom);

    let (u, mu, fee) = (params.u, params.mu, params.fee.clone());
    let obstacle = ObstacleSpec::new(params.fee_lip, params.mu, move |y, law: &LawView| {
        u - fee(y) + mu * (law.mean() - u).max(0.0)
    })?
    .monotone(params.fee_lip == 0.0, true);

    let g = params.guarantee;
    let terminal = TerminalSpec::new(move |x| g.max(x));

    ProblemSpec::new(grid, forward, driver, obstacle, terminal, 2.0)
}

/// The fully-defaulted insurance contract on a geometric forward
/// (x0 = 1, drift 0, vol 0.2).
pub fn insurance_default_problem(grid: TimeGrid) -> ProblemSpec {
    let forward = ForwardModel::geometric(1.0, 0.0, 0.2).expect("valid defaults");
    insurance_problem(InsuranceParams::defaults(), grid, forward).expect("valid defaults")
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Worst value observed by the probe (meaning depends on the check).
    pub worst: f64,
    pub witness: String,
}

/// Per-assumption pass/fail report. `h1_ok` gates the fixed-point theory,
/// `gamma_feasible` the contraction window, `h2_monotone_*` the penalization
/// convergence theorem. Monotonicity violations are reported but do not stop
/// either scheme from running.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<CheckOutcome>,
    pub h1_ok: bool,
    pub gamma_feasible: bool,
    pub h2_driver_monotone_m: bool,
    pub h2_obstacle_monotone: bool,
    pub penalization_theorem_applies: bool,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Probe ranges used by `validate`.
#[derive(Debug, Clone)]
pub struct ProbeBox {
    pub y: (f64, f64),
    pub m: (f64, f64),
    pub z: (f64, f64),
}

impl Default for ProbeBox {
    fn default() -> Self {
        ProbeBox { y: (-2.0, 2.0), m: (-2.0, 2.0), z: (-2.0, 2.0) }
    }
}

/// Spot-check the standing assumptions on `samples` random probe points:
/// terminal compatibility xi >= h(xi, E xi), declared Lipschitz bounds,
/// declared monotone flags, gamma1 < 1 and the gamma feasibility condition
/// for the declared exponent.
pub fn validate(problem: &ProblemSpec, samples: usize) -> ValidationReport {
    validate_with(problem, samples, &ProbeBox::default(), 777)
}

pub fn validate_with(
    problem: &ProblemSpec,
    samples: usize,
    probe_box: &ProbeBox,
    seed: u64,
) -> ValidationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    let tol = 1e-9;

    // Terminal compatibility on a simulated terminal sample.
    let term_paths = samples.clamp(64, 20_000);
    let ensemble = simulate_paths(&problem.forward, &problem.grid, term_paths, seed ^ 0x5eed)
        .expect("terminal probe ensemble");
    let xi: Vec<f64> = ensemble
        .states_at(problem.grid.steps)
        .iter()
        .map(|&x| problem.terminal.eval(x))
        .collect();
    let law = LawView::from_sample(xi.clone());
    let mut worst_margin = f64::INFINITY;
    let mut worst_x = 0.0;
    for (k, &v) in xi.iter().enumerate() {
        let margin = v - problem.obstacle.eval(problem.grid.horizon, ensemble.states_at(problem.grid.steps)[k], v, &law);
        if margin < worst_margin {
            worst_margin = margin;
            worst_x = ensemble.states_at(problem.grid.steps)[k];
        }
    }
    checks.push(CheckOutcome {
        name: "terminal_compatibility",
        passed: worst_margin >= -tol,
        worst: worst_margin,
        witness: format!("min of xi - h(xi, law(xi)) = {worst_margin:.6e} at x_T = {worst_x:.6}"),
    });

    // gamma1 < 1 holds by construction; report the value.
    checks.push(CheckOutcome {
        name: "gamma1_lt_1",
        passed: problem.obstacle.gamma1 < 1.0,
        worst: problem.obstacle.gamma1,
        witness: format!("gamma1 = {}", problem.obstacle.gamma1),
    });

    let uni = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| Uniform::new(lo, hi).unwrap().sample(rng);
    let t_range = (0.0, problem.grid.horizon);
    let x_probe = x_probe_range(&problem.forward, problem.grid.horizon);

    // Lipschitz slopes by random secants, one argument varied at a time.
    let mut max_fy = 0.0f64;
    let mut max_fz = 0.0f64;
    let mut max_fm = 0.0f64;
    let mut max_hy = 0.0f64;
    let mut max_hm = 0.0f64;
    let mut dom_margin = f64::INFINITY;
    let mut mono_fy = f64::INFINITY;
    let mut mono_fm = f64::INFINITY;
    let mut mono_hy = f64::INFINITY;
    let mut mono_hm = f64::INFINITY;
    for _ in 0..samples {
        let t = uni(&mut rng, t_range.0, t_range.1);
        let x = uni(&mut rng, x_probe.0, x_probe.1);
        let y1 = uni(&mut rng, probe_box.y.0, probe_box.y.1);
        let y2 = uni(&mut rng, probe_box.y.0, probe_box.y.1);
        let z1 = uni(&mut rng, probe_box.z.0, probe_box.z.1);
        let z2 = uni(&mut rng, probe_box.z.0, probe_box.z.1);
        let m1 = uni(&mut rng, probe_box.m.0, probe_box.m.1);
        let dm = uni(&mut rng, 0.01, 1.0);
        let law1 = LawView::degenerate(m1);
        let law2 = law1.shifted(dm);

        if (y1 - y2).abs() > 1e-8 {
            let s = (problem.driver.eval(t, x, y1, &[z1], &law1)
                - problem.driver.eval(t, x, y2, &[z1], &law1))
                / (y1 - y2);
            max_fy = max_fy.max(s.abs());
            mono_fy = mono_fy.min(s);
            let sh = (problem.obstacle.eval(t, x, y1, &law1)
                - problem.obstacle.eval(t, x, y2, &law1))
                / (y1 - y2);
            max_hy = max_hy.max(sh.abs());
            mono_hy = mono_hy.min(sh);
        }
        if (z1 - z2).abs() > 1e-8 {
            let s = (problem.driver.eval(t, x, y1, &[z1], &law1)
                - problem.driver.eval(t, x, y1, &[z2], &law1))
                / (z1 - z2);
            max_fz = max_fz.max(s.abs());
        }
        // shift coupling: d_p(law1, law2) = dm for every p
        let s = (problem.driver.eval(t, x, y1, &[z1], &law2)
            - problem.driver.eval(t, x, y1, &[z1], &law1))
            / dm;
        max_fm = max_fm.max(s.abs());
        mono_fm = mono_fm.min(s);
        let sh = (problem.obstacle.eval(t, x, y1, &law2) - problem.obstacle.eval(t, x, y1, &law1)) / dm;
        max_hm = max_hm.max(sh.abs());
        mono_hm = mono_hm.min(sh);

        if let Some(dom) = &problem.driver.domination {
            let gap = dom.eval(t, x, y1, &law1) - problem.driver.eval(t, x, y1, &[z1], &law1);
            dom_margin = dom_margin.min(gap);
        }
    }

    let slope_tol = 1e-7;
    checks.push(CheckOutcome {
        name: "driver_lipschitz_y",
        passed: max_fy <= problem.driver.lip_y + slope_tol,
        worst: max_fy,
        witness: format!("max |df/dy| = {max_fy:.6} vs declared {}", problem.driver.lip_y),
    });
    checks.push(CheckOutcome {
        name: "driver_lipschitz_z",
        passed: max_fz <= problem.driver.lip_z + slope_tol,
        worst: max_fz,
        witness: format!("max |df/dz| = {max_fz:.6} vs declared {}", problem.driver.lip_z),
    });
    checks.push(CheckOutcome {
        name: "driver_lipschitz_m",
        passed: max_fm <= problem.driver.lip_m + slope_tol,
        worst: max_fm,
        witness: format!("max |df/dm| = {max_fm:.6} vs declared {}", problem.driver.lip_m),
    });
    checks.push(CheckOutcome {
        name: "obstacle_lipschitz_y",
        passed: max_hy <= problem.obstacle.gamma1 + slope_tol,
        worst: max_hy,
        witness: format!("max |dh/dy| = {max_hy:.6} vs declared {}", problem.obstacle.gamma1),
    });
    checks.push(CheckOutcome {
        name: "obstacle_lipschitz_m",
        passed: max_hm <= problem.obstacle.gamma2 + slope_tol,
        worst: max_hm,
        witness: format!("max |dh/dm| = {max_hm:.6} vs declared {}", problem.obstacle.gamma2),
    });
    if problem.driver.domination.is_some() {
        checks.push(CheckOutcome {
            name: "domination_margin",
            passed: dom_margin >= -tol,
            worst: dom_margin,
            witness: format!("min of dominating driver minus f = {dom_margin:.6e}"),
        });
    }

    // Monotone flags must agree with the finite-difference probes.
    let flag_checks = [
        ("driver_monotone_y_flag", problem.driver.monotone_in_y, mono_fy),
        ("driver_monotone_m_flag", problem.driver.monotone_in_m, mono_fm),
        ("obstacle_monotone_y_flag", problem.obstacle.monotone_in_y, mono_hy),
        ("obstacle_monotone_m_flag", problem.obstacle.monotone_in_m, mono_hm),
    ];
    let mut probed = [false; 4];
    for (k, (name, declared, min_slope)) in flag_checks.into_iter().enumerate() {
        let actually_monotone = min_slope >= -slope_tol;
        probed[k] = actually_monotone;
        checks.push(CheckOutcome {
            name,
            passed: declared == actually_monotone || (!declared && actually_monotone),
            worst: min_slope,
            witness: format!("declared {declared}, min slope probed {min_slope:.6}"),
        });
    }

    // gamma feasibility for the declared exponent
    let p = problem.p_exponent;
    let (g1, g2) = (problem.obstacle.gamma1, problem.obstacle.gamma2);
    let (value, feasible) = if p > 1.0 {
        let v = crate::analysis::gamma_condition(p, g1, g2).expect("p > 1").0;
        (v, v < 1.0)
    } else {
        (g1 + g2, g1 + g2 < 1.0)
    };
    checks.push(CheckOutcome {
        name: "gamma_feasibility",
        passed: feasible,
        worst: value,
        witness: if p > 1.0 {
            format!("gamma condition value {value:.6} (p = {p})")
        } else {
            format!("gamma1 + gamma2 = {value:.6} (p = 1)")
        },
    });

    let h1_names = [
        "terminal_compatibility",
        "gamma1_lt_1",
        "driver_lipschitz_y",
        "driver_lipschitz_z",
        "driver_lipschitz_m",
        "obstacle_lipschitz_y",
        "obstacle_lipschitz_m",
    ];
    let h1_ok = checks
        .iter()
        .filter(|c| h1_names.contains(&c.name))
        .all(|c| c.passed);
    let h2_driver_monotone_m = probed[1];
    let h2_obstacle_monotone = probed[2] && probed[3];

    ValidationReport {
        checks,
        h1_ok,
        gamma_feasible: feasible,
        h2_driver_monotone_m,
        h2_obstacle_monotone,
        penalization_theorem_applies: h1_ok && feasible && h2_driver_monotone_m && h2_obstacle_monotone,
    }
}

fn x_probe_range(forward: &ForwardModel, horizon: f64) -> (f64, f64) {
    let span = 4.0 * horizon.sqrt();
    match forward.kind {
        ForwardKind::Brownian => (forward.x0 - span, forward.x0 + span),
        ForwardKind::ArithmeticBm { drift, vol } => {
            let d = drift.abs() * horizon + vol * span;
            (forward.x0 - d, forward.x0 + d)
        }
        ForwardKind::GeometricBm { drift, vol } => {
            let d = drift.abs() * horizon + vol * span;
            (forward.x0 * (-d).exp(), forward.x0 * d.exp())
        }
    }
}
