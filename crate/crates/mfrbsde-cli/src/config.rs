//! JSON configuration: grid, forward model, problem (builtin or custom
//! expression-based coefficients), scheme, engine, tolerances and output.
//! Custom coefficients are polynomial expressions in (t, x, y, z, m) with
//! max and positive-part combinators, so they stay serializable and their
//! Lipschitz constants can be probed numerically.

use serde::Deserialize;
use std::sync::Arc;

use mfrbsde::model::{
    insurance_problem, DriverSpec, ForwardModel, InsuranceParams, ObstacleSpec, ProblemSpec,
    TerminalSpec, TimeGrid,
};
use mfrbsde::{CurveMetric, LawView};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub grid: GridSection,
    pub forward: ForwardSection,
    pub problem: ProblemSection,
    #[serde(default)]
    pub scheme: SchemeSection,
    #[serde(default)]
    pub engine: EngineSection,
    #[serde(default)]
    pub tolerances: ToleranceSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForwardSection {
    pub kind: ForwardKindSection,
    pub x0: f64,
    #[serde(default)]
    pub drift: f64,
    #[serde(default)]
    pub vol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForwardKindSection {
    Brownian,
    ArithmeticBm,
    GeometricBm,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "builtin", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSection {
    Insurance {
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default)]
        theta: f64,
        #[serde(default = "default_delta_rate")]
        delta_rate: f64,
        #[serde(default = "default_u")]
        u: f64,
        #[serde(default = "default_mu")]
        mu: f64,
        #[serde(default = "default_fee_slope")]
        fee_slope: f64,
        #[serde(default = "default_guarantee")]
        guarantee: f64,
    },
    AmericanPut {
        strike: f64,
        #[serde(default)]
        rate: f64,
    },
    LinearMf {
        a: f64,
        b: f64,
        c: f64,
        /// terminal payoff: a constant, or the forward state itself
        terminal: LinearTerminal,
    },
    Custom {
        #[serde(default = "default_p")]
        p: f64,
        driver: Expr,
        obstacle: Option<Expr>,
        terminal: Option<Expr>,
        /// optional explicit constants; probed on a box when absent
        lip_y: Option<f64>,
        lip_z: Option<f64>,
        lip_m: Option<f64>,
        gamma1: Option<f64>,
        gamma2: Option<f64>,
    },
}

fn default_alpha() -> f64 {
    0.1
}
fn default_beta() -> f64 {
    0.05
}
fn default_delta_rate() -> f64 {
    0.03
}
fn default_u() -> f64 {
    1.0
}
fn default_mu() -> f64 {
    0.5
}
fn default_fee_slope() -> f64 {
    0.01
}
fn default_guarantee() -> f64 {
    1.2
}
fn default_p() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearTerminal {
    State,
    Const(f64),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    #[serde(default)]
    pub kind: SchemeKind,
    #[serde(default = "default_true")]
    pub windowed: bool,
    #[serde(default = "default_true")]
    pub auto_theta: bool,
    #[serde(default = "default_max_exp")]
    pub max_penalty_exponent: u32,
}

fn default_true() -> bool {
    true
}
fn default_max_exp() -> u32 {
    10
}

impl Default for SchemeSection {
    fn default() -> Self {
        SchemeSection {
            kind: SchemeKind::Snell,
            windowed: true,
            auto_theta: true,
            max_penalty_exponent: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[clap(rename_all = "snake_case")]
pub enum SchemeKind {
    #[default]
    Snell,
    Penalty,
    Both,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    #[serde(default)]
    pub kind: EngineKind,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_degree")]
    pub basis_degree: usize,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
}

fn default_paths() -> usize {
    20_000
}
fn default_degree() -> usize {
    3
}
fn default_ridge() -> f64 {
    1e-8
}

impl Default for EngineSection {
    fn default() -> Self {
        EngineSection {
            kind: EngineKind::Lattice,
            paths: default_paths(),
            basis_degree: default_degree(),
            ridge: default_ridge(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[clap(rename_all = "snake_case")]
pub enum EngineKind {
    Mc,
    #[default]
    Lattice,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSection {
    #[serde(default = "default_picard")]
    pub picard: f64,
    #[serde(default = "default_root")]
    pub reflection_root: f64,
    #[serde(default = "default_cross")]
    pub cross_scheme: f64,
}

fn default_picard() -> f64 {
    1e-4
}
fn default_root() -> f64 {
    1e-12
}
fn default_cross() -> f64 {
    1e-3
}

impl Default for ToleranceSection {
    fn default() -> Self {
        ToleranceSection {
            picard: default_picard(),
            reflection_root: default_root(),
            cross_scheme: default_cross(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
    #[serde(default)]
    pub plotdata: bool,
}

// ---------------------------------------------------------------------------
// Coefficient expressions
// ---------------------------------------------------------------------------

/// Serializable coefficient: polynomials in (t, x, y, z, m) closed under
/// max and positive part.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Const(f64),
    Var(Var),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, u32),
    Max(Box<Expr>, Box<Expr>),
    PlusPart(Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Var {
    T,
    X,
    Y,
    Z,
    M,
}

impl Expr {
    pub fn eval(&self, t: f64, x: f64, y: f64, z: f64, m: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(v) => match v {
                Var::T => t,
                Var::X => x,
                Var::Y => y,
                Var::Z => z,
                Var::M => m,
            },
            Expr::Add(terms) => terms.iter().map(|e| e.eval(t, x, y, z, m)).sum(),
            Expr::Mul(factors) => factors.iter().map(|e| e.eval(t, x, y, z, m)).product(),
            Expr::Neg(e) => -e.eval(t, x, y, z, m),
            Expr::Pow(e, k) => e.eval(t, x, y, z, m).powi(*k as i32),
            Expr::Max(a, b) => a.eval(t, x, y, z, m).max(b.eval(t, x, y, z, m)),
            Expr::PlusPart(e) => e.eval(t, x, y, z, m).max(0.0),
        }
    }

    pub fn uses(&self, var: Var) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Add(es) | Expr::Mul(es) => es.iter().any(|e| e.uses(var)),
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::PlusPart(e) => e.uses(var),
            Expr::Max(a, b) => a.uses(var) || b.uses(var),
        }
    }
}

/// Probed slope statistics of an expression in one variable over a box.
struct SlopeProbe {
    max_abs: f64,
    min_signed: f64,
}

fn probe_slope<F>(eval: F, horizon: f64, x_range: (f64, f64)) -> SlopeProbe
where
    F: Fn(f64, f64, f64, f64, f64, f64) -> f64,
{
    // eval(t, x, y, z, m, bump) must apply the bump to the probed variable
    let mut max_abs = 0.0f64;
    let mut min_signed = f64::INFINITY;
    let eps = 1e-5;
    let steps = 9;
    for it in 0..=steps {
        let t = horizon * it as f64 / steps as f64;
        for ix in 0..=steps {
            let x = x_range.0 + (x_range.1 - x_range.0) * ix as f64 / steps as f64;
            for iy in 0..=steps {
                let y = -2.0 + 4.0 * iy as f64 / steps as f64;
                for im in 0..=steps {
                    let m = -2.0 + 4.0 * im as f64 / steps as f64;
                    let z = -2.0 + 4.0 * ((iy + im) % (steps + 1)) as f64 / steps as f64;
                    let up = eval(t, x, y, z, m, eps);
                    let dn = eval(t, x, y, z, m, -eps);
                    let slope = (up - dn) / (2.0 * eps);
                    max_abs = max_abs.max(slope.abs());
                    min_signed = min_signed.min(slope);
                }
            }
        }
    }
    SlopeProbe { max_abs, min_signed }
}

// ---------------------------------------------------------------------------
// Problem construction
// ---------------------------------------------------------------------------

pub struct BuiltProblem {
    pub problem: ProblemSpec,
    pub label: &'static str,
}

pub fn build_problem(config: &Config) -> Result<BuiltProblem, CliError> {
    let grid = TimeGrid::new(config.grid.horizon, config.grid.steps)
        .map_err(|e| CliError::InvalidProblem(e.to_string()))?;
    let forward = build_forward(&config.forward)?;

    match &config.problem {
        ProblemSection::Insurance {
            alpha,
            beta,
            theta,
            delta_rate,
            u,
            mu,
            fee_slope,
            guarantee,
        } => {
            let (alpha, beta, theta, delta_rate, fee_slope) =
                (*alpha, *beta, *theta, *delta_rate, *fee_slope);
            let params = InsuranceParams {
                alpha: Arc::new(move |_| alpha),
                beta: Arc::new(move |_| beta),
                theta: Arc::new(move |_| theta),
                delta_rate: Arc::new(move |_| delta_rate),
                u: *u,
                mu: *mu,
                fee: Arc::new(move |y| fee_slope * y),
                fee_lip: fee_slope.abs(),
                guarantee: *guarantee,
            };
            let problem = insurance_problem(params, grid, forward)
                .map_err(|e| CliError::InvalidProblem(e.to_string()))?;
            Ok(BuiltProblem { problem, label: "insurance" })
        }
        ProblemSection::AmericanPut { strike, rate } => {
            let (strike, rate) = (*strike, *rate);
            let driver = DriverSpec::new(rate.abs(), 0.0, move |_, _, y, _| -rate * y)
                .map_err(|e| CliError::InvalidProblem(e.to_string()))?
                .monotone(rate <= 0.0, true);
            let obstacle =
                ObstacleSpec::with_state(0.0, 0.0, move |_, x, _, _| (strike - x).max(0.0))
                    .map_err(|e| CliError::InvalidProblem(e.to_string()))?
                    .monotone(true, true);
            let terminal = TerminalSpec::new(move |x| (strike - x).max(0.0));
            let problem = ProblemSpec::new(grid, forward, driver, obstacle, terminal, 2.0)
                .map_err(|e| CliError::InvalidProblem(e.to_string()))?;
            Ok(BuiltProblem { problem, label: "american_put" })
        }
        ProblemSection::LinearMf { a, b, c, terminal } => {
            let (a, b, c) = (*a, *b, *c);
            let driver = DriverSpec::new(a.abs(), b.abs(), move |_, _, y, law: &LawView| {
                a * y + b * law.mean() + c
            })
            .map_err(|e| CliError::InvalidProblem(e.to_string()))?
            .monotone(a >= 0.0, b >= 0.0);
            let obstacle = ObstacleSpec::new(0.0, 0.0, |_, _| -1e9)
                .map_err(|e| CliError::InvalidProblem(e.to_string()))?
                .monotone(true, true);
            let terminal = match terminal {
                LinearTerminal::State => TerminalSpec::new(|x| x),
                LinearTerminal::Const(v) => TerminalSpec::constant(*v),
            };
            let problem = ProblemSpec::new(grid, forward, driver, obstacle, terminal, 2.0)
                .map_err(|e| CliError::InvalidProblem(e.to_string()))?;
            Ok(BuiltProblem { problem, label: "linear_mf" })
        }
        ProblemSection::Custom {
            p,
            driver,
            obstacle,
            terminal,
            lip_y,
            lip_z,
            lip_m,
            gamma1,
            gamma2,
        } => {
            let obstacle_expr = obstacle
                .clone()
                .ok_or_else(|| CliError::MissingField("problem.obstacle".into()))?;
            let terminal_expr = terminal
                .clone()
                .ok_or_else(|| CliError::MissingField("problem.terminal".into()))?;
            let x_range = probe_x_range(&forward, config.grid.horizon);
            let horizon = config.grid.horizon;

            let de = driver.clone();
            let probe_var = |expr: &Expr, var: Var| {
                let e = expr.clone();
                probe_slope(
                    move |t, x, y, z, m, bump| match var {
                        Var::Y => e.eval(t, x, y + bump, z, m),
                        Var::Z => e.eval(t, x, y, z + bump, m),
                        Var::M => e.eval(t, x, y, z, m + bump),
                        _ => unreachable!(),
                    },
                    horizon,
                    x_range,
                )
            };
            let probe_y = probe_var(driver, Var::Y);
            let probe_z = probe_var(driver, Var::Z);
            let probe_m = probe_var(driver, Var::M);
            // probed slopes get a safety margin; explicit values win
            let lip_y = lip_y.unwrap_or(probe_y.max_abs * 1.05);
            let lip_z = lip_z.unwrap_or(probe_z.max_abs * 1.05);
            let lip_m = lip_m.unwrap_or(probe_m.max_abs * 1.05);
            let driver_spec = DriverSpec::with_z(lip_y, lip_z, lip_m, move |t, x, y, z, law| {
                de.eval(t, x, y, z[0], law.mean())
            })
            .map_err(|e| CliError::InvalidProblem(e.to_string()))?
            .monotone(probe_y.min_signed >= -1e-9, probe_m.min_signed >= -1e-9);
            let mut driver_spec = driver_spec;
            driver_spec.depends_on_z = driver.uses(Var::Z);

            let probe_hy = probe_var(&obstacle_expr, Var::Y);
            let probe_hm = probe_var(&obstacle_expr, Var::M);
            let gamma1 = gamma1.unwrap_or(probe_hy.max_abs * 1.05);
            let gamma2 = gamma2.unwrap_or(probe_hm.max_abs * 1.05);
            let he = obstacle_expr.clone();
            let state_dep = obstacle_expr.uses(Var::X) || obstacle_expr.uses(Var::T);
            let mut obstacle_spec =
                ObstacleSpec::with_state(gamma1, gamma2, move |t, x, y, law: &LawView| {
                    he.eval(t, x, y, 0.0, law.mean())
                })
                .map_err(|e| CliError::InvalidProblem(e.to_string()))?
                .monotone(probe_hy.min_signed >= -1e-9, probe_hm.min_signed >= -1e-9);
            obstacle_spec.state_dependent = state_dep;

            let te = terminal_expr.clone();
            let terminal_spec = TerminalSpec::new(move |x| te.eval(horizon, x, 0.0, 0.0, 0.0));
            let problem =
                ProblemSpec::new(grid, forward, driver_spec, obstacle_spec, terminal_spec, *p)
                    .map_err(|e| CliError::InvalidProblem(e.to_string()))?;
            Ok(BuiltProblem { problem, label: "custom" })
        }
    }
}

fn build_forward(section: &ForwardSection) -> Result<ForwardModel, CliError> {
    let fm = match section.kind {
        ForwardKindSection::Brownian => Ok(ForwardModel::brownian(section.x0)),
        ForwardKindSection::ArithmeticBm => {
            ForwardModel::arithmetic(section.x0, section.drift, section.vol)
        }
        ForwardKindSection::GeometricBm => {
            ForwardModel::geometric(section.x0, section.drift, section.vol)
        }
    };
    fm.map_err(|e| CliError::InvalidProblem(e.to_string()))
}

fn probe_x_range(forward: &ForwardModel, horizon: f64) -> (f64, f64) {
    let span = 4.0 * horizon.sqrt();
    match forward.kind {
        mfrbsde::model::ForwardKind::Brownian => (forward.x0 - span, forward.x0 + span),
        mfrbsde::model::ForwardKind::ArithmeticBm { drift, vol } => {
            let d = drift.abs() * horizon + vol * span;
            (forward.x0 - d, forward.x0 + d)
        }
        mfrbsde::model::ForwardKind::GeometricBm { drift, vol } => {
            let d = drift.abs() * horizon + vol * span;
            (forward.x0 * (-d).exp(), forward.x0 * d.exp())
        }
    }
}

/// Parse a config file, mapping serde errors to field-path messages.
pub fn parse_config(text: &str) -> Result<Config, CliError> {
    serde_json::from_str::<Config>(text).map_err(|e| CliError::Config(e.to_string()))
}

pub fn metric_for(_config: &Config) -> CurveMetric {
    CurveMetric::MeanOnly
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_minimal_insurance() {
        let text = r#"{
            "seed": 7,
            "grid": {"horizon": 1.0, "steps": 50},
            "forward": {"kind": "geometric_bm", "x0": 1.0, "vol": 0.2},
            "problem": {"builtin": "insurance"}
        }"#;
        let config = parse_config(text).unwrap();
        let built = build_problem(&config).unwrap();
        assert_eq!(built.label, "insurance");
        assert!((built.problem.obstacle.gamma2 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn missing_terminal_is_a_field_path_error() {
        let text = r#"{
            "grid": {"horizon": 1.0, "steps": 10},
            "forward": {"kind": "brownian", "x0": 0.0},
            "problem": {"builtin": "custom", "driver": {"const": 0.0},
                        "obstacle": {"const": -1000.0}}
        }"#;
        let config = parse_config(text).unwrap();
        let err = match build_problem(&config) {
            Err(e) => e,
            Ok(_) => panic!("expected a missing-field error"),
        };
        assert!(err.to_string().contains("problem.terminal"), "{err}");
    }

    #[test]
    fn expression_evaluation_and_probing() {
        // f = 0.1 - 0.03 y + 0.05 max(0, y - m)
        let expr = Expr::Add(vec![
            Expr::Const(0.1),
            Expr::Mul(vec![Expr::Const(-0.03), Expr::Var(Var::Y)]),
            Expr::Mul(vec![
                Expr::Const(0.05),
                Expr::Max(
                    Box::new(Expr::Const(0.0)),
                    Box::new(Expr::Add(vec![
                        Expr::Var(Var::Y),
                        Expr::Neg(Box::new(Expr::Var(Var::M))),
                    ])),
                ),
            ]),
        ]);
        assert!((expr.eval(0.0, 0.0, 1.0, 0.0, 0.5) - (0.1 - 0.03 + 0.025)).abs() < 1e-15);
        assert!(expr.uses(Var::Y) && expr.uses(Var::M) && !expr.uses(Var::Z));
    }

    #[test]
    fn custom_problem_probes_constants() {
        let text = r#"{
            "grid": {"horizon": 1.0, "steps": 10},
            "forward": {"kind": "brownian", "x0": 0.0},
            "problem": {
                "builtin": "custom",
                "driver": {"mul": [{"const": -0.2}, {"var": "y"}]},
                "obstacle": {"const": -1000.0},
                "terminal": {"var": "x"}
            }
        }"#;
        let config = parse_config(text).unwrap();
        let built = build_problem(&config).unwrap();
        let lip = built.problem.driver.lip_y;
        assert!((0.2..=0.22).contains(&lip), "probed lip_y = {lip}");
        assert!(!built.problem.driver.monotone_in_y);
        assert!(built.problem.driver.monotone_in_m);
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = r#"{
            "grid": {"horizon": 1.0, "steps": 10, "bogus": 3},
            "forward": {"kind": "brownian", "x0": 0.0},
            "problem": {"builtin": "insurance"}
        }"#;
        assert!(parse_config(text).is_err());
    }
}
