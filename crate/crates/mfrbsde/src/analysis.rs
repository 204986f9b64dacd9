//! Closed-form feasibility conditions for the fixed-point construction,
//! admissible contraction windows, and the exponential-scaling and obstacle
//! reshaping transforms.

use thiserror::Error;

use crate::model::{LawView, ModelError, ObstacleSpec, ProblemSpec, TerminalSpec};
use crate::solution::SolutionBundle;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("formula requires p > 1 (got p = {0}); use the p = 1 window instead")]
    NeedsPGreaterOne(f64),
    #[error("no contraction window exists: condition value {value} >= 1")]
    Infeasible { value: f64 },
    #[error("safety factor must lie in (0, 1], got {0}")]
    BadSafety(f64),
    #[error("linearized coefficient |{name}| = {observed} exceeds declared bound {declared}; Lipschitz constants look mis-declared")]
    LinearizationBound { name: &'static str, observed: f64, declared: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Shared contraction formula: value of Lambda(delta) for p > 1.
fn lambda_formula(delta: f64, p: f64, c_f: f64, gamma1: f64, gamma2: f64) -> f64 {
    let doob = (p / (p - 1.0)).powf(p);
    (2.0 * delta * c_f + gamma1 + gamma2).powf((p - 1.0) / p)
        * (doob * (delta * c_f + gamma1) + (delta * c_f + gamma2)).powf(1.0 / p)
}

/// Smallness condition on the obstacle constants for p > 1:
/// (g1 + g2)^((p-1)/p) * ((p/(p-1))^p g1 + g2)^(1/p). Feasible iff < 1.
pub fn gamma_condition(p: f64, gamma1: f64, gamma2: f64) -> Result<(f64, bool), AnalysisError> {
    if p <= 1.0 {
        return Err(AnalysisError::NeedsPGreaterOne(p));
    }
    let value = lambda_formula(0.0, p, 0.0, gamma1, gamma2);
    Ok((value, value < 1.0))
}

/// Contraction factor of the law-update map on a window of length delta.
/// Collapses to the gamma condition at delta = 0.
pub fn contraction_lambda(
    delta: f64,
    p: f64,
    c_f: f64,
    gamma1: f64,
    gamma2: f64,
) -> Result<f64, AnalysisError> {
    if p <= 1.0 {
        return Err(AnalysisError::NeedsPGreaterOne(p));
    }
    assert!(delta >= 0.0);
    Ok(lambda_formula(delta, p, c_f, gamma1, gamma2))
}

/// Largest safe window length. For p = 1 the closed form
/// safety * (1 - g1 - g2) / (2 C_f); for p > 1 safety times the unique root
/// of Lambda(delta) = 1, found by doubling a bracket and bisecting to
/// relative tolerance 1e-12. Infinite when C_f = 0.
pub fn admissible_delta(
    p: f64,
    c_f: f64,
    gamma1: f64,
    gamma2: f64,
    safety: f64,
) -> Result<f64, AnalysisError> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(AnalysisError::BadSafety(safety));
    }
    if p == 1.0 {
        let slack = 1.0 - gamma1 - gamma2;
        if slack <= 0.0 {
            return Err(AnalysisError::Infeasible { value: gamma1 + gamma2 });
        }
        if c_f == 0.0 {
            return Ok(f64::INFINITY);
        }
        return Ok(safety * slack / (2.0 * c_f));
    }
    let (value, feasible) = gamma_condition(p, gamma1, gamma2)?;
    if !feasible {
        return Err(AnalysisError::Infeasible { value });
    }
    if c_f == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(safety * lambda_unit_root(p, c_f, gamma1, gamma2))
}

/// Unique root of Lambda(delta) = 1; Lambda is continuous and strictly
/// increasing in delta, starting below 1.
fn lambda_unit_root(p: f64, c_f: f64, gamma1: f64, gamma2: f64) -> f64 {
    let mut hi = 1.0 / c_f;
    let mut lo = 0.0;
    let mut guard = 0;
    while lambda_formula(hi, p, c_f, gamma1, gamma2) < 1.0 {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        assert!(guard < 200, "Lambda failed to cross 1 while doubling");
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if lambda_formula(mid, p, c_f, gamma1, gamma2) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1e-300) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Evaluated contraction data for a problem's constants.
#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    pub p: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub c_f: f64,
    pub gamma_condition_value: f64,
    pub feasible: bool,
    pub lambda_at_zero: f64,
    pub delta_max: f64,
    pub delta_used: f64,
}

/// Full feasibility evaluation for either exponent regime. `delta_used` is
/// the safety-scaled window, capped by the horizon when one is given.
pub fn feasibility_report(
    p: f64,
    c_f: f64,
    gamma1: f64,
    gamma2: f64,
    safety: f64,
    horizon: Option<f64>,
) -> FeasibilityReport {
    let (value, feasible) = if p > 1.0 {
        gamma_condition(p, gamma1, gamma2).expect("p > 1")
    } else {
        let v = gamma1 + gamma2;
        (v, v < 1.0)
    };
    let delta_max = if feasible {
        if p > 1.0 {
            if c_f == 0.0 {
                f64::INFINITY
            } else {
                lambda_unit_root(p, c_f, gamma1, gamma2)
            }
        } else if c_f == 0.0 {
            f64::INFINITY
        } else {
            (1.0 - gamma1 - gamma2) / (2.0 * c_f)
        }
    } else {
        0.0
    };
    let mut delta_used = delta_max * safety;
    if let Some(t) = horizon {
        delta_used = delta_used.min(t);
    }
    FeasibilityReport {
        p,
        gamma1,
        gamma2,
        c_f,
        gamma_condition_value: value,
        feasible,
        lambda_at_zero: value,
        delta_max,
        delta_used,
    }
}

// ---------------------------------------------------------------------------
// Theta transform
// ---------------------------------------------------------------------------

/// Exponential rescaling Y_t -> e^{-theta t} Y_t. The transformed driver is
/// F(t, x, y, z, m) = e^{-theta t} f(t, x, e^{theta t} y, e^{theta t} z,
/// e^{theta t} m) + theta y, which shifts the driver's y-slope up by theta;
/// the terminal payoff becomes e^{-theta T} xi and the barrier is scaled the
/// same way. `untransform` maps a solution of the scaled problem back.
pub struct ThetaTransform {
    pub problem: ProblemSpec,
    pub theta: f64,
}

pub fn theta_transform(problem: &ProblemSpec, theta: f64) -> ThetaTransform {
    let base = problem.clone();
    if theta == 0.0 {
        return ThetaTransform { problem: base, theta };
    }
    let horizon = base.grid.horizon;

    let inner_driver = base.driver.clone();
    let scaled_driver = crate::model::DriverSpec::with_z(
        base.driver.lip_y + theta.abs(),
        base.driver.lip_z,
        base.driver.lip_m,
        move |t: f64, x: f64, y: f64, z: &[f64], law: &LawView| {
            let up = (theta * t).exp();
            let down = (-theta * t).exp();
            let z_scaled: Vec<f64> = z.iter().map(|v| v * up).collect();
            down * inner_driver.eval(t, x, up * y, &z_scaled, &law.scaled(up)) + theta * y
        },
    )
    .expect("nonnegative constants");
    let scaled_driver = scaled_driver.monotone(
        theta >= base.driver.lip_y,
        base.driver.monotone_in_m,
    );
    // domination does not survive the sign flip of theta*y in general; drop it
    let mut driver = scaled_driver;
    driver.depends_on_z = base.driver.depends_on_z;

    let inner_obstacle = base.obstacle.clone();
    let state_dep = base.obstacle.state_dependent;
    let mut obstacle = ObstacleSpec::with_state(
        base.obstacle.gamma1,
        base.obstacle.gamma2,
        move |t: f64, x: f64, y: f64, law: &LawView| {
            let up = (theta * t).exp();
            (-theta * t).exp() * inner_obstacle.eval(t, x, up * y, &law.scaled(up))
        },
    )
    .expect("gammas unchanged");
    obstacle = obstacle.monotone(base.obstacle.monotone_in_y, base.obstacle.monotone_in_m);
    obstacle.state_dependent = state_dep;
    obstacle.time_dependent = true;

    let inner_terminal = base.terminal.clone();
    let scale_t = (-theta * horizon).exp();
    let terminal = TerminalSpec::new(move |x| scale_t * inner_terminal.eval(x));

    let problem = ProblemSpec {
        grid: base.grid,
        forward: base.forward,
        driver,
        obstacle,
        terminal,
        p_exponent: base.p_exponent,
    };
    ThetaTransform { problem, theta }
}

impl ThetaTransform {
    /// Scale a bundle from original into transformed coordinates
    /// (multiply by e^{-theta t_i}).
    pub fn transform_bundle(&self, bundle: &SolutionBundle) -> SolutionBundle {
        self.scale_bundle(bundle, -self.theta)
    }

    /// Scale a solution of the transformed problem back to the original
    /// coordinates (multiply by e^{+theta t_i}).
    pub fn untransform(&self, bundle: &SolutionBundle) -> SolutionBundle {
        self.scale_bundle(bundle, self.theta)
    }

    fn scale_bundle(&self, bundle: &SolutionBundle, theta: f64) -> SolutionBundle {
        let times = &self.problem.grid.times;
        let mut out = bundle.clone();
        for (i, col) in out.y.iter_mut().enumerate() {
            let s = (theta * times[i]).exp();
            for v in col.iter_mut() {
                *v *= s;
            }
        }
        for (i, col) in out.z.iter_mut().enumerate() {
            let s = (theta * times[i]).exp();
            for v in col.iter_mut() {
                *v *= s;
            }
        }
        for (i, col) in out.dk.iter_mut().enumerate() {
            let s = (theta * times[i]).exp();
            for v in col.iter_mut() {
                *v *= s;
            }
        }
        let views: Vec<LawView> = (0..out.law_curve.len())
            .map(|i| {
                let s = (theta * times[i]).exp();
                out.law_curve.view(i).scaled(s)
            })
            .collect();
        out.law_curve = crate::lawtools::LawCurve::new(views);
        out
    }
}

// ---------------------------------------------------------------------------
// Kappa transform
// ---------------------------------------------------------------------------

/// Obstacle reshaping Psi_k(y, m) = (h(y, m) + k g1 y) / (1 + k g1).
/// The admissible sets coincide because y - Psi_k = (y - h) / (1 + k g1),
/// and for k >= 1 the reshaped barrier is nondecreasing in y. Returns the
/// new obstacle together with the feasibility evaluation of its constants.
pub fn kappa_transform(
    obstacle: &ObstacleSpec,
    kappa: f64,
    p: f64,
    c_f: f64,
) -> Result<(ObstacleSpec, FeasibilityReport), AnalysisError> {
    assert!(kappa > 0.0, "kappa must be positive");
    let g1 = obstacle.gamma1;
    let g2 = obstacle.gamma2;
    let denom = 1.0 + kappa * g1;
    let g1_new = (g1 + kappa * g1) / denom;
    let g2_new = g2 / denom;

    let inner = obstacle.clone();
    let mut reshaped = ObstacleSpec::with_state(g1_new, g2_new, move |t, x, y, law| {
        (inner.eval(t, x, y, law) + kappa * g1 * y) / denom
    })?;
    reshaped.state_dependent = obstacle.state_dependent;
    reshaped.time_dependent = obstacle.time_dependent;
    reshaped = reshaped.monotone(
        obstacle.monotone_in_y || kappa >= 1.0,
        obstacle.monotone_in_m,
    );

    let report = feasibility_report(p, c_f, g1_new, g2_new, 0.9, None);
    Ok((reshaped, report))
}

// ---------------------------------------------------------------------------
// Linearization diagnostic
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct LinearizationReport {
    pub max_a_f: f64,
    pub max_b_f: f64,
    pub max_a_h: f64,
    pub max_b_h: f64,
}

/// Empirical secant coefficients of f and h along a solved bundle:
/// a_f = (f(t, y, m) - f(t, 0, m)) / y on {y != 0} and
/// b_f = (f(t, 0, m) - f(t, 0, 0)) / m on {m != 0}, likewise for h.
/// Each must stay within the declared Lipschitz constants.
pub fn linearization_diagnostic(
    bundle: &SolutionBundle,
    problem: &ProblemSpec,
) -> Result<LinearizationReport, AnalysisError> {
    let times = &problem.grid.times;
    let zero_law = LawView::degenerate(0.0);
    let mut max_a_f = 0.0f64;
    let mut max_b_f = 0.0f64;
    let mut max_a_h = 0.0f64;
    let mut max_b_h = 0.0f64;

    for (i, y_col) in bundle.y.iter().enumerate() {
        let t = times[i];
        let law = bundle.law_curve.view(i);
        let m = law.mean();
        let zcol = if i < bundle.z.len() { Some(&bundle.z[i]) } else { None };
        for (u, &y) in y_col.iter().enumerate() {
            let x = bundle.x[i][u];
            let z = [zcol.map_or(0.0, |c| c[u])];
            if y != 0.0 {
                let a_f = (problem.driver.eval(t, x, y, &z, law)
                    - problem.driver.eval(t, x, 0.0, &z, law))
                    / y;
                max_a_f = max_a_f.max(a_f.abs());
                let a_h = (problem.obstacle.eval(t, x, y, law)
                    - problem.obstacle.eval(t, x, 0.0, law))
                    / y;
                max_a_h = max_a_h.max(a_h.abs());
            }
            if m != 0.0 {
                let b_f = (problem.driver.eval(t, x, 0.0, &z, law)
                    - problem.driver.eval(t, x, 0.0, &z, &zero_law))
                    / m;
                max_b_f = max_b_f.max(b_f.abs());
                let b_h = (problem.obstacle.eval(t, x, 0.0, law)
                    - problem.obstacle.eval(t, x, 0.0, &zero_law))
                    / m;
                max_b_h = max_b_h.max(b_h.abs());
            }
        }
    }

    let tol = 1e-12;
    let c_f = problem.driver.c_f();
    let checks = [
        ("a_f", max_a_f, c_f),
        ("b_f", max_b_f, c_f),
        ("a_h", max_a_h, problem.obstacle.gamma1),
        ("b_h", max_b_h, problem.obstacle.gamma2),
    ];
    for (name, observed, declared) in checks {
        if observed > declared + tol {
            return Err(AnalysisError::LinearizationBound { name, observed, declared });
        }
    }
    Ok(LinearizationReport { max_a_f, max_b_f, max_a_h, max_b_h })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gamma_condition_hand_values() {
        // mean-only barrier: condition reduces to gamma2 < 1
        let (v, ok) = gamma_condition(2.0, 0.0, 0.5).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        assert!(ok);

        let (v, ok) = gamma_condition(2.0, 0.0, 0.0).unwrap();
        assert_eq!(v, 0.0);
        assert!(ok);

        let (v, ok) = gamma_condition(2.0, 0.5, 0.5).unwrap();
        assert!((v - 2.5f64.sqrt()).abs() < 1e-12);
        assert!(!ok);

        assert!(gamma_condition(1.0, 0.1, 0.1).is_err());
    }

    #[test]
    fn lambda_collapses_at_zero() {
        for (p, g1, g2, c_f) in [(2.0, 0.1, 0.3, 1.0), (1.5, 0.0, 0.5, 2.0), (3.0, 0.2, 0.1, 0.3)] {
            let l0 = contraction_lambda(0.0, p, c_f, g1, g2).unwrap();
            let gv = gamma_condition(p, g1, g2).unwrap().0;
            assert_eq!(l0, gv);
        }
    }

    #[test]
    fn lambda_hand_value() {
        let l = contraction_lambda(0.1, 2.0, 1.0, 0.0, 0.0).unwrap();
        assert!((l - 0.1f64.sqrt()).abs() < 1e-12, "{l}");
    }

    #[test]
    fn lambda_increasing_in_delta() {
        let mut prev = -1.0;
        for k in 0..100 {
            let d = k as f64 * 0.02;
            let l = contraction_lambda(d, 2.0, 0.7, 0.1, 0.2).unwrap();
            assert!(l > prev);
            prev = l;
        }
    }

    #[test]
    fn admissible_delta_p1_closed_form() {
        let d = admissible_delta(1.0, 1.0, 0.2, 0.3, 1.0).unwrap();
        assert!((d - 0.25).abs() < 1e-15);
        let d = admissible_delta(1.0, 0.0, 0.2, 0.3, 0.9).unwrap();
        assert!(d.is_infinite());
        assert!(admissible_delta(1.0, 1.0, 0.6, 0.5, 0.9).is_err());
    }

    #[test]
    fn admissible_delta_matches_hand_root() {
        // p = 2, gammas 0, C_f = 1: Lambda(d) = d sqrt(10), root 1/sqrt(10)
        let d = admissible_delta(2.0, 1.0, 0.0, 0.0, 1.0).unwrap();
        assert!((d - 1.0 / 10f64.sqrt()).abs() < 1e-9, "{d}");
        // safety scales the root
        let d9 = admissible_delta(2.0, 1.0, 0.0, 0.0, 0.9).unwrap();
        assert!((d9 - 0.9 / 10f64.sqrt()).abs() < 1e-9);
        // the returned window satisfies Lambda(delta) < 1
        let l = contraction_lambda(d9, 2.0, 1.0, 0.0, 0.0).unwrap();
        assert!(l < 1.0);
    }

    #[test]
    fn admissible_delta_rejects_infeasible() {
        assert!(matches!(
            admissible_delta(2.0, 1.0, 0.5, 0.5, 0.9),
            Err(AnalysisError::Infeasible { .. })
        ));
    }

    #[test]
    fn feasibility_report_consistency() {
        let r = feasibility_report(2.0, 0.08, 0.01, 0.5, 0.9, Some(1.0));
        assert!(r.feasible);
        assert_eq!(r.feasible, r.gamma_condition_value < 1.0);
        assert!(r.delta_used <= r.delta_max);
        let l = contraction_lambda(r.delta_used, 2.0, r.c_f, r.gamma1, r.gamma2).unwrap();
        assert!(l < 1.0);
    }

    #[test]
    fn kappa_transform_constants_and_threshold() {
        let h = ObstacleSpec::new(0.2, 0.3, |y, law| 0.2 * y + 0.3 * law.mean()).unwrap();
        let (psi, report) = kappa_transform(&h, 1.0, 2.0, 0.5).unwrap();
        assert!((psi.gamma1 - 0.4 / 1.2).abs() < 1e-15);
        assert!((psi.gamma2 - 0.25).abs() < 1e-15);
        assert_eq!(report.gamma1, psi.gamma1);

        // gamma2' -> 0 as kappa -> infinity
        let (psi_big, _) = kappa_transform(&h, 1e9, 2.0, 0.5).unwrap();
        assert!(psi_big.gamma2 < 1e-8);

        // admissible sets coincide: y - Psi and y - h share their sign
        let law = LawView::degenerate(0.4);
        for k in 0..50 {
            let y = -2.0 + 4.0 * k as f64 / 49.0;
            let s1 = y - h.eval(0.0, 0.0, y, &law);
            let s2 = y - psi.eval(0.0, 0.0, y, &law);
            assert!(s1.signum() == s2.signum() || s1.abs() < 1e-14);
        }
    }

    #[test]
    fn theta_transform_linear_slope_shift() {
        // f = -2y with theta = 3 turns into F(t, y) = y
        let grid = crate::model::TimeGrid::new(1.0, 4).unwrap();
        let driver = crate::model::DriverSpec::new(2.0, 0.0, |_, _, y, _| -2.0 * y).unwrap();
        let obstacle = ObstacleSpec::new(0.0, 0.0, |_, _| -1e9).unwrap();
        let problem = ProblemSpec::new(
            grid,
            crate::model::ForwardModel::brownian(0.0),
            driver,
            obstacle,
            TerminalSpec::constant(1.0),
            2.0,
        )
        .unwrap();
        let tt = theta_transform(&problem, 3.0);
        let law = LawView::degenerate(0.0);
        for t in [0.0, 0.25, 0.7, 1.0] {
            for y in [-1.5, 0.0, 0.4, 2.0] {
                let f = tt.problem.driver.eval(t, 0.0, y, &[0.0], &law);
                assert!((f - y).abs() < 1e-12, "t = {t}, y = {y}: {f}");
            }
        }
        assert!(tt.problem.driver.monotone_in_y);
        assert!((tt.problem.driver.lip_y - 5.0).abs() < 1e-12);
    }

    #[test]
    fn linearization_on_linear_coefficients() {
        use crate::lawtools::LawCurve;
        // f = 0.5y + 0.2m, h = 0.1y: secants are exactly the coefficients
        let grid = crate::model::TimeGrid::new(1.0, 2).unwrap();
        let driver =
            DriverSpecHelper::linear(0.5, 0.2);
        let obstacle = ObstacleSpec::new(0.1, 0.0, |y, _| 0.1 * y).unwrap();
        let problem = ProblemSpec::new(
            grid,
            crate::model::ForwardModel::brownian(0.0),
            driver,
            obstacle,
            TerminalSpec::constant(1.0),
            2.0,
        )
        .unwrap();
        let bundle = SolutionBundle {
            y: vec![vec![1.0, 0.0], vec![2.0, -1.0], vec![1.0, 1.0]],
            z: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            dk: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            x: vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]],
            weights: crate::solution::UnitWeights::Uniform,
            law_curve: LawCurve::new(vec![
                crate::model::LawView::from_sample(vec![1.0, 0.0]),
                crate::model::LawView::from_sample(vec![2.0, -1.0]),
                crate::model::LawView::from_sample(vec![1.0, 1.0]),
            ]),
            diagnostics: Default::default(),
        };
        let report = linearization_diagnostic(&bundle, &problem).unwrap();
        assert!((report.max_a_f - 0.5).abs() < 1e-12);
        assert!((report.max_b_f - 0.2).abs() < 1e-12);
        assert!((report.max_a_h - 0.1).abs() < 1e-12);
        assert_eq!(report.max_b_h, 0.0);

        // mis-declared constants must be named in the error
        let bad_driver = crate::model::DriverSpec::new(0.1, 0.0, |_, _, y, law| {
            0.5 * y + 0.2 * law.mean()
        })
        .unwrap();
        let bad = ProblemSpec::new(
            crate::model::TimeGrid::new(1.0, 2).unwrap(),
            crate::model::ForwardModel::brownian(0.0),
            bad_driver,
            ObstacleSpec::new(0.1, 0.0, |y, _| 0.1 * y).unwrap(),
            TerminalSpec::constant(1.0),
            2.0,
        )
        .unwrap();
        assert!(matches!(
            linearization_diagnostic(&bundle, &bad),
            Err(AnalysisError::LinearizationBound { name: "a_f", .. })
        ));
    }

    struct DriverSpecHelper;
    impl DriverSpecHelper {
        fn linear(a: f64, b: f64) -> crate::model::DriverSpec {
            crate::model::DriverSpec::new(a.abs(), b.abs(), move |_, _, y, law: &LawView| {
                a * y + b * law.mean()
            })
            .unwrap()
        }
    }

    proptest! {
        #[test]
        fn gamma_condition_monotone_in_gammas(
            p in 1.1f64..4.0,
            g1 in 0.0f64..0.6,
            g2 in 0.0f64..0.6,
            bump in 0.0f64..0.2,
        ) {
            let base = gamma_condition(p, g1, g2).unwrap().0;
            prop_assert!(gamma_condition(p, g1 + bump, g2).unwrap().0 >= base - 1e-12);
            prop_assert!(gamma_condition(p, g1, g2 + bump).unwrap().0 >= base - 1e-12);
        }

        #[test]
        fn admissible_delta_satisfies_contraction(
            g1 in 0.0f64..0.15,
            g2 in 0.0f64..0.4,
            c_f in 0.01f64..3.0,
        ) {
            let d = admissible_delta(2.0, c_f, g1, g2, 0.9);
            prop_assume!(d.is_ok());
            let d = d.unwrap();
            let l = contraction_lambda(d, 2.0, c_f, g1, g2).unwrap();
            prop_assert!(l < 1.0);
        }
    }
}
