//! Empirical one-dimensional laws and Wasserstein-p distances. In one
//! dimension the optimal coupling sorts both samples, so W_p reduces to an
//! average over paired order statistics.

use thiserror::Error;

use crate::model::LawView;

#[derive(Debug, Error, PartialEq)]
pub enum LawError {
    #[error("empty sample")]
    EmptySample,
    #[error("law curves live on different grids ({0} vs {1} views)")]
    GridMismatch(usize, usize),
}

/// Marginal law summaries along the time grid, one view per grid point.
#[derive(Debug, Clone)]
pub struct LawCurve {
    views: Vec<LawView>,
}

impl LawCurve {
    pub fn new(views: Vec<LawView>) -> Self {
        LawCurve { views }
    }

    /// Constant curve holding the same view at every grid point.
    pub fn constant(view: LawView, len: usize) -> Self {
        LawCurve { views: vec![view; len] }
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn view(&self, i: usize) -> &LawView {
        &self.views[i]
    }

    pub fn views(&self) -> &[LawView] {
        &self.views
    }

    pub fn set_view(&mut self, i: usize, view: LawView) {
        self.views[i] = view;
    }

    pub fn means(&self) -> Vec<f64> {
        self.views.iter().map(|v| v.mean()).collect()
    }
}

/// Empirical law of a cross-section of values.
pub fn law_of(values: &[f64]) -> LawView {
    LawView::from_sample(values.to_vec())
}

/// How `curve_distance` compares two curves; the mean-only metric is the
/// Picard stopping criterion when coefficients read only E[Y].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveMetric {
    MeanOnly,
    Wasserstein,
}

/// W_p between two one-dimensional empirical laws via the sorted coupling.
/// Unequal sample sizes are resampled by linear quantile interpolation to the
/// larger size.
pub fn wasserstein_p(a: &LawView, b: &LawView, p: f64) -> Result<f64, LawError> {
    assert!(p >= 1.0, "wasserstein_p needs p >= 1");
    if a.is_empty() || b.is_empty() {
        return Err(LawError::EmptySample);
    }
    let n = a.len().max(b.len());
    let pow_sum = if a.len() == b.len() {
        (0..n).map(|k| (a.atom(k) - b.atom(k)).abs().powf(p)).sum::<f64>()
    } else {
        (0..n)
            .map(|k| {
                let q = (k as f64 + 0.5) / n as f64;
                (quantile(a, q) - quantile(b, q)).abs().powf(p)
            })
            .sum::<f64>()
    };
    Ok((pow_sum / n as f64).powf(1.0 / p))
}

/// Empirical quantile with linear interpolation between midpoint plotting
/// positions (i + 1/2) / n. Resampling a sorted sample to its own size is the
/// identity under this convention.
fn quantile(law: &LawView, q: f64) -> f64 {
    let n = law.len();
    if n == 1 {
        return law.atom(0);
    }
    let pos = q * n as f64 - 0.5;
    if pos <= 0.0 {
        return law.atom(0);
    }
    if pos >= (n - 1) as f64 {
        return law.atom(n - 1);
    }
    let lo = pos.floor() as usize;
    let w = pos - lo as f64;
    law.atom(lo) + w * (law.atom(lo + 1) - law.atom(lo))
}

/// Distance between two law curves on the same grid: sup over grid points of
/// either the mean gap or the Wasserstein-p distance.
pub fn curve_distance(
    a: &LawCurve,
    b: &LawCurve,
    p: f64,
    metric: CurveMetric,
) -> Result<f64, LawError> {
    if a.len() != b.len() {
        return Err(LawError::GridMismatch(a.len(), b.len()));
    }
    let mut sup = 0.0f64;
    for (va, vb) in a.views().iter().zip(b.views()) {
        let d = match metric {
            CurveMetric::MeanOnly => (va.mean() - vb.mean()).abs(),
            CurveMetric::Wasserstein => wasserstein_p(va, vb, p)?,
        };
        sup = sup.max(d);
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use itertools::Itertools;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shift_coupling() {
        let a = law_of(&[0.0, 2.0]);
        let b = law_of(&[1.0, 3.0]);
        assert!((wasserstein_p(&a, &b, 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identical_samples_are_at_distance_zero() {
        let a = law_of(&[0.3, -1.0, 2.5]);
        assert_eq!(wasserstein_p(&a, &a, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn empty_sample_is_rejected() {
        // LawView cannot be empty by construction, so exercise the curve path
        let a = LawCurve::new(vec![]);
        let b = LawCurve::new(vec![LawView::degenerate(0.0)]);
        assert_eq!(
            curve_distance(&a, &b, 1.0, CurveMetric::MeanOnly),
            Err(LawError::GridMismatch(0, 1))
        );
    }

    #[test]
    fn distance_to_point_mass_is_p_norm() {
        // W_p(mu, delta_0) = ((1/n) sum |y_k|^p)^(1/p) in one dimension
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for p in [1.0, 2.0, 3.0] {
            let sample: Vec<f64> = (0..257).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mu = law_of(&sample);
            let zero = LawView::degenerate(0.0);
            let d = wasserstein_p(&mu, &zero, p).unwrap();
            let pnorm = (sample.iter().map(|v| v.abs().powf(p)).sum::<f64>()
                / sample.len() as f64)
                .powf(1.0 / p);
            assert!((d - pnorm).abs() < 1e-12, "p = {p}: {d} vs {pnorm}");
        }
    }

    #[test]
    fn sorted_coupling_is_optimal_for_small_samples() {
        // brute force over all permutation couplings for n <= 6
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 2..=6usize {
            for _ in 0..20 {
                let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
                let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
                for p in [1.0, 2.0] {
                    let sorted = wasserstein_p(&law_of(&xs), &law_of(&ys), p).unwrap();
                    let best = (0..n)
                        .permutations(n)
                        .map(|perm| {
                            let s: f64 = perm
                                .iter()
                                .enumerate()
                                .map(|(i, &j)| (xs[i] - ys[j]).abs().powf(p))
                                .sum();
                            (s / n as f64).powf(1.0 / p)
                        })
                        .fold(f64::INFINITY, f64::min);
                    assert!(
                        (sorted - best).abs() < 1e-12,
                        "n = {n}, p = {p}: sorted {sorted} vs brute force {best}"
                    );
                }
            }
        }
    }

    #[test]
    fn quantile_resampling_handles_unequal_sizes() {
        // same underlying uniform grid at two resolutions stays close
        let coarse: Vec<f64> = (0..10).map(|k| (k as f64 + 0.5) / 10.0).collect();
        let fine: Vec<f64> = (0..1000).map(|k| (k as f64 + 0.5) / 1000.0).collect();
        let d = wasserstein_p(&law_of(&coarse), &law_of(&fine), 1.0).unwrap();
        assert!(d < 0.03, "d = {d}");
    }

    #[test]
    fn curve_distance_modes() {
        let base = LawCurve::constant(LawView::degenerate(1.0), 5);
        let mut shifted = base.clone();
        shifted.set_view(3, LawView::degenerate(1.2));
        assert_eq!(curve_distance(&base, &base, 2.0, CurveMetric::MeanOnly).unwrap(), 0.0);
        let d = curve_distance(&base, &shifted, 2.0, CurveMetric::MeanOnly).unwrap();
        assert!((d - 0.2).abs() < 1e-15);
    }

    #[test]
    fn law_of_basics() {
        let v = law_of(&[3.0, 1.0]);
        assert_eq!(v.mean(), 2.0);
        assert_eq!(v.sorted_sample(), vec![1.0, 3.0]);
        let c = law_of(&[0.7; 9]);
        assert!((c.mean() - 0.7).abs() < 1e-15);
        assert!(c.sorted_sample().iter().all(|&x| x == 0.7));
    }

    #[test]
    fn law_of_large_normal_sample_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let sample: Vec<f64> = (0..100_000)
            .map(|_| rand_distr::StandardNormal.sample(&mut rng))
            .collect();
        let v = law_of(&sample);
        assert!(v.mean().abs() < 0.013, "mean = {}", v.mean());
    }

    proptest! {
        #[test]
        fn metric_axioms(
            xs in proptest::collection::vec(-10.0f64..10.0, 8),
            ys in proptest::collection::vec(-10.0f64..10.0, 8),
            zs in proptest::collection::vec(-10.0f64..10.0, 8),
            p in 1.0f64..3.0,
        ) {
            let (a, b, c) = (law_of(&xs), law_of(&ys), law_of(&zs));
            let dab = wasserstein_p(&a, &b, p).unwrap();
            let dba = wasserstein_p(&b, &a, p).unwrap();
            prop_assert!((dab - dba).abs() < 1e-12);
            prop_assert!(wasserstein_p(&a, &a, p).unwrap() == 0.0);
            let dac = wasserstein_p(&a, &c, p).unwrap();
            let dcb = wasserstein_p(&c, &b, p).unwrap();
            prop_assert!(dab <= dac + dcb + 1e-12);
        }

        #[test]
        fn wasserstein_nondecreasing_in_p(
            xs in proptest::collection::vec(-5.0f64..5.0, 12),
            ys in proptest::collection::vec(-5.0f64..5.0, 12),
        ) {
            let (a, b) = (law_of(&xs), law_of(&ys));
            let mut prev = 0.0;
            for k in 0..8 {
                let p = 1.0 + 0.5 * k as f64;
                let d = wasserstein_p(&a, &b, p).unwrap();
                prop_assert!(d >= prev - 1e-12);
                prev = d;
            }
        }

        #[test]
        fn wasserstein_dominates_mean_gap(
            xs in proptest::collection::vec(-5.0f64..5.0, 16),
            ys in proptest::collection::vec(-5.0f64..5.0, 16),
            p in 1.0f64..3.0,
        ) {
            // Jensen: |mean a - mean b| <= W_1 <= W_p
            let (a, b) = (law_of(&xs), law_of(&ys));
            let mean_gap = (a.mean() - b.mean()).abs();
            prop_assert!(wasserstein_p(&a, &b, p).unwrap() >= mean_gap - 1e-12);
        }

        #[test]
        fn path_coupling_bounds_marginal_distance(
            xs in proptest::collection::vec(-5.0f64..5.0, 16),
            deltas in proptest::collection::vec(-1.0f64..1.0, 16),
            p in 1.0f64..3.0,
        ) {
            // coupled ensembles: W_p of marginals <= p-mean of pathwise gaps
            let ys: Vec<f64> = xs.iter().zip(&deltas).map(|(x, d)| x + d).collect();
            let lhs = wasserstein_p(&law_of(&xs), &law_of(&ys), p).unwrap();
            let rhs = (deltas.iter().map(|d| d.abs().powf(p)).sum::<f64>()
                / deltas.len() as f64).powf(1.0 / p);
            prop_assert!(lhs <= rhs + 1e-12);
        }
    }
}
