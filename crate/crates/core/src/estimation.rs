//! Plug-in estimators for the gamma null model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcmc::ChainOutput;
use crate::models::{Dataset, GammaParams};
use crate::specfun::{digamma_unchecked, trigamma_unchecked};

/// Which estimator is substituted into the fitted CDF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Mle,
    PosteriorMean,
}

impl EstimatorKind {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::Mle => "mle",
            EstimatorKind::PosteriorMean => "posterior_mean",
        }
    }
}

/// Below this value of ln(mean y) − mean(ln y) the likelihood has no finite maximizer.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

const SHAPE_LOWER: f64 = 1e-6;
const SHAPE_UPPER: f64 = 1e6;

/// Log-moment summary of a dataset: (mean y, mean ln y).
pub(crate) fn log_moments(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let mean_log = y.iter().map(|v| v.ln()).sum::<f64>() / n;
    (mean, mean_log)
}

/// Maximum likelihood estimate of (α, β).
///
/// Solves ln α − ψ(α) = s with s = ln(ȳ) − mean(ln y) by Newton's method,
/// falling back to bisection whenever a step leaves the current bracket,
/// then sets β = α / ȳ.
pub fn gamma_mle(d: &Dataset) -> Result<GammaParams> {
    let y = d.observations();
    if y.len() < 2 {
        return Err(Error::domain("gamma_mle", y.len() as f64, "n >= 2"));
    }
    // Summing in sorted order makes the estimate exactly permutation invariant.
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mean, mean_log) = log_moments(&sorted);
    let s = mean.ln() - mean_log;
    if !(s > DEGENERACY_THRESHOLD) {
        return Err(Error::DegenerateData(format!(
            "log-dispersion statistic {s:e} <= {DEGENERACY_THRESHOLD:e}; shape estimate diverges"
        )));
    }
    let alpha = solve_shape(s)?;
    GammaParams::new(alpha, alpha / mean)
}

/// Root of ln α − ψ(α) − s, which is strictly decreasing in α.
fn solve_shape(s: f64) -> Result<f64> {
    let f = |a: f64| a.ln() - digamma_unchecked(a) - s;
    let mut lo = SHAPE_LOWER;
    // ln α − ψ(α) ≈ 1/(2α) for large α, so the root sits near 1/(2s).
    let mut hi = SHAPE_UPPER.max(1.0 / s);

    let mut alpha = (3.0 - s + ((s - 3.0).powi(2) + 24.0 * s).sqrt()) / (12.0 * s);
    if !(alpha > lo && alpha < hi) {
        alpha = (lo * hi).sqrt();
    }
    for _ in 0..200 {
        let fa = f(alpha);
        if fa == 0.0 {
            return Ok(alpha);
        }
        if fa > 0.0 {
            lo = alpha;
        } else {
            hi = alpha;
        }
        let slope = 1.0 / alpha - trigamma_unchecked(alpha);
        let mut next = alpha - fa / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - alpha).abs() <= 4.0 * f64::EPSILON * alpha || (hi - lo) <= 4.0 * f64::EPSILON * hi {
            return Ok(next);
        }
        alpha = next;
    }
    Err(Error::Numerical(format!("shape equation did not converge for s = {s:e}")))
}

/// Componentwise mean of the retained draws.
pub fn posterior_mean(c: &ChainOutput) -> Result<GammaParams> {
    if c.draws.is_empty() {
        return Err(Error::EmptyChain);
    }
    let m = c.draws.len() as f64;
    let (sa, sb) = c
        .draws
        .iter()
        .fold((0.0, 0.0), |(sa, sb), p| (sa + p.alpha, sb + p.beta));
    GammaParams::new(sa / m, sb / m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::McmcSettings;
    use crate::models::{gamma_score, ModelSpec};
    use crate::rng::stream;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ds(v: &[f64]) -> Dataset {
        Dataset::new(v.to_vec()).unwrap()
    }

    #[test]
    fn degenerate_and_short_data_rejected() {
        assert!(matches!(gamma_mle(&ds(&[1.0, 1.0, 1.0])), Err(Error::DegenerateData(_))));
        assert!(matches!(gamma_mle(&ds(&[1.0])), Err(Error::Domain { .. })));
    }

    #[test]
    fn stationarity_of_solution() {
        let data = ds(&[0.5, 1.0, 2.0]);
        let p = gamma_mle(&data).unwrap();
        let mut g = [0.0, 0.0];
        for &y in data.observations() {
            let s = gamma_score(&p, y).unwrap();
            g[0] += s[0];
            g[1] += s[1];
        }
        assert!(g[0].abs() <= 1e-8 * 3.0 && g[1].abs() <= 1e-8 * 3.0, "{g:?}");
    }

    #[test]
    fn near_degenerate_data_still_converges() {
        // s around 1e-9 puts the shape far above the nominal bracket.
        let data = ds(&[1.0, 1.0 + 1e-4, 1.0 - 1e-4]);
        let p = gamma_mle(&data).unwrap();
        assert!(p.alpha > 1e6);
        assert_abs_diff_eq!(p.mean(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn large_sample_consistency() {
        let data = ModelSpec::Gamma { alpha: 2.0, beta: 5.0 }
            .sample(100_000, &mut stream(3))
            .unwrap();
        let p = gamma_mle(&data).unwrap();
        assert!((p.alpha - 2.0).abs() < 0.05, "{p:?}");
        assert!((p.beta - 5.0).abs() < 0.15, "{p:?}");
    }

    #[test]
    fn posterior_mean_of_draws() {
        let settings = McmcSettings::default();
        let one = ChainOutput {
            draws: vec![GammaParams::new(2.0, 5.0).unwrap()],
            acceptance_rate: 0.0,
            settings_used: settings,
        };
        assert_eq!(posterior_mean(&one).unwrap(), GammaParams::new(2.0, 5.0).unwrap());
        let two = ChainOutput {
            draws: vec![GammaParams::new(1.0, 1.0).unwrap(), GammaParams::new(3.0, 3.0).unwrap()],
            acceptance_rate: 0.0,
            settings_used: settings,
        };
        assert_eq!(posterior_mean(&two).unwrap(), GammaParams::new(2.0, 2.0).unwrap());
        let empty = ChainOutput {
            draws: vec![],
            acceptance_rate: 0.0,
            settings_used: settings,
        };
        assert_eq!(posterior_mean(&empty), Err(Error::EmptyChain));
    }

    fn shuffled_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        prop::collection::vec(0.01f64..50.0, 3..30)
            .prop_flat_map(|v| (Just(v.clone()), Just(v).prop_shuffle()))
    }

    proptest! {
        #[test]
        fn mle_is_permutation_invariant((v, shuffled) in shuffled_pair()) {
            let a = gamma_mle(&ds(&v));
            let b = gamma_mle(&ds(&shuffled));
            prop_assert_eq!(a, b);
        }
    }
}
