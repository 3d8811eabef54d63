//! Random-walk Metropolis sampler for the gamma posterior.
//!
//! The chain moves on u = (ln α, ln β) so both coordinates stay positive.
//! During burn-in the proposal scale is tuned by a Robbins–Monro recursion
//! towards the target acceptance rate, and halfway through burn-in the
//! proposal shape switches from isotropic to the empirical covariance of the
//! chain so far. Both are frozen when burn-in ends; the retained draws come
//! from a fixed Metropolis kernel.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::gamma_mle;
use crate::models::{prior_log_pdf, Dataset, GammaParams, PriorSpec};
use crate::specfun::log_gamma_unchecked;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcSettings {
    pub burn_in: usize,
    pub iterations: usize,
    pub thin: usize,
    /// Initial proposal standard deviation on the log scale.
    pub initial_step: f64,
    pub adapt: bool,
    pub target_acceptance: f64,
}

impl Default for McmcSettings {
    /// 1,000 burn-in, 5,000 iterations thinned by 5.
    fn default() -> Self {
        McmcSettings {
            burn_in: 1000,
            iterations: 5000,
            thin: 5,
            initial_step: 0.1,
            adapt: true,
            target_acceptance: 0.3,
        }
    }
}

impl McmcSettings {
    /// Shortened chain used when refitting posterior-predictive datasets.
    pub fn predictive_refit() -> Self {
        McmcSettings {
            burn_in: 500,
            iterations: 1000,
            thin: 2,
            ..Self::default()
        }
    }

    pub fn retained(&self) -> usize {
        if self.thin == 0 {
            0
        } else {
            self.iterations / self.thin
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::InvalidConfig("mcmc.thin must be >= 1".into()));
        }
        if self.retained() == 0 {
            return Err(Error::InvalidConfig(format!(
                "mcmc retains no draws: iterations {} / thin {}",
                self.iterations, self.thin
            )));
        }
        if !(self.initial_step.is_finite() && self.initial_step > 0.0) {
            return Err(Error::InvalidConfig("mcmc.initial_step must be > 0".into()));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::InvalidConfig("mcmc.target_acceptance must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub draws: Vec<GammaParams>,
    /// Fraction of accepted proposals after burn-in.
    pub acceptance_rate: f64,
    pub settings_used: McmcSettings,
}

/// Unnormalized log posterior of the gamma model, evaluated through the
/// sufficient statistics (n, Σy, Σ ln y).
#[derive(Debug, Clone, Copy)]
pub struct LogPosterior {
    n: f64,
    sum_y: f64,
    sum_log_y: f64,
    prior: PriorSpec,
}

impl LogPosterior {
    pub fn new(d: &Dataset, prior: &PriorSpec) -> Self {
        let y = d.observations();
        LogPosterior {
            n: y.len() as f64,
            sum_y: y.iter().sum(),
            sum_log_y: y.iter().map(|v| v.ln()).sum(),
            prior: *prior,
        }
    }

    pub fn log_likelihood(&self, p: &GammaParams) -> f64 {
        if !(p.alpha > 0.0 && p.beta > 0.0 && p.alpha.is_finite() && p.beta.is_finite()) {
            return f64::NEG_INFINITY;
        }
        self.n * (p.alpha * p.beta.ln() - log_gamma_unchecked(p.alpha)) + (p.alpha - 1.0) * self.sum_log_y
            - p.beta * self.sum_y
    }

    pub fn eval(&self, p: &GammaParams) -> f64 {
        let lp = prior_log_pdf(&self.prior, p);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        let v = self.log_likelihood(p) + lp;
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    /// Target density on u = (ln α, ln β), including the Jacobian u₁ + u₂.
    fn eval_log_scale(&self, u: [f64; 2]) -> f64 {
        let p = GammaParams {
            alpha: u[0].exp(),
            beta: u[1].exp(),
        };
        self.eval(&p) + u[0] + u[1]
    }
}

/// Σᵢ log p(yᵢ | α, β) + log π(α, β); −∞ off the support.
pub fn log_posterior(d: &Dataset, pr: &PriorSpec, p: &GammaParams) -> f64 {
    LogPosterior::new(d, pr).eval(p)
}

/// Proposal u' = u + scale · L z with z standard normal and L lower triangular.
#[derive(Debug, Clone, Copy)]
struct Proposal {
    scale: f64,
    chol: [[f64; 2]; 2],
}

impl Proposal {
    fn isotropic(scale: f64) -> Self {
        Proposal {
            scale,
            chol: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    fn propose<R: Rng + ?Sized>(&self, u: [f64; 2], rng: &mut R) -> [f64; 2] {
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        [
            u[0] + self.scale * self.chol[0][0] * z0,
            u[1] + self.scale * (self.chol[1][0] * z0 + self.chol[1][1] * z1),
        ]
    }
}

/// Running mean and covariance (Welford).
#[derive(Debug, Default)]
struct Moments {
    count: f64,
    mean: [f64; 2],
    m2: [[f64; 2]; 2],
}

impl Moments {
    fn push(&mut self, u: [f64; 2]) {
        self.count += 1.0;
        let d0 = u[0] - self.mean[0];
        let d1 = u[1] - self.mean[1];
        self.mean[0] += d0 / self.count;
        self.mean[1] += d1 / self.count;
        let e0 = u[0] - self.mean[0];
        let e1 = u[1] - self.mean[1];
        self.m2[0][0] += d0 * e0;
        self.m2[0][1] += d0 * e1;
        self.m2[1][1] += d1 * e1;
    }

    /// Cholesky factor of the regularized covariance, normalized to unit
    /// geometric-mean scale, plus that scale. None when degenerate.
    fn factor(&self) -> Option<([[f64; 2]; 2], f64)> {
        if self.count < 10.0 {
            return None;
        }
        let k = self.count - 1.0;
        let a = self.m2[0][0] / k + 1e-10;
        let b = self.m2[0][1] / k;
        let c = self.m2[1][1] / k + 1e-10;
        let det = a * c - b * b;
        if !(a > 0.0 && det > 0.0 && det.is_finite()) {
            return None;
        }
        let size = det.sqrt().sqrt();
        let l00 = a.sqrt();
        let l10 = b / l00;
        let l11 = (c - l10 * l10).max(0.0).sqrt();
        if l11 == 0.0 {
            return None;
        }
        Some(([[l00 / size, 0.0], [l10 / size, l11 / size]], size))
    }
}

/// Draws from the posterior of (α, β) given `d` under prior `pr`.
///
/// The chain starts at the MLE when it exists and at the prior means otherwise.
pub fn run_chain<R: Rng + ?Sized>(
    d: &Dataset,
    pr: &PriorSpec,
    s: &McmcSettings,
    rng: &mut R,
) -> Result<ChainOutput> {
    s.validate()?;
    pr.validate()?;
    let target = LogPosterior::new(d, pr);

    let start = match gamma_mle(d) {
        Ok(p) => p,
        Err(_) => pr.mean()?,
    };
    let mut u = [start.alpha.ln(), start.beta.ln()];
    let mut lp = target.eval_log_scale(u);
    if !lp.is_finite() {
        return Err(Error::Initialization(format!(
            "log posterior is {lp} at starting point {start:?}"
        )));
    }

    let mut proposal = Proposal::isotropic(s.initial_step);
    let mut log_scale = s.initial_step.ln();
    let mut gain_clock = 0usize;
    let mut moments = Moments::default();
    let collect_from = s.burn_in / 4;
    let switch_at = s.burn_in / 2;

    let mut draws = Vec::with_capacity(s.retained());
    let mut accepted_after_burn_in = 0usize;
    let total = s.burn_in + s.iterations;

    for t in 0..total {
        let cand = proposal.propose(u, rng);
        let lp_cand = target.eval_log_scale(cand);
        let log_ratio = lp_cand - lp;
        let accept = log_ratio >= 0.0 || rng.gen::<f64>().ln() < log_ratio;
        if accept {
            u = cand;
            lp = lp_cand;
        }

        if t < s.burn_in {
            if s.adapt {
                gain_clock += 1;
                let gain = (gain_clock as f64).powf(-0.6);
                let hit = if accept { 1.0 } else { 0.0 };
                log_scale = (log_scale + gain * (hit - s.target_acceptance)).clamp(-12.0, 3.0);
                proposal.scale = log_scale.exp();

                if t >= collect_from {
                    moments.push(u);
                }
                if t + 1 == switch_at {
                    if let Some((chol, size)) = moments.factor() {
                        proposal.chol = chol;
                        // 2.38/√d times the covariance size is the usual starting point in 2-D.
                        log_scale = (1.68 * size).ln();
                        proposal.scale = log_scale.exp();
                        gain_clock = 0;
                    }
                }
            }
        } else {
            if accept {
                accepted_after_burn_in += 1;
            }
            let k = t - s.burn_in + 1;
            if k.is_multiple_of(s.thin) {
                draws.push(GammaParams {
                    alpha: u[0].exp(),
                    beta: u[1].exp(),
                });
            }
        }
    }

    Ok(ChainOutput {
        draws,
        acceptance_rate: accepted_after_burn_in as f64 / s.iterations as f64,
        settings_used: *s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{gamma_log_pdf, ModelSpec};
    use crate::rng::stream;
    use approx::assert_abs_diff_eq;

    #[test]
    fn likelihood_only_point() {
        let d = Dataset::new(vec![1.0]).unwrap();
        let t = LogPosterior::new(&d, &PriorSpec::good());
        let p = GammaParams::new(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(t.log_likelihood(&p), -1.0, epsilon = 1e-14);
    }

    #[test]
    fn matches_naive_summation() {
        let mut rng = stream(8);
        let d = ModelSpec::Gamma { alpha: 1.7, beta: 3.0 }.sample(40, &mut rng).unwrap();
        for pr in [PriorSpec::good(), PriorSpec::bad()] {
            for &(a, b) in &[(0.3, 0.2), (1.7, 3.0), (8.0, 20.0)] {
                let p = GammaParams::new(a, b).unwrap();
                let naive: f64 = d
                    .observations()
                    .iter()
                    .map(|&y| gamma_log_pdf(&p, y).unwrap())
                    .sum::<f64>()
                    + prior_log_pdf(&pr, &p);
                assert_abs_diff_eq!(log_posterior(&d, &pr, &p), naive, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn off_support_is_negative_infinity() {
        let d = Dataset::new(vec![1.0, 2.0]).unwrap();
        let p = GammaParams { alpha: -1.0, beta: 1.0 };
        assert_eq!(log_posterior(&d, &PriorSpec::good(), &p), f64::NEG_INFINITY);
    }

    #[test]
    fn settings_validation() {
        let mut s = McmcSettings::default();
        assert!(s.validate().is_ok());
        assert_eq!(s.retained(), 1000);
        s.thin = 0;
        assert!(s.validate().is_err());
        let s = McmcSettings {
            iterations: 3,
            thin: 5,
            ..McmcSettings::default()
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn chain_is_deterministic_and_positive() {
        let d = ModelSpec::Gamma { alpha: 2.0, beta: 5.0 }.sample(30, &mut stream(1)).unwrap();
        let s = McmcSettings::default();
        let a = run_chain(&d, &PriorSpec::good(), &s, &mut stream(2)).unwrap();
        let b = run_chain(&d, &PriorSpec::good(), &s, &mut stream(2)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.draws.len(), 1000);
        assert!(a.draws.iter().all(|p| p.alpha > 0.0 && p.beta > 0.0));
    }

    #[test]
    fn single_observation_starts_at_prior_mean() {
        let d = Dataset::new(vec![0.3]).unwrap();
        let out = run_chain(&d, &PriorSpec::good(), &McmcSettings::default(), &mut stream(4)).unwrap();
        assert_eq!(out.draws.len(), 1000);
    }

    #[test]
    fn posterior_concentrates_and_acceptance_in_range() {
        let d = ModelSpec::Gamma { alpha: 2.0, beta: 5.0 }.sample(500, &mut stream(21)).unwrap();
        let out = run_chain(&d, &PriorSpec::good(), &McmcSettings::default(), &mut stream(22)).unwrap();
        let m = out.draws.len() as f64;
        let mean_a = out.draws.iter().map(|p| p.alpha).sum::<f64>() / m;
        let mean_b = out.draws.iter().map(|p| p.beta).sum::<f64>() / m;
        let sd_a = (out.draws.iter().map(|p| (p.alpha - mean_a).powi(2)).sum::<f64>() / m).sqrt();
        let sd_b = (out.draws.iter().map(|p| (p.beta - mean_b).powi(2)).sum::<f64>() / m).sqrt();
        assert!((mean_a - 2.0).abs() < 3.0 * sd_a, "{mean_a} ± {sd_a}");
        assert!((mean_b - 5.0).abs() < 3.0 * sd_b, "{mean_b} ± {sd_b}");
        assert!((0.15..=0.5).contains(&out.acceptance_rate), "{}", out.acceptance_rate);
    }

    #[test]
    fn fixed_kernel_acceptance_matches_metropolis_ratio() {
        // Without adaptation, the acceptance frequency estimates E[min(1, ratio)].
        let d = ModelSpec::Gamma { alpha: 2.0, beta: 5.0 }.sample(50, &mut stream(31)).unwrap();
        let pr = PriorSpec::good();
        let s = McmcSettings {
            burn_in: 0,
            iterations: 1000,
            thin: 1,
            initial_step: 0.2,
            adapt: false,
            target_acceptance: 0.3,
        };
        let out = run_chain(&d, &pr, &s, &mut stream(32)).unwrap();
        let target = LogPosterior::new(&d, &pr);
        // Average Metropolis ratio from the retained states with fresh proposals.
        let mut rng = stream(33);
        let prop = Proposal::isotropic(0.2);
        let mut total = 0.0;
        let reps = 20;
        for p in &out.draws {
            let u = [p.alpha.ln(), p.beta.ln()];
            let lp = target.eval_log_scale(u);
            for _ in 0..reps {
                let c = prop.propose(u, &mut rng);
                total += (target.eval_log_scale(c) - lp).exp().min(1.0);
            }
        }
        let expected = total / (reps * out.draws.len()) as f64;
        let se = (expected * (1.0 - expected) / out.draws.len() as f64).sqrt();
        // Chain autocorrelation inflates the error; allow four naive standard errors.
        assert!(
            (out.acceptance_rate - expected).abs() < 4.0 * se,
            "{} vs {expected} (se {se})",
            out.acceptance_rate
        );
    }
}
