//! Parametric families used as null model, alternatives and priors.
//!
//! The null family is Gamma(α, β) in the shape/rate parameterization. The
//! alternatives (Weibull, lognormal, and a gamma GLM whose mean depends
//! linearly on a covariate) only need a CDF and a sampler; the gamma family
//! additionally exposes its score, Fisher information and the parameter
//! derivatives of its CDF.

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Weibull};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{
    digamma, digamma_unchecked, log_gamma, log_gamma_unchecked, normal_cdf, normal_log_pdf,
    reg_lower_incomplete_gamma, trigamma,
};

/// Shape α and rate β of a gamma distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl GammaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let p = GammaParams { alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::domain("GammaParams", self.alpha, "alpha finite and > 0"));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::domain("GammaParams", self.beta, "beta finite and > 0"));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.alpha / self.beta
    }

    pub fn variance(&self) -> f64 {
        self.alpha / (self.beta * self.beta)
    }
}

/// A sample of positive observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    observations: Vec<f64>,
}

impl Dataset {
    pub fn new(observations: Vec<f64>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::InvalidConfig("dataset must contain at least one observation".into()));
        }
        if let Some(&bad) = observations.iter().find(|y| !(y.is_finite() && **y > 0.0)) {
            return Err(Error::domain("Dataset", bad, "observations finite and > 0"));
        }
        Ok(Dataset { observations })
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    pub fn n(&self) -> usize {
        self.observations.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.observations
    }
}

/// Data-generating family with concrete parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    Gamma { alpha: f64, beta: f64 },
    /// CDF 1 − exp(−(y/scale)^shape).
    Weibull { shape: f64, scale: f64 },
    /// exp(N(mu, sigma²)).
    Lognormal { mu: f64, sigma: f64 },
    /// Y_i ~ Gamma(α, α / (x_i θ + α/β)), so E[Y_i] = x_i θ + α/β.
    GammaGlm {
        alpha: f64,
        beta: f64,
        theta: f64,
        covariates: Vec<f64>,
    },
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(name, v, "finite and > 0"))
    }
}

impl ModelSpec {
    pub fn gamma(p: GammaParams) -> Self {
        ModelSpec::Gamma {
            alpha: p.alpha,
            beta: p.beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Gamma { alpha, beta } => GammaParams::new(*alpha, *beta).map(|_| ()),
            ModelSpec::Weibull { shape, scale } => {
                positive("Weibull shape", *shape)?;
                positive("Weibull scale", *scale)
            }
            ModelSpec::Lognormal { mu, sigma } => {
                if !mu.is_finite() {
                    return Err(Error::domain("Lognormal mu", *mu, "finite"));
                }
                positive("Lognormal sigma", *sigma)
            }
            ModelSpec::GammaGlm {
                alpha,
                beta,
                theta,
                covariates,
            } => {
                GammaParams::new(*alpha, *beta)?;
                if !(theta.is_finite() && *theta >= 0.0) {
                    return Err(Error::domain("GammaGlm theta", *theta, "finite and >= 0"));
                }
                for &x in covariates {
                    positive("GammaGlm covariate", x)?;
                }
                Ok(())
            }
        }
    }

    /// Per-observation gamma rate of the GLM, α / (x_i θ + α/β).
    pub fn glm_rate(&self, i: usize) -> Result<f64> {
        match self {
            ModelSpec::GammaGlm {
                alpha,
                beta,
                theta,
                covariates,
            } => {
                let x = covariates.get(i).ok_or(Error::IndexOutOfRange {
                    index: i,
                    len: covariates.len(),
                })?;
                Ok(alpha / (x * theta + alpha / beta))
            }
            _ => Err(Error::InvalidConfig("glm_rate requires a GammaGlm model".into())),
        }
    }

    /// CDF of observation `i` at `y`. The index only matters for the GLM.
    pub fn cdf(&self, i: usize, y: f64) -> Result<f64> {
        if y.is_nan() {
            return Err(Error::domain("model_cdf", y, "not NaN"));
        }
        if let ModelSpec::GammaGlm { covariates, .. } = self {
            if i >= covariates.len() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: covariates.len(),
                });
            }
        }
        if y <= 0.0 {
            return Ok(0.0);
        }
        match self {
            ModelSpec::Gamma { alpha, beta } => gamma_cdf(&GammaParams::new(*alpha, *beta)?, y),
            ModelSpec::Weibull { shape, scale } => Ok(-(-(y / scale).powf(*shape)).exp_m1()),
            ModelSpec::Lognormal { mu, sigma } => normal_cdf((y.ln() - mu) / sigma),
            ModelSpec::GammaGlm { alpha, .. } => {
                reg_lower_incomplete_gamma(*alpha, self.glm_rate(i)? * y)
            }
        }
    }

    /// Draws `n` independent observations.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::InvalidConfig("sample size must be >= 1".into()));
        }
        self.validate()?;
        let obs: Vec<f64> = match self {
            ModelSpec::Gamma { alpha, beta } => {
                let d = gamma_sampler(*alpha, *beta)?;
                (0..n).map(|_| d.sample(rng)).collect()
            }
            ModelSpec::Weibull { shape, scale } => {
                let d = Weibull::new(*scale, *shape)
                    .map_err(|e| Error::InvalidConfig(format!("weibull: {e}")))?;
                (0..n).map(|_| d.sample(rng)).collect()
            }
            ModelSpec::Lognormal { mu, sigma } => {
                let d = LogNormal::new(*mu, *sigma)
                    .map_err(|e| Error::InvalidConfig(format!("lognormal: {e}")))?;
                (0..n).map(|_| d.sample(rng)).collect()
            }
            ModelSpec::GammaGlm {
                alpha, covariates, ..
            } => {
                if covariates.len() != n {
                    return Err(Error::LengthMismatch {
                        expected: n,
                        found: covariates.len(),
                    });
                }
                let mut out = Vec::with_capacity(n);
                for i in 0..n {
                    let d = gamma_sampler(*alpha, self.glm_rate(i)?)?;
                    out.push(d.sample(rng));
                }
                out
            }
        };
        // A draw can underflow to exactly 0 for very small shapes; the support is (0, ∞).
        Dataset::new(obs.into_iter().map(|y| y.max(f64::MIN_POSITIVE)).collect())
    }
}

fn gamma_sampler(alpha: f64, beta: f64) -> Result<rand_distr::Gamma<f64>> {
    rand_distr::Gamma::new(alpha, 1.0 / beta)
        .map_err(|e| Error::InvalidConfig(format!("gamma sampler: {e}")))
}

/// Covariates for the gamma GLM: `n` draws from Lognormal(mu, sigma).
pub fn draw_covariates<R: Rng + ?Sized>(n: usize, mu: f64, sigma: f64, rng: &mut R) -> Result<Vec<f64>> {
    let d = LogNormal::new(mu, sigma).map_err(|e| Error::InvalidConfig(format!("covariates: {e}")))?;
    Ok((0..n).map(|_| d.sample(rng)).collect())
}

pub fn model_cdf(m: &ModelSpec, i: usize, y: f64) -> Result<f64> {
    m.cdf(i, y)
}

pub fn sample_dataset<R: Rng + ?Sized>(m: &ModelSpec, n: usize, rng: &mut R) -> Result<Dataset> {
    m.sample(n, rng)
}

/// α ln β − ln Γ(α) + (α − 1) ln y − β y
pub fn gamma_log_pdf(p: &GammaParams, y: f64) -> Result<f64> {
    p.validate()?;
    if !(y.is_finite() && y > 0.0) {
        return Err(Error::domain("gamma_log_pdf", y, "finite and > 0"));
    }
    Ok(p.alpha * p.beta.ln() - log_gamma_unchecked(p.alpha) + (p.alpha - 1.0) * y.ln() - p.beta * y)
}

/// P(α, βy), the regularized lower incomplete gamma function.
pub fn gamma_cdf(p: &GammaParams, y: f64) -> Result<f64> {
    p.validate()?;
    if y.is_nan() || y < 0.0 {
        return Err(Error::domain("gamma_cdf", y, ">= 0"));
    }
    reg_lower_incomplete_gamma(p.alpha, p.beta * y)
}

/// Score of one observation, (ln β − ψ(α) + ln y, α/β − y).
pub fn gamma_score(p: &GammaParams, y: f64) -> Result<[f64; 2]> {
    p.validate()?;
    if !(y.is_finite() && y > 0.0) {
        return Err(Error::domain("gamma_score", y, "finite and > 0"));
    }
    Ok([
        p.beta.ln() - digamma_unchecked(p.alpha) + y.ln(),
        p.alpha / p.beta - y,
    ])
}

/// Per-observation Fisher information [[ψ'(α), −1/β], [−1/β, α/β²]].
pub fn gamma_fisher_info(p: &GammaParams) -> Result<[[f64; 2]; 2]> {
    p.validate()?;
    let off = -1.0 / p.beta;
    Ok([[trigamma(p.alpha)?, off], [off, p.alpha / (p.beta * p.beta)]])
}

/// Central finite-difference gradient of the gamma CDF in (α, β).
pub fn cdf_param_grad_fd(p: &GammaParams, y: f64, h: f64) -> Result<[f64; 2]> {
    p.validate()?;
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::domain("cdf_param_grad_fd", h, "step finite and > 0"));
    }
    if h >= p.alpha || h >= p.beta {
        return Err(Error::domain(
            "cdf_param_grad_fd",
            h,
            "step smaller than both parameters",
        ));
    }
    let at = |alpha: f64, beta: f64| gamma_cdf(&GammaParams { alpha, beta }, y);
    let d_alpha = (at(p.alpha + h, p.beta)? - at(p.alpha - h, p.beta)?) / (2.0 * h);
    let d_beta = (at(p.alpha, p.beta + h)? - at(p.alpha, p.beta - h)?) / (2.0 * h);
    Ok([d_alpha, d_beta])
}

/// Bound on sup_y |∂P/∂α|: |ψ(α)| + α.
pub fn cdf_alpha_derivative_bound(p: &GammaParams) -> Result<f64> {
    p.validate()?;
    Ok(digamma(p.alpha)?.abs() + p.alpha)
}

/// Bound on sup_y |∂P/∂β|: α^α e^{−α} / (β Γ(α)), attained at y = α/β.
pub fn cdf_beta_derivative_bound(p: &GammaParams) -> Result<f64> {
    p.validate()?;
    let a = p.alpha;
    Ok((a * a.ln() - a - log_gamma(a)?).exp() / p.beta)
}

/// Independent priors: α ~ N(mean, variance) truncated to (0, ∞), β ~ Gamma(shape, rate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub alpha_mean: f64,
    pub alpha_variance: f64,
    pub beta_shape: f64,
    pub beta_rate: f64,
}

impl PriorSpec {
    /// TN(2.5, 16, 0, ∞) and Gamma(1, 1).
    pub fn good() -> Self {
        PriorSpec {
            alpha_mean: 2.5,
            alpha_variance: 16.0,
            beta_shape: 1.0,
            beta_rate: 1.0,
        }
    }

    /// TN(1, 0.5, 0, ∞) and Gamma(3, 1.25).
    pub fn bad() -> Self {
        PriorSpec {
            alpha_mean: 1.0,
            alpha_variance: 0.5,
            beta_shape: 3.0,
            beta_rate: 1.25,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.alpha_mean.is_finite() {
            return Err(Error::domain("PriorSpec", self.alpha_mean, "alpha_mean finite"));
        }
        positive("PriorSpec alpha_variance", self.alpha_variance)?;
        positive("PriorSpec beta_shape", self.beta_shape)?;
        positive("PriorSpec beta_rate", self.beta_rate)
    }

    fn alpha_sd(&self) -> f64 {
        self.alpha_variance.sqrt()
    }

    /// ln Φ(μ/σ), the log prior mass of the untruncated normal above zero.
    pub fn log_truncation_mass(&self) -> Result<f64> {
        Ok(normal_cdf(self.alpha_mean / self.alpha_sd())?.ln())
    }

    /// Prior means of (α, β).
    pub fn mean(&self) -> Result<GammaParams> {
        self.validate()?;
        let sd = self.alpha_sd();
        let z = self.alpha_mean / sd;
        let mills = normal_log_pdf(z).exp() / normal_cdf(z)?;
        GammaParams::new(self.alpha_mean + sd * mills, self.beta_shape / self.beta_rate)
    }

    /// Truncated-normal draw for α by rejection from the untruncated normal.
    pub fn sample_alpha<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let sd = self.alpha_sd();
        loop {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            let a = self.alpha_mean + sd * z;
            if a > 0.0 {
                return a;
            }
        }
    }
}

/// Log prior density of (α, β); −∞ outside the support.
pub fn prior_log_pdf(pr: &PriorSpec, p: &GammaParams) -> f64 {
    if !(p.alpha > 0.0 && p.beta > 0.0) || !p.alpha.is_finite() || !p.beta.is_finite() {
        return f64::NEG_INFINITY;
    }
    let Ok(log_mass) = pr.log_truncation_mass() else {
        return f64::NEG_INFINITY;
    };
    let sd = pr.alpha_sd();
    let alpha_term = normal_log_pdf((p.alpha - pr.alpha_mean) / sd) - sd.ln() - log_mass;
    let beta_term = pr.beta_shape * pr.beta_rate.ln() - log_gamma_unchecked(pr.beta_shape)
        + (pr.beta_shape - 1.0) * p.beta.ln()
        - pr.beta_rate * p.beta;
    alpha_term + beta_term
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn gp(alpha: f64, beta: f64) -> GammaParams {
        GammaParams::new(alpha, beta).unwrap()
    }

    #[test]
    fn log_pdf_values() {
        assert_abs_diff_eq!(gamma_log_pdf(&gp(1.0, 1.0), 1.0).unwrap(), -1.0, epsilon = 1e-14);
        let direct = (25.0 * 0.4 * (-2.0f64).exp()).ln();
        assert_abs_diff_eq!(gamma_log_pdf(&gp(2.0, 5.0), 0.4).unwrap(), direct, epsilon = 1e-13);
        assert_abs_diff_eq!(direct, 0.302_585_092_994_045_9, epsilon = 1e-12);
        assert!(gamma_log_pdf(&gp(2.0, 5.0), 0.0).is_err());
        assert!(GammaParams::new(0.0, 1.0).is_err());
    }

    #[test]
    fn cdf_special_points() {
        assert_eq!(gamma_cdf(&gp(3.0, 2.0), 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(gamma_cdf(&gp(1.0, 1.0), 2f64.ln()).unwrap(), 0.5, epsilon = 1e-14);
        assert!(gamma_cdf(&gp(1.0, 1.0), -1.0).is_err());

        let w = ModelSpec::Weibull { shape: 2.0, scale: 0.2 };
        assert_abs_diff_eq!(w.cdf(0, 0.2).unwrap(), 1.0 - (-1.0f64).exp(), epsilon = 1e-15);
        let ln = ModelSpec::Lognormal { mu: 0.0, sigma: 0.5 };
        assert_abs_diff_eq!(ln.cdf(0, 1.0).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn glm_cdf_uses_per_observation_rate() {
        let m = ModelSpec::GammaGlm {
            alpha: 2.0,
            beta: 5.0,
            theta: 0.5,
            covariates: vec![1.0, 3.0],
        };
        let rate = 2.0 / (0.5 + 0.4);
        assert_abs_diff_eq!(m.glm_rate(0).unwrap(), rate, epsilon = 1e-15);
        for &y in &[0.1, 0.5, 1.3] {
            assert_abs_diff_eq!(
                m.cdf(0, y).unwrap(),
                gamma_cdf(&gp(2.0, rate), y).unwrap(),
                epsilon = 1e-15
            );
        }
        assert_eq!(
            m.cdf(2, 0.5),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        );
    }

    #[test]
    fn cdfs_are_monotone_with_correct_limits() {
        let models = [
            ModelSpec::Gamma { alpha: 2.0, beta: 5.0 },
            ModelSpec::Gamma { alpha: 0.4, beta: 1.5 },
            ModelSpec::Weibull { shape: 2.0, scale: 0.2 },
            ModelSpec::Lognormal { mu: 0.0, sigma: 0.5 },
            ModelSpec::GammaGlm {
                alpha: 2.0,
                beta: 5.0,
                theta: 0.5,
                covariates: vec![2.7],
            },
        ];
        for m in &models {
            let mut prev = 0.0;
            for k in 1..=4000 {
                let y = 1e-6 * 1.006f64.powi(k);
                let f = m.cdf(0, y).unwrap();
                assert!(f >= prev, "{m:?} not monotone at {y}");
                prev = f;
            }
            assert!(m.cdf(0, 1e-12).unwrap() < 1e-4);
            assert!(m.cdf(0, 1e4).unwrap() > 1.0 - 1e-9);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_glm_checks_length() {
        let m = ModelSpec::Gamma { alpha: 2.0, beta: 5.0 };
        let a = m.sample(50, &mut stream(11)).unwrap();
        let b = m.sample(50, &mut stream(11)).unwrap();
        assert_eq!(a, b);
        let glm = ModelSpec::GammaGlm {
            alpha: 2.0,
            beta: 5.0,
            theta: 0.5,
            covariates: vec![1.0; 3],
        };
        assert!(matches!(
            glm.sample(4, &mut stream(1)),
            Err(Error::LengthMismatch { expected: 4, found: 3 })
        ));
        assert!(m.sample(0, &mut stream(1)).is_err());
    }

    #[test]
    fn score_and_fisher_values() {
        let s = gamma_score(&gp(1.0, 1.0), 1.0).unwrap();
        assert_abs_diff_eq!(s[0], 0.577_215_664_901_532_9, epsilon = 1e-12);
        assert_eq!(s[1], 0.0);
        let i = gamma_fisher_info(&gp(1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(i[0][0], PI * PI / 6.0, epsilon = 1e-12);
        assert_eq!(i[0][1], -1.0);
        assert_eq!(i[1][0], -1.0);
        assert_eq!(i[1][1], 1.0);
    }

    #[test]
    fn fisher_info_positive_definite() {
        for &a in &[0.05, 0.3, 1.0, 2.0, 10.0, 300.0] {
            for &b in &[0.01, 0.5, 5.0, 100.0] {
                let i = gamma_fisher_info(&gp(a, b)).unwrap();
                let det = i[0][0] * i[1][1] - i[0][1] * i[1][0];
                assert!(i[0][0] > 0.0 && det > 0.0, "alpha={a} beta={b} det={det}");
            }
        }
    }

    #[test]
    fn score_matches_log_pdf_finite_differences() {
        for &(a, b, y) in &[(2.0, 5.0, 0.4), (0.7, 1.3, 2.2), (9.0, 0.5, 11.0)] {
            let s = gamma_score(&gp(a, b), y).unwrap();
            let h = 1e-5;
            let da = (gamma_log_pdf(&gp(a + h, b), y).unwrap() - gamma_log_pdf(&gp(a - h, b), y).unwrap()) / (2.0 * h);
            let db = (gamma_log_pdf(&gp(a, b + h), y).unwrap() - gamma_log_pdf(&gp(a, b - h), y).unwrap()) / (2.0 * h);
            assert_abs_diff_eq!(s[0], da, epsilon = 1e-6);
            assert_abs_diff_eq!(s[1], db, epsilon = 1e-6);
        }
    }

    #[test]
    fn prior_density_terms() {
        let good = PriorSpec::good();
        // β-term alone: Gamma(1,1) at β = 1 is e^{-1}.
        let alpha_only = prior_log_pdf(&good, &gp(2.5, 1.0));
        let expected_alpha = -0.5 * (2.0 * PI * 16.0).ln() - normal_cdf(2.5 / 4.0).unwrap().ln();
        assert_abs_diff_eq!(alpha_only, expected_alpha - 1.0, epsilon = 1e-12);

        let off = GammaParams { alpha: -1.0, beta: 1.0 };
        assert_eq!(prior_log_pdf(&good, &off), f64::NEG_INFINITY);
        let off = GammaParams { alpha: 1.0, beta: 0.0 };
        assert_eq!(prior_log_pdf(&good, &off), f64::NEG_INFINITY);
    }

    #[test]
    fn prior_means_and_truncated_sampler() {
        let good = PriorSpec::good();
        let m = good.mean().unwrap();
        assert_abs_diff_eq!(m.beta, 1.0, epsilon = 1e-15);
        let mut rng = stream(5);
        let draws: Vec<f64> = (0..200_000).map(|_| good.sample_alpha(&mut rng)).collect();
        assert!(draws.iter().all(|a| *a > 0.0));
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        // sd ≈ 3.2 for the truncated law
        assert!((mean - m.alpha).abs() < 0.03, "{mean} vs {}", m.alpha);
    }

    #[test]
    fn fd_gradient_step_must_stay_in_domain() {
        assert!(cdf_param_grad_fd(&gp(1.0, 1.0), 1.0, 1.5).is_err());
        assert!(cdf_param_grad_fd(&gp(1.0, 1.0), 1.0, 0.0).is_err());
        let y = 0.8;
        let g = cdf_param_grad_fd(&gp(1.0, 1.0), y, 1e-5).unwrap();
        assert_abs_diff_eq!(g[1], y * (-y).exp(), epsilon = 1e-6);
    }
}
