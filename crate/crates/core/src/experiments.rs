//! Replication harness for null-calibration, power and contiguity studies.
//!
//! Replication `i` of an experiment draws all of its randomness from the
//! stream seeded by `mix(master_seed, i)`, so results are identical for any
//! worker count and any scheduling order.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{gamma_mle, EstimatorKind};
use crate::mcmc::McmcSettings;
use crate::models::{draw_covariates, gamma_cdf, GammaParams, ModelSpec, PriorSpec};
use crate::ppp::{estimate_ppp_multi, estimator_for, two_sided, Statistic, TestStatistic};
use crate::rng::{mix, stream, substream};
use crate::statistics::{
    modified_ks, two_sample_ks_distance, two_sample_ks_quantile, uniformity_ks_distance, Sidedness,
    StatisticKind,
};

/// Levels at which rejection rates are summarized.
pub const REPORT_LEVELS: [f64; 3] = [0.01, 0.05, 0.1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    NullCalibration,
    Power,
    Contiguity,
}

/// Data-generating model as configured. GLM covariates are drawn per
/// replication from Lognormal(covariate_mu, covariate_sigma).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataModel {
    Gamma { alpha: f64, beta: f64 },
    Weibull { shape: f64, scale: f64 },
    Lognormal { mu: f64, sigma: f64 },
    GammaGlm { alpha: f64, beta: f64, theta: f64 },
}

impl DataModel {
    /// Gamma(2, 5).
    pub fn null() -> Self {
        DataModel::Gamma { alpha: 2.0, beta: 5.0 }
    }

    /// Weibull with shape 2 and scale 1/5.
    pub fn weibull() -> Self {
        DataModel::Weibull { shape: 2.0, scale: 0.2 }
    }

    pub fn lognormal() -> Self {
        DataModel::Lognormal { mu: 0.0, sigma: 0.5 }
    }

    pub fn gamma_glm() -> Self {
        DataModel::GammaGlm {
            alpha: 2.0,
            beta: 5.0,
            theta: 0.5,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            DataModel::Gamma { .. } => "gamma",
            DataModel::Weibull { .. } => "weibull",
            DataModel::Lognormal { .. } => "lognormal",
            DataModel::GammaGlm { .. } => "gamma_glm",
        }
    }

    /// Binds the per-replication covariates.
    pub fn resolve(&self, covariates: &[f64]) -> ModelSpec {
        match *self {
            DataModel::Gamma { alpha, beta } => ModelSpec::Gamma { alpha, beta },
            DataModel::Weibull { shape, scale } => ModelSpec::Weibull { shape, scale },
            DataModel::Lognormal { mu, sigma } => ModelSpec::Lognormal { mu, sigma },
            DataModel::GammaGlm { alpha, beta, theta } => ModelSpec::GammaGlm {
                alpha,
                beta,
                theta,
                covariates: covariates.to_vec(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateSpec {
    pub mu: f64,
    pub sigma: f64,
}

impl Default for CovariateSpec {
    fn default() -> Self {
        CovariateSpec { mu: 0.5, sigma: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub replications: usize,
    pub prior: PriorSpec,
    pub estimator: EstimatorKind,
    pub statistics: Vec<StatisticKind>,
    pub data_model: DataModel,
    pub covariates: CovariateSpec,
    pub mcmc: McmcSettings,
    pub predictive_refit_mcmc: McmcSettings,
    pub m_draws: Option<usize>,
    pub master_seed: u64,
    pub parallelism: usize,
}

impl ExperimentConfig {
    /// Null calibration at sample size `n` with desk-scale defaults.
    pub fn null_calibration(n: usize, prior: PriorSpec, estimator: EstimatorKind) -> Self {
        ExperimentConfig {
            scenario: Scenario::NullCalibration,
            n,
            replications: 500,
            prior,
            estimator,
            statistics: vec![StatisticKind::ModifiedKs],
            data_model: DataModel::null(),
            covariates: CovariateSpec::default(),
            mcmc: McmcSettings::default(),
            predictive_refit_mcmc: McmcSettings::predictive_refit(),
            m_draws: Some(500),
            master_seed: 20240101,
            parallelism: 1,
        }
    }

    /// Power study under `data_model` with the three comparison statistics.
    pub fn power(data_model: DataModel, n: usize, prior: PriorSpec, estimator: EstimatorKind) -> Self {
        ExperimentConfig {
            scenario: Scenario::Power,
            statistics: vec![
                StatisticKind::ModifiedKs,
                StatisticKind::ChiSquared,
                StatisticKind::Score,
            ],
            data_model,
            ..Self::null_calibration(n, prior, estimator)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be >= 1".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be >= 1".into()));
        }
        if self.statistics.is_empty() {
            return Err(Error::InvalidConfig("statistics must not be empty".into()));
        }
        if self.parallelism == 0 {
            return Err(Error::InvalidConfig("parallelism must be >= 1".into()));
        }
        self.prior.validate()?;
        self.mcmc.validate()?;
        self.predictive_refit_mcmc.validate()?;
        if !(self.covariates.mu.is_finite() && self.covariates.sigma > 0.0) {
            return Err(Error::InvalidConfig("covariates need finite mu and sigma > 0".into()));
        }
        self.data_model.resolve(&vec![1.0; self.n]).validate()
    }

    fn needs_covariates(&self) -> bool {
        matches!(self.data_model, DataModel::GammaGlm { .. })
            || self.statistics.iter().any(StatisticKind::requires_covariates)
    }
}

/// One (replication, statistic) outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub replication: usize,
    pub statistic: StatisticKind,
    pub p_value: Option<f64>,
    pub two_sided_p: Option<f64>,
    pub t_obs: Option<f64>,
    pub alpha_hat: Option<f64>,
    pub beta_hat: Option<f64>,
    pub acceptance_rate: Option<f64>,
    pub m_draws: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RejectionRate {
    pub level: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticSummary {
    pub statistic: StatisticKind,
    pub sidedness: Sidedness,
    pub completed: usize,
    pub excluded: usize,
    pub mean: f64,
    pub variance: f64,
    pub uniformity_ks_distance: f64,
    pub rejection_rates: Vec<RejectionRate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rows: Vec<ExperimentRow>,
    pub summary: Vec<StatisticSummary>,
}

impl ExperimentResult {
    /// Successful p-values for `kind`, ordered by replication.
    pub fn p_values(&self, kind: StatisticKind) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.statistic == kind)
            .filter_map(|r| r.p_value)
            .collect()
    }

    pub fn summary_for(&self, kind: StatisticKind) -> Option<&StatisticSummary> {
        self.summary.iter().find(|s| s.statistic == kind)
    }
}

/// Fraction of p-values rejected at `level`; two-sided values are folded
/// with 2·min(p, 1 − p) first.
pub fn rejection_rate(ppp_values: &[f64], level: f64, sidedness: Sidedness) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain("rejection_rate", level, "0 < level < 1"));
    }
    if ppp_values.is_empty() {
        return Err(Error::InvalidConfig("rejection rate of an empty sample".into()));
    }
    let mut rejected = 0usize;
    for &p in ppp_values {
        let q = match sidedness {
            Sidedness::OneSided => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::domain("rejection_rate", p, "0 <= p <= 1"));
                }
                p
            }
            Sidedness::TwoSided => two_sided(p)?,
        };
        if q <= level {
            rejected += 1;
        }
    }
    Ok(rejected as f64 / ppp_values.len() as f64)
}

/// Runs one replication with an explicit seed.
pub fn run_replication(cfg: &ExperimentConfig, replication: usize, seed: u64) -> Vec<ExperimentRow> {
    match replication_inner(cfg, seed) {
        Ok(run) => cfg
            .statistics
            .iter()
            .zip(run.results)
            .map(|(&statistic, r)| ExperimentRow {
                replication,
                statistic,
                p_value: Some(r.p_value),
                two_sided_p: r.two_sided_p,
                t_obs: Some(r.t_obs),
                alpha_hat: Some(run.observed_estimate.alpha),
                beta_hat: Some(run.observed_estimate.beta),
                acceptance_rate: Some(run.acceptance_rate),
                m_draws: Some(r.m_draws),
                error: None,
            })
            .collect(),
        Err(e) => {
            log::warn!("replication {replication} failed: {e}");
            cfg.statistics
                .iter()
                .map(|&statistic| ExperimentRow {
                    replication,
                    statistic,
                    p_value: None,
                    two_sided_p: None,
                    t_obs: None,
                    alpha_hat: None,
                    beta_hat: None,
                    acceptance_rate: None,
                    m_draws: None,
                    error: Some(e.to_string()),
                })
                .collect()
        }
    }
}

fn replication_inner(cfg: &ExperimentConfig, seed: u64) -> Result<crate::ppp::PppRun> {
    let mut rng = stream(seed);
    let covariates = if cfg.needs_covariates() {
        draw_covariates(cfg.n, cfg.covariates.mu, cfg.covariates.sigma, &mut rng)?
    } else {
        Vec::new()
    };
    let model = cfg.data_model.resolve(&covariates);
    let data = model.sample(cfg.n, &mut rng)?;

    let statistics: Vec<Statistic> = cfg
        .statistics
        .iter()
        .map(|&k| Statistic::new(k, k.requires_covariates().then(|| covariates.clone())))
        .collect::<Result<_>>()?;
    let refs: Vec<&dyn TestStatistic> = statistics.iter().map(|s| s as &dyn TestStatistic).collect();
    let estimator = estimator_for(cfg.estimator, &cfg.prior, &cfg.predictive_refit_mcmc);
    estimate_ppp_multi(&data, &cfg.prior, &cfg.mcmc, cfg.m_draws, estimator.as_ref(), &refs, &mut rng)
}

/// Runs replications with the given seeds, in parallel, gathered by index.
pub fn run_with_seeds(cfg: &ExperimentConfig, seeds: &[u64]) -> Result<ExperimentResult> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let per_rep: Vec<Vec<ExperimentRow>> = pool.install(|| {
        seeds
            .par_iter()
            .enumerate()
            .map(|(i, &seed)| run_replication(cfg, i, seed))
            .collect()
    });
    let rows: Vec<ExperimentRow> = per_rep.into_iter().flatten().collect();
    let summary = cfg
        .statistics
        .iter()
        .map(|&k| summarize(&rows, k))
        .collect::<Result<_>>()?;
    Ok(ExperimentResult { rows, summary })
}

pub fn replication_seeds(master_seed: u64, replications: usize) -> Vec<u64> {
    (0..replications as u64).map(|i| mix(master_seed, i)).collect()
}

fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run_with_seeds(cfg, &replication_seeds(cfg.master_seed, cfg.replications))
}

fn summarize(rows: &[ExperimentRow], kind: StatisticKind) -> Result<StatisticSummary> {
    let mine: Vec<&ExperimentRow> = rows.iter().filter(|r| r.statistic == kind).collect();
    let p: Vec<f64> = mine.iter().filter_map(|r| r.p_value).collect();
    let excluded = mine.len() - p.len();
    let sidedness = kind.sidedness();
    if p.is_empty() {
        return Ok(StatisticSummary {
            statistic: kind,
            sidedness,
            completed: 0,
            excluded,
            mean: f64::NAN,
            variance: f64::NAN,
            uniformity_ks_distance: f64::NAN,
            rejection_rates: Vec::new(),
        });
    }
    let m = p.len() as f64;
    let mean = p.iter().sum::<f64>() / m;
    let variance = if p.len() > 1 {
        p.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    let rejection_rates = REPORT_LEVELS
        .iter()
        .map(|&level| {
            Ok(RejectionRate {
                level,
                rate: rejection_rate(&p, level, sidedness)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(StatisticSummary {
        statistic: kind,
        sidedness,
        completed: p.len(),
        excluded,
        mean,
        variance,
        uniformity_ks_distance: uniformity_ks_distance(&p)?,
        rejection_rates,
    })
}

/// Null-calibration study: data from the gamma null model.
pub fn run_null_calibration(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    if cfg.scenario != Scenario::NullCalibration {
        return Err(Error::InvalidConfig("scenario must be null_calibration".into()));
    }
    if !matches!(cfg.data_model, DataModel::Gamma { .. }) {
        return Err(Error::InvalidConfig(
            "null calibration requires the gamma data model".into(),
        ));
    }
    run_experiment(cfg)
}

/// Power study: data from `cfg.data_model`, analysis under the gamma null.
/// The gamma model itself is accepted so a null reference row can be produced.
pub fn run_power(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    if cfg.scenario != Scenario::Power {
        return Err(Error::InvalidConfig("scenario must be power".into()));
    }
    run_experiment(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContiguityReport {
    pub n: usize,
    pub c: f64,
    pub replications: usize,
    pub theta0: GammaParams,
    pub theta_n: GammaParams,
    /// Two-sample KS distance between the statistic's samples under θ₀ and θₙ.
    pub distance: f64,
    /// Asymptotic 99% quantile of that distance when both laws coincide.
    pub band_99: f64,
}

/// Modified KS statistic (MLE plug-in) on one dataset of size `n` from `theta`.
fn ks_under<R: Rng + ?Sized>(theta: GammaParams, n: usize, rng: &mut R) -> Result<f64> {
    let data = ModelSpec::gamma(theta).sample(n, rng)?;
    let est = gamma_mle(&data)?;
    modified_ks(&data, |y| gamma_cdf(&est, y))
}

/// Compares the modified KS statistic's sampling law under θ₀ = (2, 5) and
/// under θₙ = θ₀ + c·(1, 1)/√n.
pub fn run_contiguity_check(n: usize, c: f64, replications: usize, seed: u64) -> Result<ContiguityReport> {
    if n < 100 {
        return Err(Error::InvalidConfig(format!("contiguity check needs n >= 100, got {n}")));
    }
    if replications == 0 {
        return Err(Error::InvalidConfig("replications must be >= 1".into()));
    }
    let theta0 = GammaParams::new(2.0, 5.0)?;
    let shift = c / (n as f64).sqrt();
    let theta_n = GammaParams::new(theta0.alpha + shift, theta0.beta + shift)?;
    let simulate = |theta: GammaParams, arm: u64| -> Result<Vec<f64>> {
        let arm_seed = mix(seed, arm);
        (0..replications as u64)
            .into_par_iter()
            .map(|k| ks_under(theta, n, &mut substream(arm_seed, k)))
            .collect::<Vec<_>>()
            .into_iter()
            .collect()
    };
    let under_null = simulate(theta0, 0)?;
    let under_local = simulate(theta_n, 1)?;
    Ok(ContiguityReport {
        n,
        c,
        replications,
        theta0,
        theta_n,
        distance: two_sample_ks_distance(&under_null, &under_local)?,
        band_99: two_sample_ks_quantile(0.99, replications, replications)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(parallelism: usize) -> ExperimentConfig {
        ExperimentConfig {
            replications: 6,
            mcmc: McmcSettings {
                burn_in: 200,
                iterations: 500,
                thin: 5,
                ..McmcSettings::default()
            },
            m_draws: Some(100),
            parallelism,
            ..ExperimentConfig::power(DataModel::gamma_glm(), 20, PriorSpec::good(), EstimatorKind::Mle)
        }
    }

    #[test]
    fn rejection_rate_examples() {
        assert_eq!(rejection_rate(&[1.0; 10], 0.05, Sidedness::OneSided).unwrap(), 0.0);
        assert_eq!(rejection_rate(&[0.0; 10], 0.05, Sidedness::OneSided).unwrap(), 1.0);
        assert_eq!(rejection_rate(&[0.99, 0.5], 0.05, Sidedness::TwoSided).unwrap(), 0.5);
        assert!(rejection_rate(&[0.5], 1.0, Sidedness::OneSided).is_err());
        assert!(rejection_rate(&[1.5], 0.1, Sidedness::OneSided).is_err());
    }

    #[test]
    fn rows_per_statistic_and_determinism_across_workers() {
        let a = run_power(&tiny(1)).unwrap();
        let b = run_power(&tiny(3)).unwrap();
        assert_eq!(a.rows.len(), 6 * 3);
        assert_eq!(a, b);
        assert!(a.rows.iter().all(|r| r.p_value.is_some_and(|p| (0.0..=1.0).contains(&p))));
    }

    #[test]
    fn changing_one_seed_changes_only_that_row() {
        let cfg = tiny(2);
        let mut seeds = replication_seeds(cfg.master_seed, cfg.replications);
        let base = run_with_seeds(&cfg, &seeds).unwrap();
        seeds[2] ^= 0xDEAD_BEEF;
        let altered = run_with_seeds(&cfg, &seeds).unwrap();
        for (x, y) in base.rows.iter().zip(&altered.rows) {
            if x.replication == 2 {
                assert_ne!(x, y);
            } else {
                assert_eq!(x, y);
            }
        }
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        // n = 1 leaves the MLE undefined for every replication.
        let cfg = ExperimentConfig {
            n: 1,
            statistics: vec![StatisticKind::ModifiedKs],
            ..tiny(1)
        };
        let res = run_power(&cfg).unwrap();
        assert_eq!(res.rows.len(), 6);
        assert!(res.rows.iter().all(|r| r.error.is_some() && r.p_value.is_none()));
        assert_eq!(res.summary[0].excluded, 6);
    }

    #[test]
    fn scenario_guards() {
        let cfg = tiny(1);
        assert!(run_null_calibration(&cfg).is_err());
        let cfg = ExperimentConfig::null_calibration(10, PriorSpec::good(), EstimatorKind::Mle);
        assert!(run_power(&cfg).is_err());
        let bad = ExperimentConfig {
            data_model: DataModel::weibull(),
            ..cfg
        };
        assert!(run_null_calibration(&bad).is_err());
        assert!(run_contiguity_check(50, 1.0, 10, 1).is_err());
    }
}
