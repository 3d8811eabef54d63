//! Monte Carlo estimation of posterior predictive p-values.
//!
//! For an observed dataset the recipe is:
//!
//! 1. draw from the posterior of (α, β) under the gamma model;
//! 2. compute the plug-in estimate and the statistic on the observed data;
//! 3. for every retained draw θ⁽ᵐ⁾ simulate a dataset of the same size from
//!    Gamma(θ⁽ᵐ⁾), re-estimate with the *same* estimator and evaluate the
//!    statistic;
//! 4. report the fraction of replicates whose statistic is ≥ the observed one.
//!
//! Replicates are independent given the chain and run in parallel, each on a
//! random stream keyed by its replicate index, so the result does not depend
//! on scheduling.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{gamma_mle, posterior_mean, EstimatorKind};
use crate::mcmc::{run_chain, ChainOutput, McmcSettings};
use crate::models::{gamma_cdf, Dataset, GammaParams, ModelSpec, PriorSpec};
use crate::rng::{substream, Stream};
use crate::statistics::{chi_squared_stat, modified_ks, pit_ks, score_stat, Sidedness, StatisticKind};

/// Smallest number of predictive replicates accepted for a reported p-value.
pub const MIN_DRAWS: usize = 100;

/// Estimator applied to the observed dataset and to every predictive dataset.
pub trait PlugInEstimator: Sync {
    /// `chain` is the posterior chain of the observed data when estimating on
    /// the observed data, and `None` for predictive datasets.
    fn estimate(&self, data: &Dataset, chain: Option<&ChainOutput>, rng: &mut Stream) -> Result<GammaParams>;
}

pub struct MleEstimator;

impl PlugInEstimator for MleEstimator {
    fn estimate(&self, data: &Dataset, _chain: Option<&ChainOutput>, _rng: &mut Stream) -> Result<GammaParams> {
        gamma_mle(data)
    }
}

/// Posterior mean; predictive datasets are refitted with `refit` settings.
pub struct PosteriorMeanEstimator {
    pub prior: PriorSpec,
    pub refit: McmcSettings,
}

impl PlugInEstimator for PosteriorMeanEstimator {
    fn estimate(&self, data: &Dataset, chain: Option<&ChainOutput>, rng: &mut Stream) -> Result<GammaParams> {
        match chain {
            Some(c) => posterior_mean(c),
            None => posterior_mean(&run_chain(data, &self.prior, &self.refit, rng)?),
        }
    }
}

pub fn estimator_for(kind: EstimatorKind, prior: &PriorSpec, refit: &McmcSettings) -> Box<dyn PlugInEstimator> {
    match kind {
        EstimatorKind::Mle => Box::new(MleEstimator),
        EstimatorKind::PosteriorMean => Box::new(PosteriorMeanEstimator {
            prior: *prior,
            refit: *refit,
        }),
    }
}

/// A discrepancy measure evaluated at a plug-in estimate.
pub trait TestStatistic: Sync {
    fn evaluate(&self, data: &Dataset, est: &GammaParams) -> Result<f64>;

    fn sidedness(&self) -> Sidedness {
        Sidedness::OneSided
    }
}

/// One of the built-in statistics, bound to the covariates it needs.
#[derive(Debug, Clone)]
pub struct Statistic {
    kind: StatisticKind,
    covariates: Option<Vec<f64>>,
}

impl Statistic {
    pub fn new(kind: StatisticKind, covariates: Option<Vec<f64>>) -> Result<Self> {
        if kind.requires_covariates() && covariates.is_none() {
            return Err(Error::InvalidConfig(format!(
                "statistic {} requires a covariate vector",
                kind.label()
            )));
        }
        Ok(Statistic { kind, covariates })
    }

    pub fn kind(&self) -> StatisticKind {
        self.kind
    }
}

impl TestStatistic for Statistic {
    fn evaluate(&self, data: &Dataset, est: &GammaParams) -> Result<f64> {
        match self.kind {
            StatisticKind::ModifiedKs => modified_ks(data, |y| gamma_cdf(est, y)),
            StatisticKind::PitKs => pit_ks(data, |_, y| gamma_cdf(est, y)),
            StatisticKind::ChiSquared => chi_squared_stat(data, est),
            StatisticKind::Score => {
                let x = self.covariates.as_deref().ok_or_else(|| {
                    Error::InvalidConfig("score statistic requires covariates".into())
                })?;
                score_stat(data, x, est)
            }
        }
    }

    fn sidedness(&self) -> Sidedness {
        self.kind.sidedness()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PppConfig {
    pub estimator: EstimatorKind,
    pub statistic: StatisticKind,
    pub mcmc: McmcSettings,
    pub predictive_refit_mcmc: McmcSettings,
    /// Number of posterior draws turned into predictive datasets; `None`
    /// uses every retained draw.
    pub m_draws: Option<usize>,
}

impl Default for PppConfig {
    fn default() -> Self {
        PppConfig {
            estimator: EstimatorKind::Mle,
            statistic: StatisticKind::ModifiedKs,
            mcmc: McmcSettings::default(),
            predictive_refit_mcmc: McmcSettings::predictive_refit(),
            m_draws: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PppResult {
    pub p_value: f64,
    pub t_obs: f64,
    pub t_replicates: Vec<f64>,
    pub m_draws: usize,
    pub two_sided_p: Option<f64>,
}

/// Everything one ppp evaluation produces, for one or more statistics sharing
/// the same chain and predictive datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct PppRun {
    pub results: Vec<PppResult>,
    pub observed_estimate: GammaParams,
    pub acceptance_rate: f64,
}

/// 2 · min(p, 1 − p).
pub fn two_sided(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain("two_sided", p, "0 <= p <= 1"));
    }
    Ok((2.0 * p.min(1.0 - p)).clamp(0.0, 1.0))
}

/// Assembles the counting estimate #{t_rep ≥ t_obs} / m.
pub fn ppp_from_replicates(t_obs: f64, t_replicates: Vec<f64>, sidedness: Sidedness) -> Result<PppResult> {
    if t_replicates.is_empty() {
        return Err(Error::InvalidConfig("no predictive replicates".into()));
    }
    if t_obs.is_nan() || t_replicates.iter().any(|t| t.is_nan()) {
        return Err(Error::Numerical("test statistic evaluated to NaN".into()));
    }
    let m = t_replicates.len();
    let exceed = t_replicates.iter().filter(|&&t| t >= t_obs).count();
    let p_value = exceed as f64 / m as f64;
    let two_sided_p = match sidedness {
        Sidedness::OneSided => None,
        Sidedness::TwoSided => Some(two_sided(p_value)?),
    };
    Ok(PppResult {
        p_value,
        t_obs,
        t_replicates,
        m_draws: m,
        two_sided_p,
    })
}

/// Indices of `m` draws spread evenly over a chain of length `len`.
fn select_draws(len: usize, m: usize) -> Vec<usize> {
    (0..m).map(|k| k * len / m).collect()
}

/// Single-statistic ppp driven by a [`PppConfig`].
pub fn estimate_ppp<R: Rng + ?Sized>(
    observed: &Dataset,
    pr: &PriorSpec,
    cfg: &PppConfig,
    covariates: Option<&[f64]>,
    rng: &mut R,
) -> Result<PppResult> {
    let statistic = Statistic::new(cfg.statistic, covariates.map(<[f64]>::to_vec))?;
    let estimator = estimator_for(cfg.estimator, pr, &cfg.predictive_refit_mcmc);
    let run = estimate_ppp_multi(observed, pr, &cfg.mcmc, cfg.m_draws, estimator.as_ref(), &[&statistic], rng)?;
    Ok(run.results.into_iter().next().expect("one statistic requested"))
}

/// Runs the posterior chain on `observed`, then evaluates every statistic on
/// a shared set of predictive datasets.
pub fn estimate_ppp_multi<R: Rng + ?Sized>(
    observed: &Dataset,
    pr: &PriorSpec,
    mcmc: &McmcSettings,
    m_draws: Option<usize>,
    estimator: &dyn PlugInEstimator,
    statistics: &[&dyn TestStatistic],
    rng: &mut R,
) -> Result<PppRun> {
    let chain_seed: u64 = rng.gen();
    let replicate_seed: u64 = rng.gen();
    let mut chain_rng = crate::rng::stream(chain_seed);
    let chain = run_chain(observed, pr, mcmc, &mut chain_rng)?;
    estimate_ppp_from_chain(observed, &chain, m_draws, estimator, statistics, replicate_seed)
}

/// Steps 2–4 of the recipe for an already computed chain. Replicate `k`
/// uses the stream `substream(replicate_seed, k)`.
pub fn estimate_ppp_from_chain(
    observed: &Dataset,
    chain: &ChainOutput,
    m_draws: Option<usize>,
    estimator: &dyn PlugInEstimator,
    statistics: &[&dyn TestStatistic],
    replicate_seed: u64,
) -> Result<PppRun> {
    if statistics.is_empty() {
        return Err(Error::InvalidConfig("no statistics requested".into()));
    }
    if chain.draws.is_empty() {
        return Err(Error::EmptyChain);
    }
    let m = m_draws.unwrap_or(chain.draws.len());
    if m < MIN_DRAWS {
        return Err(Error::InvalidConfig(format!(
            "m_draws = {m} is below the Monte Carlo floor of {MIN_DRAWS}"
        )));
    }
    if m > chain.draws.len() {
        return Err(Error::InvalidConfig(format!(
            "m_draws = {m} exceeds the {} retained posterior draws",
            chain.draws.len()
        )));
    }

    // The observed-data estimate gets its own stream, disjoint from the replicates.
    let mut obs_rng = substream(replicate_seed, u64::MAX);
    let observed_estimate = estimator.estimate(observed, Some(chain), &mut obs_rng)?;
    let t_obs: Vec<f64> = statistics
        .iter()
        .map(|s| s.evaluate(observed, &observed_estimate))
        .collect::<Result<_>>()?;

    let n = observed.n();
    let indices = select_draws(chain.draws.len(), m);
    let per_replicate: Vec<Result<Vec<f64>>> = indices
        .par_iter()
        .enumerate()
        .map(|(k, &idx)| {
            let mut rng = substream(replicate_seed, k as u64);
            let theta = chain.draws[idx];
            let data = ModelSpec::gamma(theta).sample(n, &mut rng)?;
            let est = estimator.estimate(&data, None, &mut rng).map_err(|e| match e {
                Error::DegenerateData(msg) => {
                    Error::DegenerateData(format!("predictive replicate {k}: {msg}"))
                }
                other => other,
            })?;
            statistics.iter().map(|s| s.evaluate(&data, &est)).collect()
        })
        .collect();

    let mut columns = vec![Vec::with_capacity(m); statistics.len()];
    for row in per_replicate {
        for (col, v) in columns.iter_mut().zip(row?) {
            col.push(v);
        }
    }

    let results = statistics
        .iter()
        .zip(t_obs)
        .zip(columns)
        .map(|((s, t), reps)| ppp_from_replicates(t, reps, s.sidedness()))
        .collect::<Result<_>>()?;

    Ok(PppRun {
        results,
        observed_estimate,
        acceptance_rate: chain.acceptance_rate,
    })
}
