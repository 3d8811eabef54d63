//! Posterior predictive p-values for goodness-of-fit checks of the gamma model.
//!
//! The crate covers the special functions behind the gamma family, the null
//! and alternative data models, plug-in estimation (MLE and posterior mean),
//! a Metropolis sampler for the gamma posterior, the modified
//! Kolmogorov–Smirnov, chi-squared and score statistics, Monte Carlo ppp
//! estimation, and a replication harness for calibration and power studies.

pub mod error;
pub mod estimation;
pub mod experiments;
pub mod mcmc;
pub mod models;
pub mod oracle;
pub mod ppp;
pub mod rng;
pub mod selftest;
pub mod specfun;
pub mod statistics;

pub use error::{Error, Result};
pub use estimation::{gamma_mle, posterior_mean, EstimatorKind};
pub use experiments::{
    rejection_rate, run_contiguity_check, run_null_calibration, run_power, ContiguityReport, DataModel,
    ExperimentConfig, ExperimentResult, ExperimentRow, Scenario,
};
pub use mcmc::{log_posterior, run_chain, ChainOutput, McmcSettings};
pub use models::{Dataset, GammaParams, ModelSpec, PriorSpec};
pub use ppp::{estimate_ppp, two_sided, PppConfig, PppResult};
pub use statistics::{uniformity_ks_distance, Sidedness, StatisticKind};
