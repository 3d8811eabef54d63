//! JSON configuration documents for each subcommand.
//!
//! Every top-level key is optional in the input; the resolved document
//! (defaults applied, command-line overrides folded in) is what gets written
//! to `resolved_config.json` and hashed into the manifest.

use std::path::Path;

use pppks::experiments::{CovariateSpec, REPORT_LEVELS};
use pppks::{DataModel, EstimatorKind, McmcSettings, PriorSpec, StatisticKind};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PppCommandConfig {
    pub prior: PriorSpec,
    pub estimator: EstimatorKind,
    pub statistic: StatisticKind,
    pub mcmc: McmcSettings,
    pub predictive_refit_mcmc: McmcSettings,
    pub m_draws: Option<usize>,
    /// Required when `statistic` is `score`; one value per observation.
    pub covariates: Option<Vec<f64>>,
    pub seed: u64,
    pub parallelism: usize,
}

impl Default for PppCommandConfig {
    fn default() -> Self {
        PppCommandConfig {
            prior: PriorSpec::good(),
            estimator: EstimatorKind::Mle,
            statistic: StatisticKind::ModifiedKs,
            mcmc: McmcSettings::default(),
            predictive_refit_mcmc: McmcSettings::predictive_refit(),
            m_draws: None,
            covariates: None,
            seed: 1,
            parallelism: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedPrior {
    pub name: String,
    pub prior: PriorSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub priors: Vec<NamedPrior>,
    pub estimators: Vec<EstimatorKind>,
    pub sample_sizes: Vec<usize>,
    pub statistic: StatisticKind,
    pub data_model: DataModel,
    pub replications: usize,
    pub m_draws: Option<usize>,
    pub mcmc: McmcSettings,
    pub predictive_refit_mcmc: McmcSettings,
    pub covariates: CovariateSpec,
    pub master_seed: u64,
    pub parallelism: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            priors: vec![
                NamedPrior {
                    name: "good".into(),
                    prior: PriorSpec::good(),
                },
                NamedPrior {
                    name: "bad".into(),
                    prior: PriorSpec::bad(),
                },
            ],
            estimators: vec![EstimatorKind::Mle, EstimatorKind::PosteriorMean],
            sample_sizes: vec![10, 20, 100, 500],
            statistic: StatisticKind::ModifiedKs,
            data_model: DataModel::null(),
            replications: 500,
            m_draws: Some(500),
            mcmc: McmcSettings::default(),
            predictive_refit_mcmc: McmcSettings::predictive_refit(),
            covariates: CovariateSpec::default(),
            master_seed: 20240101,
            parallelism: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerConfig {
    pub data_models: Vec<DataModel>,
    pub statistics: Vec<StatisticKind>,
    pub n: usize,
    pub prior: PriorSpec,
    pub estimator: EstimatorKind,
    pub replications: usize,
    pub m_draws: Option<usize>,
    pub mcmc: McmcSettings,
    pub predictive_refit_mcmc: McmcSettings,
    pub covariates: CovariateSpec,
    pub levels: Vec<f64>,
    pub master_seed: u64,
    pub parallelism: usize,
}

impl Default for PowerConfig {
    fn default() -> Self {
        PowerConfig {
            data_models: vec![
                DataModel::null(),
                DataModel::weibull(),
                DataModel::lognormal(),
                DataModel::gamma_glm(),
            ],
            statistics: vec![StatisticKind::ModifiedKs, StatisticKind::ChiSquared, StatisticKind::Score],
            n: 100,
            prior: PriorSpec::good(),
            estimator: EstimatorKind::Mle,
            replications: 300,
            m_draws: Some(500),
            mcmc: McmcSettings::default(),
            predictive_refit_mcmc: McmcSettings::predictive_refit(),
            covariates: CovariateSpec::default(),
            levels: REPORT_LEVELS.to_vec(),
            master_seed: 20240101,
            parallelism: 1,
        }
    }
}

/// Reads and parses a config file. A missing or malformed file is a config error.
pub fn load<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn config_err(e: pppks::Error) -> CliError {
    CliError::Config(e.to_string())
}

impl PppCommandConfig {
    pub fn validate(&self) -> CliResult<()> {
        self.prior.validate().map_err(config_err)?;
        self.mcmc.validate().map_err(config_err)?;
        self.predictive_refit_mcmc.validate().map_err(config_err)?;
        if self.parallelism == 0 {
            return Err(CliError::Config("parallelism must be >= 1".into()));
        }
        if self.statistic.requires_covariates() && self.covariates.is_none() {
            return Err(CliError::Config("covariates: required by the score statistic".into()));
        }
        Ok(())
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.priors.is_empty() || self.estimators.is_empty() || self.sample_sizes.is_empty() {
            return Err(CliError::Config(
                "priors, estimators and sample_sizes must be non-empty".into(),
            ));
        }
        let mut names: Vec<&str> = self.priors.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.priors.len() {
            return Err(CliError::Config("priors: names must be unique".into()));
        }
        if let Some(bad) = self.priors.iter().find(|p| !valid_label(&p.name)) {
            return Err(CliError::Config(format!(
                "priors: name {:?} must be non-empty [A-Za-z0-9_-]",
                bad.name
            )));
        }
        if !matches!(self.data_model, DataModel::Gamma { .. }) {
            return Err(CliError::Config("data_model: calibration requires the gamma family".into()));
        }
        Ok(())
    }
}

impl PowerConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.data_models.is_empty() || self.statistics.is_empty() {
            return Err(CliError::Config("data_models and statistics must be non-empty".into()));
        }
        if let Some(l) = self.levels.iter().find(|&&l| !(l > 0.0 && l < 1.0)) {
            return Err(CliError::Config(format!("levels: {l} is outside (0, 1)")));
        }
        let mut labels: Vec<&str> = self.data_models.iter().map(DataModel::label).collect();
        labels.sort_unstable();
        labels.dedup();
        if labels.len() != self.data_models.len() {
            return Err(CliError::Config("data_models: at most one model per family".into()));
        }
        Ok(())
    }
}

fn valid_label(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_resolves_to_defaults() {
        let c: CalibrationConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, CalibrationConfig::default());
        assert_eq!(c.priors.len() * c.estimators.len() * c.sample_sizes.len(), 16);
        let p: PowerConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(p.data_models.len() * p.statistics.len(), 12);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<PppCommandConfig>(r#"{"sead": 3}"#).is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = PowerConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<PowerConfig>(&text).unwrap(), c);
    }

    #[test]
    fn score_without_covariates_is_a_config_error() {
        let c = PppCommandConfig {
            statistic: StatisticKind::Score,
            ..Default::default()
        };
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
    }
}
