use std::path::{Path, PathBuf};

use log::info;
use pppks::experiments::{run_null_calibration, RejectionRate, StatisticSummary};
use pppks::ppp::PppConfig;
use pppks::rng::{mix, stream};
use pppks::selftest::{run_selftest, SelftestOptions};
use pppks::{
    estimate_ppp, rejection_rate, run_power, Dataset, DataModel, EstimatorKind, ExperimentConfig,
    ExperimentResult, Scenario, Sidedness, StatisticKind,
};
use serde::Serialize;

use crate::config::{self, CalibrationConfig, PowerConfig, PppCommandConfig};
use crate::error::{CliError, CliResult};
use crate::output::{histogram_svg, sha256_hex, OutputDir};

/// Flags shared by every data-producing subcommand.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub plots: bool,
}

fn resolve_workers(configured: usize, flag: Option<usize>) -> CliResult<usize> {
    match flag.unwrap_or(configured) {
        0 => Err(CliError::Config("workers must be >= 1".into())),
        w => Ok(w),
    }
}

fn thread_pool(workers: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Numerical(format!("thread pool: {e}")))
}

/// One observation per line; blank lines and lines starting with `#` are skipped.
pub fn read_data(path: &Path) -> CliResult<(Dataset, Vec<u8>)> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| CliError::Data(format!("{} is not UTF-8 text", path.display())))?;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| {
            CliError::Data(format!("{} line {}: {line:?} is not a number", path.display(), lineno + 1))
        })?;
        values.push(v);
    }
    let data = Dataset::new(values).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok((data, bytes))
}

#[derive(Serialize)]
struct PppRecord {
    statistic: StatisticKind,
    estimator: EstimatorKind,
    n: usize,
    data_sha256: String,
    p_value: f64,
    two_sided_p: Option<f64>,
    t_obs: f64,
    m_draws: usize,
}

pub fn cmd_ppp(opts: &RunOptions, data_path: &Path) -> CliResult<()> {
    let mut cfg: PppCommandConfig = config::load(&opts.config)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    cfg.parallelism = resolve_workers(cfg.parallelism, opts.workers)?;
    cfg.validate()?;
    let (data, raw) = read_data(data_path)?;
    if let Some(x) = &cfg.covariates {
        if x.len() != data.n() {
            return Err(CliError::Config(format!(
                "covariates: {} values for {} observations",
                x.len(),
                data.n()
            )));
        }
    }

    let mut out = OutputDir::create(&opts.out)?;
    out.write_resolved_config(&cfg)?;
    info!("ppp: n = {}, statistic {}, estimator {}", data.n(), cfg.statistic.label(), cfg.estimator.label());

    let ppp_cfg = PppConfig {
        estimator: cfg.estimator,
        statistic: cfg.statistic,
        mcmc: cfg.mcmc,
        predictive_refit_mcmc: cfg.predictive_refit_mcmc,
        m_draws: cfg.m_draws,
    };
    let pool = thread_pool(cfg.parallelism)?;
    let result = pool.install(|| {
        estimate_ppp(&data, &cfg.prior, &ppp_cfg, cfg.covariates.as_deref(), &mut stream(cfg.seed))
    })?;
    info!("ppp = {} (t_obs = {})", result.p_value, result.t_obs);

    out.write_json(
        "ppp_result.json",
        &PppRecord {
            statistic: cfg.statistic,
            estimator: cfg.estimator,
            n: data.n(),
            data_sha256: sha256_hex(&raw),
            p_value: result.p_value,
            two_sided_p: result.two_sided_p,
            t_obs: result.t_obs,
            m_draws: result.m_draws,
        },
    )?;
    let mut w = out.csv_writer("replicates.csv")?;
    w.write_record(["replicate", "t_rep"])?;
    for (k, t) in result.t_replicates.iter().enumerate() {
        w.write_record([k.to_string(), t.to_string()])?;
    }
    w.flush()?;
    out.finish("ppp")
}

#[derive(Serialize)]
struct CalibrationCell {
    prior: String,
    estimator: EstimatorKind,
    n: usize,
    file: String,
    master_seed: u64,
    #[serde(flatten)]
    summary: StatisticSummary,
}

pub fn cmd_calibration(opts: &RunOptions) -> CliResult<()> {
    let mut cfg: CalibrationConfig = config::load(&opts.config)?;
    if let Some(seed) = opts.seed {
        cfg.master_seed = seed;
    }
    cfg.parallelism = resolve_workers(cfg.parallelism, opts.workers)?;
    cfg.validate()?;

    let mut out = OutputDir::create(&opts.out)?;
    out.write_resolved_config(&cfg)?;

    let mut cells = Vec::new();
    let mut index = 0u64;
    for named in &cfg.priors {
        for &estimator in &cfg.estimators {
            for &n in &cfg.sample_sizes {
                let exp = ExperimentConfig {
                    scenario: Scenario::NullCalibration,
                    n,
                    replications: cfg.replications,
                    prior: named.prior,
                    estimator,
                    statistics: vec![cfg.statistic],
                    data_model: cfg.data_model.clone(),
                    covariates: cfg.covariates,
                    mcmc: cfg.mcmc,
                    predictive_refit_mcmc: cfg.predictive_refit_mcmc,
                    m_draws: cfg.m_draws,
                    master_seed: mix(cfg.master_seed, index),
                    parallelism: cfg.parallelism,
                };
                index += 1;
                let stem = format!("calibration_{}_{}_n{n}", named.name, estimator.label());
                info!("{stem}: {} replications", cfg.replications);
                let result = run_null_calibration(&exp)?;
                let file = format!("{stem}.csv");
                out.write_rows(&file, &result.rows)?;
                let summary = result
                    .summary_for(cfg.statistic)
                    .cloned()
                    .ok_or_else(|| CliError::Numerical(format!("{stem}: no summary")))?;
                info!("{stem}: uniformity distance {:.4}, {} excluded", summary.uniformity_ks_distance, summary.excluded);
                if opts.plots {
                    let title = format!("prior {}, {}, n = {n}", named.name, estimator.label());
                    out.write_bytes(&format!("{stem}.svg"), histogram_svg(&title, &result.p_values(cfg.statistic)).as_bytes())?;
                }
                cells.push(CalibrationCell {
                    prior: named.name.clone(),
                    estimator,
                    n,
                    file,
                    master_seed: exp.master_seed,
                    summary,
                });
            }
        }
    }
    out.write_json("summary.json", &serde_json::json!({ "cells": cells }))?;
    out.finish("calibration")
}

#[derive(Serialize)]
struct PowerCell {
    data_model: DataModel,
    statistic: StatisticKind,
    file: String,
    master_seed: u64,
    rejection_at_levels: Vec<RejectionRate>,
    #[serde(flatten)]
    summary: StatisticSummary,
}

pub fn cmd_power(opts: &RunOptions) -> CliResult<()> {
    let mut cfg: PowerConfig = config::load(&opts.config)?;
    if let Some(seed) = opts.seed {
        cfg.master_seed = seed;
    }
    cfg.parallelism = resolve_workers(cfg.parallelism, opts.workers)?;
    cfg.validate()?;

    let mut out = OutputDir::create(&opts.out)?;
    out.write_resolved_config(&cfg)?;

    let mut cells = Vec::new();
    for (index, model) in cfg.data_models.iter().enumerate() {
        let exp = ExperimentConfig {
            scenario: Scenario::Power,
            n: cfg.n,
            replications: cfg.replications,
            prior: cfg.prior,
            estimator: cfg.estimator,
            statistics: cfg.statistics.clone(),
            data_model: model.clone(),
            covariates: cfg.covariates,
            mcmc: cfg.mcmc,
            predictive_refit_mcmc: cfg.predictive_refit_mcmc,
            m_draws: cfg.m_draws,
            master_seed: mix(cfg.master_seed, index as u64),
            parallelism: cfg.parallelism,
        };
        info!("power: {} data, {} replications", model.label(), cfg.replications);
        let result = run_power(&exp)?;
        cells.extend(power_cells(&cfg, model, &exp, &result, &mut out, opts.plots)?);
    }

    let mut w = out.csv_writer("rejection_rates.csv")?;
    let mut header = vec!["data_model".to_string(), "statistic".into(), "sidedness".into(), "completed".into(), "excluded".into()];
    header.extend(cfg.levels.iter().map(|l| format!("level_{l}")));
    w.write_record(&header)?;
    for c in &cells {
        let mut record = vec![
            c.data_model.label().to_string(),
            c.statistic.label().to_string(),
            match c.summary.sidedness {
                Sidedness::OneSided => "one_sided".to_string(),
                Sidedness::TwoSided => "two_sided".to_string(),
            },
            c.summary.completed.to_string(),
            c.summary.excluded.to_string(),
        ];
        record.extend(c.rejection_at_levels.iter().map(|r| r.rate.to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    out.write_json("power_summary.json", &serde_json::json!({ "cells": cells }))?;
    out.finish("power")
}

fn power_cells(
    cfg: &PowerConfig,
    model: &DataModel,
    exp: &ExperimentConfig,
    result: &ExperimentResult,
    out: &mut OutputDir,
    plots: bool,
) -> CliResult<Vec<PowerCell>> {
    let mut cells = Vec::new();
    for &statistic in &cfg.statistics {
        let stem = format!("power_{}_{}", model.label(), statistic.label());
        let file = format!("{stem}.csv");
        out.write_rows(&file, result.rows.iter().filter(|r| r.statistic == statistic))?;
        let p = result.p_values(statistic);
        let rejection = if p.is_empty() {
            cfg.levels.iter().map(|&level| RejectionRate { level, rate: f64::NAN }).collect()
        } else {
            cfg.levels
                .iter()
                .map(|&level| {
                    Ok(RejectionRate {
                        level,
                        rate: rejection_rate(&p, level, statistic.sidedness())?,
                    })
                })
                .collect::<CliResult<Vec<_>>>()?
        };
        if plots {
            let title = format!("{} data, {}", model.label(), statistic.label());
            out.write_bytes(&format!("{stem}.svg"), histogram_svg(&title, &p).as_bytes())?;
        }
        let summary = result
            .summary_for(statistic)
            .cloned()
            .ok_or_else(|| CliError::Numerical(format!("{stem}: no summary")))?;
        cells.push(PowerCell {
            data_model: model.clone(),
            statistic,
            file,
            master_seed: exp.master_seed,
            rejection_at_levels: rejection,
            summary,
        });
    }
    Ok(cells)
}

pub fn cmd_selftest(corrupt_tolerance: bool) -> CliResult<()> {
    let opts = SelftestOptions {
        tolerance_scale: if corrupt_tolerance { 0.0 } else { 1.0 },
    };
    let reports = run_selftest(&opts);
    let mut all = true;
    for r in &reports {
        let verdict = if r.passed() { "PASS" } else { "FAIL" };
        all &= r.passed();
        match r.worst() {
            Some(w) => println!(
                "{verdict} {} ({} checks; worst {}: {:.3e} vs tolerance {:.1e})",
                r.group,
                r.checks.len(),
                w.name,
                w.error,
                w.tolerance
            ),
            None => println!("{verdict} {} (no checks)", r.group),
        }
    }
    if all {
        Ok(())
    } else {
        Err(CliError::SelftestFailed)
    }
}
