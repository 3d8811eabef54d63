//! `pppks`: batch front end for posterior predictive p-value studies.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::RunOptions;

#[derive(Parser)]
#[command(name = "pppks", version, about = "Posterior predictive p-values for gamma goodness-of-fit checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed stored in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this value.
    #[arg(long, env = "PPPKS_WORKERS")]
    workers: Option<usize>,
    /// Skip SVG histograms.
    #[arg(long)]
    no_plots: bool,
}

impl RunArgs {
    fn options(&self) -> RunOptions {
        RunOptions {
            config: self.config.clone(),
            out: self.out.clone(),
            seed: self.seed,
            workers: self.workers,
            plots: !self.no_plots,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// ppp for a single dataset.
    Ppp {
        #[command(flatten)]
        run: RunArgs,
        /// Observations, one per line.
        #[arg(long)]
        data: PathBuf,
    },
    /// Null-calibration grid (priors x estimators x sample sizes).
    Calibration(RunArgs),
    /// Power study over data models and statistics.
    Power(RunArgs),
    /// Compare production routines with the built-in reference oracles.
    Selftest {
        #[arg(long, hide = true)]
        corrupt_tolerance: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Ppp { run, data } => commands::cmd_ppp(&run.options(), data),
        Command::Calibration(run) => commands::cmd_calibration(&run.options()),
        Command::Power(run) => commands::cmd_power(&run.options()),
        Command::Selftest { corrupt_tolerance } => commands::cmd_selftest(*corrupt_tolerance),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
