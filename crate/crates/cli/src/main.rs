//! `privcusum`: privatize streams, run detectors over CSV files, and drive
//! Monte Carlo experiments from a TOML configuration.

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "privcusum", version, about = "Private online change-point detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a configuration and print it in normalised form.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write the configured scenario as a raw CSV stream.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Defaults to master_seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Privatize a raw CSV stream.
    Privatize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Defaults to master_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Skip the Laplace noise (for checking encodings).
        #[arg(long)]
        zero_noise: bool,
    },
    /// Run the configured detector over a CSV stream.
    Detect {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Per-step trace: t, max statistic, min threshold.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Replicate the scenario at every sweep point and summarise.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Overrides output.dir.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Estimate the signal-to-noise and delay constants from a sweep.
    CalibrateConstants {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0.95)]
        target_rate: f64,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Randomised privacy-loss check of the configured channel.
    Audit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> CliResult<String> {
    let load = |p: &PathBuf| ExperimentConfig::from_path(p);
    match cli.command {
        Command::Validate { config } => commands::validate(&load(&config)?),
        Command::Generate { config, output, seed } => {
            commands::generate(&load(&config)?, &output, seed)?;
            Ok(String::new())
        }
        Command::Privatize { config, input, output, seed, zero_noise } => {
            commands::privatize(&load(&config)?, &input, &output, seed, zero_noise)?;
            Ok(String::new())
        }
        Command::Detect { config, input, trace } => commands::detect(&load(&config)?, &input, trace.as_deref()),
        Command::Experiment { config, output_dir } => commands::experiment(&load(&config)?, output_dir.as_deref()),
        Command::CalibrateConstants { config, target_rate, output_dir } => {
            commands::calibrate(&load(&config)?, target_rate, output_dir.as_deref())
        }
        Command::Audit { config, trials, seed } => commands::audit(&load(&config)?, trials, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
