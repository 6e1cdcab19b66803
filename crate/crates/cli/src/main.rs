//! `rcovkit`: forecast daily realized covariance matrices with a matrix
//! factor model and Wishart-autoregressive factor dynamics.
//!
//! The pipeline runs as subcommands over on-disk artifacts:
//!
//! ```text
//! ticks --clean--> panels --rcov--> matrix series --factor--> factor series
//!     factor series --fit-caw / fit-var--> fits --forecast--> forecasts
//!     matrix series --evaluate--> rolling error tables
//!     scenario --simulate--> matrix series or ticks
//! ```

mod commands;
mod config;
mod formats;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "rcovkit", version, about = "Realized covariance forecasting pipeline")]
struct Cli {
    /// TOML configuration file; omitted fields take documented defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Top-level seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (overrides the config; 0 keeps the default).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output root directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, clean and resample tick files into daily return panels.
    Clean(commands::clean::Args),
    /// Build daily realized covariance matrices from return panels.
    Rcov(commands::rcov::Args),
    /// Fit the matrix factor model and extract the factor series.
    Factor(commands::factor::Args),
    /// Fit the diagonal CAW model to the factor series.
    FitCaw(commands::fit_caw::Args),
    /// Fit the benchmark VAR model to the vech of the factor series.
    FitVar(commands::fit_var::Args),
    /// Forecast with a fitted model and map back to asset space.
    Forecast(commands::forecast::Args),
    /// Rolling out-of-sample comparison of the configured models.
    Evaluate(commands::evaluate::Args),
    /// Generate synthetic panels or ticks from a scenario file.
    Simulate(commands::simulate::Args),
}

/// Everything a command needs: merged config plus the effective seed and
/// thread count.
pub struct Context {
    pub config: RunConfig,
    pub seed: u64,
    pub threads: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let line = serde_json::json!({ "error": format!("{err:#}") });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    if let Some(out) = cli.out {
        config.paths.out_dir = out;
    }
    let seed = cli.seed.or(config.seed).unwrap_or(0);
    let threads = cli.threads.or(config.threads).unwrap_or(0);
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .ok();
    }
    let ctx = Context { config, seed, threads };
    match cli.command {
        Command::Clean(args) => commands::clean::run(&ctx, args),
        Command::Rcov(args) => commands::rcov::run(&ctx, args),
        Command::Factor(args) => commands::factor::run(&ctx, args),
        Command::FitCaw(args) => commands::fit_caw::run(&ctx, args),
        Command::FitVar(args) => commands::fit_var::run(&ctx, args),
        Command::Forecast(args) => commands::forecast::run(&ctx, args),
        Command::Evaluate(args) => commands::evaluate::run(&ctx, args),
        Command::Simulate(args) => commands::simulate::run(&ctx, args),
    }
}
