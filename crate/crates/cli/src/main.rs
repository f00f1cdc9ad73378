//! Experiment CLI. Every subcommand reads the same TOML configuration,
//! writes CSV files and a `<command>.manifest.json` into `output_dir`.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::CliConfig;

#[derive(Parser)]
#[command(name = "condist", version, about = "Conditional distribution estimation experiments")]
struct Cli {
    /// TOML configuration file; every key is optional.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set train.epochs=200`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Output directory, overriding `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a dataset from the kernel.
    Gen,
    /// Raw estimate at one query point.
    Estimate,
    /// Integrated error per sample size and seed, with a log-log slope fit.
    Rates,
    /// Sample variance of the integrated error against its bound.
    Variance,
    /// Pointwise error along a grid for several estimators.
    ErrorVsX,
    /// Model 3 projected errors and their histogram.
    ProjectHist,
    /// Partition search against exact search.
    AnnBench,
    /// Train a network and write a checkpoint and loss trace.
    Train,
    /// Error profile, atoms, derivatives and the worst-case bound of a checkpoint.
    Eval,
    /// Print the resolved configuration.
    ShowConfig,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = CliConfig::load(cli.config.as_deref(), &cli.overrides, cli.out.as_deref())?;
    match cli.command {
        Command::Gen => commands::gen(&cfg),
        Command::Estimate => commands::estimate(&cfg),
        Command::Rates => commands::rates(&cfg),
        Command::Variance => commands::variance(&cfg),
        Command::ErrorVsX => commands::error_vs_x_cmd(&cfg),
        Command::ProjectHist => commands::project_hist(&cfg),
        Command::AnnBench => commands::ann_bench(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Eval => commands::eval(&cfg),
        Command::ShowConfig => commands::show_config(&cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
