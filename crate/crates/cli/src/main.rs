//! `volspill`: realized semivariances to asymmetric spillover indices.
//!
//! Subcommands `ingest`, `spillovers`, `fevd`, `synth` and `summarize`. Runs
//! are driven by a flat `key = value` config file; flags override it.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

pub const OUTPUT_DIR_ENV: &str = "VOLSPILL_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "volspill", version, about = "Asymmetric volatility spillovers from realized semivariances")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Run configuration file.
    #[arg(long, short = 'c', global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; takes precedence over the environment variable,
    /// which takes precedence over `output_dir` in the config file.
    #[arg(long, short = 'o', global = true, env = OUTPUT_DIR_ENV)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct RollingArgs {
    /// Measure panel CSV (default: `panel` from the config, else
    /// `<output-dir>/panel.csv`).
    #[arg(long)]
    pub panel: Option<PathBuf>,
    /// Rolling window length in days.
    #[arg(long)]
    pub window: Option<usize>,
    /// Forecast horizon H.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Lag order `p`, or `aic:N` to select by AIC up to N.
    #[arg(long)]
    pub lag: Option<String>,
    /// Measure kinds to run (`rv`, `rsm`, `rsp`); repeat or comma-separate.
    #[arg(long = "measure", value_delimiter = ',')]
    pub measures: Vec<String>,
    /// `variance` (default) or `stddev` for the scaling term of the decomposition.
    #[arg(long)]
    pub sigma: Option<String>,
    /// `table` (default) or `eqN` for directional, net and pairwise indices.
    #[arg(long)]
    pub convention: Option<String>,
    /// Fit the VAR to log measures.
    #[arg(long)]
    pub log_transform: bool,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build `panel.csv` and `ingest_report.csv` from raw tick files.
    Ingest {
        #[command(flatten)]
        common: Common,
    },
    /// Rolling spillover and SAM series: `total.csv`, `directional.csv`,
    /// `pairwise.csv`, `diagnostics.csv`.
    Spillovers {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        rolling: RollingArgs,
    },
    /// Print the spillover table for one window end date, or for a
    /// decomposition matrix given with `--matrix`.
    Fevd {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        rolling: RollingArgs,
        /// Window end date.
        #[arg(long, required_unless_present = "matrix")]
        date: Option<NaiveDate>,
        /// CSV of a normalized decomposition matrix: header `asset,<names>`,
        /// then one row per receiving asset.
        #[arg(long, conflicts_with = "date")]
        matrix: Option<PathBuf>,
        /// Matrix entries are percentages rather than shares.
        #[arg(long, requires = "matrix")]
        percent: bool,
    },
    /// Write a simulated measure panel in the panel CSV schema.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        assets: usize,
        #[arg(long, default_value_t = 1000)]
        days: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file (default `<output-dir>/panel.csv`).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Mean and standard deviation of each column of an index CSV, over the
    /// full range and the sub-ranges split at the breakpoints.
    Summarize {
        #[command(flatten)]
        common: Common,
        /// Index CSV with a leading `date` column (default
        /// `<output-dir>/total.csv`).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Dates opening a new sub-range.
        #[arg(long = "breakpoint", value_delimiter = ',')]
        breakpoints: Vec<NaiveDate>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
