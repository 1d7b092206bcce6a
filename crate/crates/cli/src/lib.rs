//! Command-line surface of the PI-Net experiments: configuration,
//! dataset and checkpoint files, and one function per verb.

// `!(a > b)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod io;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::{Invocation, Source};
use config::{ExperimentConfig, Profile};
use error::{CliResult, EXIT_OK};

#[derive(Debug, Parser)]
#[command(name = "pinet", version, about = "Path-integral network experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON experiment configuration; omitted fields take profile defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Experiment directory [default: runs/<experiment_id>].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    pub force: bool,
    #[arg(long, global = true, value_enum)]
    pub profile: Option<Profile>,
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Generate expert demonstrations and a manifest.
    GenData,
    /// Pre-train (pendulum) and train the network by imitation.
    Train {
        /// Dataset directory [default: the experiment directory].
        #[arg(long)]
        data: Option<PathBuf>,
        /// Continue from a last.json checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Dataset MSEs and closed-loop success and cost.
    Eval {
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        source: SourceArgs,
    },
    /// One closed-loop run written as a trajectory CSV.
    Simulate {
        /// Dataset whose teacher to simulate (linear).
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        source: SourceArgs,
    },
    /// Finite-difference check of the reverse pass.
    Gradcheck,
    /// Running cost over a (theta, theta_dot) grid.
    ExportCostmap {
        #[command(flatten)]
        source: SourceArgs,
    },
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    /// Network checkpoint to use.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Use the expert (teacher) instead of a checkpoint.
    #[arg(long)]
    pub expert: bool,
}

impl SourceArgs {
    fn resolve(&self) -> CliResult<Source> {
        Source::from_flags(self.checkpoint.clone(), self.expert)
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let c = &cli.common;
    let cfg = ExperimentConfig::resolve(c.config.as_deref(), c.seed, c.profile)?;
    let out = c.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(&cfg.experiment_id));
    let inv = Invocation { cfg, out, force: c.force };
    let data_or_out = |d: &Option<PathBuf>| d.clone().unwrap_or_else(|| inv.out.clone());
    match &cli.verb {
        Verb::GenData => commands::gen_data(&inv).map(drop),
        Verb::Train { data, resume } => commands::train(&inv, &data_or_out(data), resume.as_ref()).map(drop),
        Verb::Eval { data, source } => commands::eval(&inv, &data_or_out(data), &source.resolve()?).map(drop),
        Verb::Simulate { data, source } => commands::simulate(&inv, &source.resolve()?, data.as_deref()).map(drop),
        Verb::Gradcheck => commands::gradcheck(&inv).map(drop),
        Verb::ExportCostmap { source } => commands::export_costmap(&inv, &source.resolve()?).map(drop),
    }
}

/// Runs the parsed command line and returns the process exit status.
pub fn main_with(cli: Cli) -> u8 {
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
