//! Command-line front end for the `powergame` solvers.
//!
//! A run reads one JSON configuration (the bundled `configs/paper.json`
//! when `--config` is omitted), executes one subcommand, writes its JSON and
//! CSV artifacts and prints a summary with three significant digits.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{Context, RepeatedArgs, Sweep, Verbosity};
use config::{load_config, paper_config, Scenario};
pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "powergame",
    version,
    about = "Power control games on a two-link interference channel"
)]
pub struct Cli {
    /// JSON run configuration; defaults to the bundled reference network.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Print the JSON artifact instead of the summary.
    #[arg(long, global = true, conflicts_with = "quiet")]
    pub json: bool,
    /// Print nothing on success.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Payoff matrix, iterated dominance and pure equilibria of an on/off game.
    Finite {
        #[arg(long, value_enum)]
        scenario: Option<Scenario>,
        /// Check the uniform mixture over the pure equilibria for correlated
        /// equilibrium (always done for `ic`).
        #[arg(long)]
        ce_uniform: bool,
    },
    /// Nash equilibrium of the energy-efficiency game.
    Ne,
    /// Equilibrium under a linear power price.
    Pricing {
        /// Price in units of t/σ⁴; overrides `pricing.alpha`.
        #[arg(long)]
        alpha: Option<f64>,
        /// Solve for each α in `lo:hi:steps` instead.
        #[arg(long, conflicts_with = "alpha")]
        sweep: Option<Sweep>,
    },
    /// Utility grid and its Pareto frontier.
    Pareto,
    /// Weighted social optimum.
    Social,
    /// Nash bargaining solution with the NE as disagreement point.
    Nbs,
    /// Grim-trigger cooperation on the social optimum.
    Repeated {
        /// Discount factor to evaluate; defaults to the minimum sustaining one.
        #[arg(long)]
        delta: Option<f64>,
        /// Stages in the exported trace.
        #[arg(long, default_value_t = 50)]
        stages: usize,
        /// Player (1 or 2) deviating in the exported trace.
        #[arg(long, value_parser = clap::value_parser!(u16).range(1..=2))]
        deviant: Option<u16>,
        /// Stage of that deviation.
        #[arg(long, default_value_t = 0)]
        deviate_at: usize,
    },
}

/// Runs one parsed invocation.
pub fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => load_config(path)?,
        None => paper_config(),
    };
    let verbosity = if cli.quiet {
        Verbosity::Quiet
    } else if cli.json {
        Verbosity::Json
    } else {
        Verbosity::Text
    };
    let ctx = Context {
        out_dir: cli.out.clone().unwrap_or_else(|| config.output.dir.clone()),
        config,
        verbosity,
    };
    match cli.command {
        Command::Finite { scenario, ce_uniform } => commands::finite(&ctx, scenario, ce_uniform).map(drop),
        Command::Ne => commands::ne(&ctx).map(drop),
        Command::Pricing { alpha, sweep } => commands::pricing(&ctx, alpha, sweep).map(drop),
        Command::Pareto => commands::pareto(&ctx).map(drop),
        Command::Social => commands::social(&ctx).map(drop),
        Command::Nbs => commands::nbs(&ctx).map(drop),
        Command::Repeated {
            delta,
            stages,
            deviant,
            deviate_at,
        } => {
            let args = RepeatedArgs {
                delta,
                stages,
                deviant: deviant.map(|k| usize::from(k) - 1),
                deviate_at,
            };
            commands::repeated(&ctx, &args).map(drop)
        }
    }
}
