//! Command-line front end: trajectories, optimization, constant-price scheme
//! comparison and backtests, written as CSV and JSON.

pub mod commands;
pub mod config;
pub mod output;

use clap::{Parser, Subcommand};

use crate::commands::Failure;
use crate::config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "tfmm", version, about = "Weight-interpolation trajectories for dynamic-weight G3M pools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
    /// Keep optimizer results that missed the gradient tolerance
    #[arg(long, global = true)]
    pub allow_nonconverged: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Per-step weights and deltas for closed-form schemes
    Trajectory,
    /// Numerically optimal trajectory and its deviation from linear and approx
    Optimize,
    /// Block-level backtests over a scheme x fee grid
    Backtest,
    /// Constant-price final pool value of each scheme
    Compare,
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> u8 {
    match execute(cli) {
        Ok(()) => 0,
        Err(failure) => {
            eprintln!("error: {failure}");
            failure.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let cfg = RunConfig::resolve(&cli.overrides).map_err(Failure::Input)?;
    let allow = cli.allow_nonconverged;
    let outputs = match cli.command {
        Command::Trajectory => commands::trajectory(&cfg, allow)?,
        Command::Optimize => commands::optimize_cmd(&cfg, allow)?,
        Command::Backtest => commands::backtest(&cfg)?,
        Command::Compare => commands::compare(&cfg, allow)?,
    };
    outputs.write_all(&cfg.out_dir).map_err(Failure::Other)?;
    log::info!("wrote {} files under {}", outputs.paths().count(), cfg.out_dir.display());
    Ok(())
}
