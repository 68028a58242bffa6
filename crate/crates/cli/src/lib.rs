//! Command-line front end: simulate, evaluate theory curves, estimate,
//! run Monte Carlo sweeps and ingest market data.
//!
//! Every command writes CSV or JSON plus a manifest with the full argument
//! set, the seed and the list of files written.

pub mod commands;
pub mod error;
pub mod manifest;

use clap::{Parser, Subcommand};
use commands::{estimate, ingest, montecarlo, simulate, theory};
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "lsfbm", version, about = "Log S-fBM volatility: simulation and estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one path of the measure (and optionally prices)
    Simulate(simulate::SimulateArgs),
    /// Evaluate a model curve on a grid
    Theory(theory::TheoryArgs),
    /// Estimate H and lambda^2 from a series file
    Estimate(estimate::EstimateArgs),
    /// Monte Carlo sweep over a parameter grid
    Montecarlo(montecarlo::MonteCarloArgs),
    /// Build a daily variance series from market data
    Ingest(ingest::IngestArgs),
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Theory(a) => theory::run(a),
        Command::Estimate(a) => estimate::run(a),
        Command::Montecarlo(a) => montecarlo::run(a),
        Command::Ingest(a) => ingest::run(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
