//! `gsvin` command-line driver.

pub mod commands;
pub mod config;
mod error;
pub mod out;

use clap::{Parser, Subcommand};

pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "gsvin",
    version,
    about = "Grid-world planners: data, training, evaluation, sweeps and checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate train/test dataset files.
    Generate(commands::generate::GenerateArgs),
    /// Train one model.
    Train(commands::train::TrainArgs),
    /// Score a checkpoint (or the expert) on a dataset.
    Eval(commands::eval::EvalArgs),
    /// Train and score a grid of variants, kernel sizes and k' values.
    Sweep(commands::sweep::SweepArgs),
    /// Print iteration counts from the map-size heuristic.
    Heuristic(commands::heuristic::HeuristicArgs),
    /// Run the verification suites.
    Selfcheck(commands::selfcheck::SelfcheckArgs),
    /// Gather run records and sweep CSVs into one report directory.
    Export(commands::export::ExportArgs),
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Generate(a) => commands::generate::run(a),
        Command::Train(a) => commands::train::run(a),
        Command::Eval(a) => commands::eval::run(a),
        Command::Sweep(a) => commands::sweep::run(a),
        Command::Heuristic(a) => commands::heuristic::run(a),
        Command::Selfcheck(a) => commands::selfcheck::run(a),
        Command::Export(a) => commands::export::run(a),
    }
}
