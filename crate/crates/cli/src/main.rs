//! `wecan`: fit, simulate and evaluate weighted edge clusterings.

mod commands;
mod files;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{EvalArgs, FitArgs, SimulateArgs};

#[derive(Debug, Parser)]
#[command(name = "wecan", version, about = "Weighted edge clustering with a noise component")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the model to an edge list.
    Fit(FitArgs),
    /// Generate a synthetic network with known clusters.
    Simulate(SimulateArgs),
    /// Compare a fit with a reference labelling.
    Eval(EvalArgs),
}

/// Failure categories, mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or unusable input files (exit 2).
    Usage(String),
    /// Estimation broke down (exit 1).
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on argument errors and 0 for --help
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => commands::fit(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::Eval(args) => commands::eval(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
