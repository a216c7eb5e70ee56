//! `mnselect`: cluster-count selection for multinomial count matrices and
//! the simulation studies around it.
//!
//! Exit codes: 0 success, 2 input error, 3 numeric failure.

mod commands;
mod config;

use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{GenArgs, GraphArgs, Table2Args, TheoremArgs, SweepArgs};

#[derive(Debug, Parser)]
#[command(name = "mnselect", version, about = "Choose the number of clusters for multinomial count data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit K = kmin..kmax to a count matrix and report the criterion per K.
    Sweep(SweepArgs),
    /// Monte Carlo comparison with AIC on the sparse two-cluster design.
    #[command(name = "mc-table2")]
    McTable2(Table2Args),
    /// Mean adjusted Rand index of this method and two baselines on graphs.
    #[command(name = "graph-experiment")]
    GraphExperiment(GraphArgs),
    /// Empirical checks of the bias constant and of smoothing consistency.
    #[command(name = "theorem-check")]
    TheoremCheck(TheoremArgs),
    /// Write a generated data set as a count-matrix CSV.
    Gen(GenArgs),
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl From<mnselect::Error> for CliError {
    fn from(e: mnselect::Error) -> Self {
        use mnselect::Error as E;
        match e {
            E::NotStochastic { .. }
            | E::InvalidProbability { .. }
            | E::EmptyCluster(_)
            | E::KTooSmall(_)
            | E::InvalidSplit(_)
            | E::LabelOutOfRange { .. }
            | E::NonFinite(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sweep(a) => commands::sweep(a),
        Command::McTable2(a) => commands::mc_table2(a),
        Command::GraphExperiment(a) => commands::graph_experiment(a),
        Command::TheoremCheck(a) => commands::theorem_check(a),
        Command::Gen(a) => commands::gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mnselect: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
