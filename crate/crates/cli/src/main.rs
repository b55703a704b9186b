//! `grainpdmp`: simulate, solve, fit and compare grain-coarsening models.

/// `println!` that reports a closed stdout as an error instead of panicking.
macro_rules! emit {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        writeln!(std::io::stdout().lock(), $($arg)*)?;
    }};
}

mod common;
mod compare;
mod fit;
mod simulate;
mod solve;
mod topology;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "grainpdmp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the event-driven particle system.
    Simulate(simulate::SimulateArgs),
    /// Write a synthetic grain track with known edge-deletion parameters.
    GenData(simulate::GenDataArgs),
    /// Integrate the kinetic equations.
    Solve(solve::SolveArgs),
    /// Estimate coarsening and edge-deletion rates from a grain track.
    Fit(fit::FitArgs),
    /// Build a correlated weight table from measured distributions.
    GenWeights(fit::GenWeightsArgs),
    /// Compare two grain tracks.
    Compare(compare::CompareArgs),
    /// Attachment trees, coarsening rules and average side counts.
    Topology(topology::TopologyArgs),
    /// Check a preset's mutation rules.
    ValidatePreset(topology::ValidateArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate::simulate(a),
        Command::GenData(a) => simulate::gen_data(a),
        Command::Solve(a) => solve::solve(a),
        Command::Fit(a) => fit::fit(a),
        Command::GenWeights(a) => fit::gen_weights(a),
        Command::Compare(a) => compare::compare(a),
        Command::Topology(a) => topology::topology(a),
        Command::ValidatePreset(a) => topology::validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        // a closed pipe (`grainpdmp topology | head`) is not a failure
        Err(err)
            if err
                .downcast_ref::<std::io::Error>()
                .is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe) =>
        {
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(common::exit_code(&err))
        }
    }
}
