use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod args;
mod cdr;
mod generate;
mod io;
mod project;
mod solve;
mod sweep;

use io::ValidationFailed;

/// Estimate how many cars ride-sharing could take off the road.
#[derive(Debug, Parser)]
#[command(name = "rideshare", version, about)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic commuter population.
    Generate(generate::GenerateArgs),
    /// Generate a preferential-attachment social graph over commuters.
    Graph(generate::GraphArgs),
    /// Synthesize call records for a population.
    SynthCdr(cdr::SynthArgs),
    /// Train home/work classifier weights on labelled call records.
    Train(cdr::TrainArgs),
    /// Infer homes, workplaces and departure times from call records.
    Infer(cdr::InferArgs),
    /// Match commuters into shared cars and report the savings.
    Solve(solve::SolveArgs),
    /// Check an assignment file against a population and constraints.
    Validate(solve::ValidateArgs),
    /// Success table over a grid of distance and wait tolerances.
    Sweep(sweep::SweepArgs),
    /// Fit the savings curve of subsamples and project to a larger population.
    Project(project::ProjectArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match cli.command {
        Command::Generate(a) => generate::run(&a),
        Command::Graph(a) => generate::run_graph(&a),
        Command::SynthCdr(a) => cdr::run_synth(&a),
        Command::Train(a) => cdr::run_train(&a),
        Command::Infer(a) => cdr::run_infer(&a),
        Command::Solve(a) => solve::run(&a),
        Command::Validate(a) => solve::run_validate(&a),
        Command::Sweep(a) => sweep::run(&a),
        Command::Project(a) => project::run(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<ValidationFailed>() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
