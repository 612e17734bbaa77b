use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wavefit::commands::{candidates, optimize, staircase, verify};

/// Wave-granularity GPU latency modeling and layer-width optimization.
#[derive(Parser)]
#[command(name = "wavefit", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep a layer's width and write the latency staircase as CSV.
    Staircase(staircase::StaircaseArgs),
    /// Extract tail-free width candidates per layer.
    Candidates(candidates::CandidatesArgs),
    /// Reconfigure a model's layer widths for latency or accuracy.
    Optimize(optimize::OptimizeArgs),
    /// Recompute a plan's claims against a profile and report PASS/FAIL.
    Verify(verify::VerifyArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Staircase(args) => staircase::run(args),
        Command::Candidates(args) => candidates::run(args),
        Command::Optimize(args) => optimize::run(args),
        Command::Verify(args) => verify::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
