//! `echotomo`: simulate billiard rays, sample travelling-time spectra and
//! reconstruct two convex obstacles from them.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Overrides;

#[derive(Parser)]
#[command(name = "echotomo", version, about)]
struct Cli {
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trace a fan of rays from one entry point; writes trajectories.csv and rays.svg.
    Simulate(Overrides),
    /// Diagonal and direction-sweep spectra plus the hull and vacuous-line report.
    Spectrum(Overrides),
    /// Echograph of the stored diagonal spectrum; writes echograph.csv and echograph.svg.
    Echograph(Overrides),
    /// Boundary reconstruction from the stored spectrum; writes boundary.csv.
    Reconstruct(Overrides),
    /// Oracle checks of the scene and of the stored outputs; writes verify.json.
    Verify(Overrides),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let (name, overrides) = match &cli.command {
        Command::Simulate(o) => ("simulate", o),
        Command::Spectrum(o) => ("spectrum", o),
        Command::Echograph(o) => ("echograph", o),
        Command::Reconstruct(o) => ("reconstruct", o),
        Command::Verify(o) => ("verify", o),
    };
    let cfg = match overrides.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: invalid configuration: {e:#}");
            return ExitCode::from(1);
        }
    };
    let result = match name {
        "simulate" => commands::simulate(&cfg),
        "spectrum" => commands::spectrum(&cfg),
        "echograph" => commands::echograph_cmd(&cfg),
        "reconstruct" => commands::reconstruct(&cfg),
        _ => commands::verify(&cfg),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
