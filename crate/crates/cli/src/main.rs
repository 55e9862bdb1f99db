//! `swimmer`: added-mass reports, simulation, rank certificates and tracking
//! plans for scenario files.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid scenario, 3 solver or
//! integration failure, 4 not controllable, 5 tolerance not met.

mod commands;
mod output;
mod scenario;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "swimmer", version, about = "Deformable swimmer in an ideal fluid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Added-mass matrix of the rest shape, with the ellipsoid oracle when available.
    Addedmass(Common),
    /// Integrates the scenario controls and writes trajectory.csv and summary.json.
    Simulate(Common),
    /// Lie-algebra rank certificate at the rest state.
    Rank(Common),
    /// Plans controls tracking the target waypoints; writes schedule.csv and plan.json.
    Plan(Common),
}

#[derive(Args, Clone)]
pub struct Common {
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    refinement: Option<usize>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    verbose: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, run): (&Common, fn(&commands::Context) -> Result<(), commands::Failure>) = match &cli.command {
        Command::Addedmass(c) => (c, commands::addedmass),
        Command::Simulate(c) => (c, commands::simulate),
        Command::Rank(c) => (c, commands::rank),
        Command::Plan(c) => (c, commands::plan),
    };
    let overrides = scenario::Overrides { refinement: common.refinement, step: common.step, seed: common.seed };
    let result = scenario::load(&common.scenario, overrides)
        .map_err(commands::Failure::Scenario)
        .and_then(|sc| {
            std::fs::create_dir_all(&common.out).map_err(|e| commands::Failure::Io(format!("{}: {e}", common.out.display())))?;
            run(&commands::Context { scenario: sc, out: common.out.clone(), verbose: common.verbose })
        });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
