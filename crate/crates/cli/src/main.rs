use clap::{Parser, Subcommand};
use hmcf_cli::{execute, Command};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hmcf",
    version,
    about = "Level-set curvature flow and stochastic-control experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Sub {
    /// Evolve the level-set PDE and tabulate the zero set.
    Pde(Common),
    /// Simulate path ensembles.
    Simulate(Common),
    /// Estimate value functions at a point list.
    Value(Common),
    /// Compare the PDE solution with the value estimates.
    Compare(Common),
    /// Vary one parameter over a list.
    Sweep(Common),
    /// Hamiltonian, eigenvalue and value-function property checks.
    Check(Common),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let (command, args) = match cli.command {
        Sub::Pde(a) => (Command::Pde, a),
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::Value(a) => (Command::Value, a),
        Sub::Compare(a) => (Command::Compare, a),
        Sub::Sweep(a) => (Command::Sweep, a),
        Sub::Check(a) => (Command::Check, a),
    };
    match execute(command, &args.config, &args.out, args.seed, args.threads) {
        Ok(outcome) => {
            for c in &outcome.checks {
                let status = if c.pass { "pass" } else { "FAIL" };
                println!("{status} {} = {:?} (limit {:?})", c.name, c.value, c.limit);
            }
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
