use clap::{Parser, Subcommand};

use positivep_cli::config::{ConfigArgs, Mode, RunConfig};

/// Phase-space simulator for the dissipative long-range transverse-field
/// Ising chain: positive-P stochastic ensembles with discrete projection,
/// a dense Lindblad reference solver, and kernel validation suites.
///
/// Thread count follows RAYON_NUM_THREADS; results are independent of it.
#[derive(Parser)]
#[command(name = "positivep", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the kernel-axiom, generator and projection invariant suites.
    Validate(ConfigArgs),
    /// Integrate the Lindblad equation exactly (n <= 8).
    Exact(ConfigArgs),
    /// Run the stochastic ensemble.
    Simulate(ConfigArgs),
    /// Run both and report per-time z-scores.
    Compare(ConfigArgs),
}

fn main() {
    let cli = Cli::parse();
    let (mode, args) = match cli.command {
        Command::Validate(args) => (Mode::Validate, args),
        Command::Exact(args) => (Mode::Exact, args),
        Command::Simulate(args) => (Mode::Simulate, args),
        Command::Compare(args) => (Mode::Compare, args),
    };
    let config = match RunConfig::resolve(mode, args) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    };
    match positivep_cli::run(mode, &config) {
        Ok(summary) => {
            eprintln!("{}", summary.message);
            std::process::exit(summary.exit_code);
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
}
