//! `microgrid`: validate scenarios, run simulations, attack their traces.
//!
//! Exit status: 0 success, 1 internal simulation failure, 2 invalid input
//! (scenario, flags, attack name), 3 deadline violations or ledger
//! invariant failures, 4 missing or unreadable files.

mod attack;
mod error;
mod run;
mod scenario_file;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::attack::{attack_command, print_rows, Param};
use crate::error::CliError;
use crate::run::{report_command, run_command, summary, violation_line};
use crate::scenario_file::{load, Override};

const EXIT_VIOLATION: u8 = 3;

#[derive(Parser)]
#[command(name = "microgrid", version, about = "Anonymous energy trading simulator and attack harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and list every problem with its line.
    Validate {
        scenario: PathBuf,
        /// Override a field by dotted path, e.g. latency.base_ms=30.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<Override>,
    },
    /// Simulate a scenario and write trace, ledger, metrics and summary.
    Run {
        scenario: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<Override>,
        /// Shorthand for --set seed=N.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long, env = "MICROGRID_OUT_DIR", default_value = "out")]
        out: PathBuf,
    },
    /// Run an attack (timing, chain or zkp) over a finished run.
    Attack {
        run_dir: PathBuf,
        attack: String,
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<Param>,
    },
    /// Recompute the summary of a finished run from its trace and ledger.
    Report {
        run_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn execute(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Validate { scenario, overrides } => {
            let loaded = load(&scenario, &overrides)?;
            println!("{}: ok (config_hash {})", scenario.display(), loaded.config_hash);
            Ok(0)
        }
        Command::Run { scenario, mut overrides, seed, out } => {
            if let Some(seed) = seed {
                overrides.push(Override { path: "seed".into(), value: seed.into() });
            }
            let loaded = load(&scenario, &overrides)?;
            let report = run_command(&loaded, &out)?;
            println!("wrote {} (config_hash {})", out.display(), report.config_hash);
            for v in &report.metrics.clearing.violations {
                eprintln!("deadline violation: {}", violation_line(v, report.scenario.clearing_deadline));
            }
            if let Some(e) = &report.invariant_failure {
                eprintln!("invariant failure: {e}");
            }
            Ok(if report.passed() { 0 } else { EXIT_VIOLATION })
        }
        Command::Attack { run_dir, attack, params } => {
            let rows = attack_command(&run_dir, &attack, &params)?;
            print!("{}", print_rows(&rows));
            Ok(0)
        }
        Command::Report { run_dir } => {
            let outcome = report_command(&run_dir)?;
            print!("{}", summary(&outcome));
            Ok(if outcome.passed() { 0 } else { EXIT_VIOLATION })
        }
    }
}
