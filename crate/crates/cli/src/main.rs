use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use treesir_cli::run::{self, Overrides};

#[derive(Parser)]
#[command(
    name = "treesir",
    version,
    about = "SIR epidemics on homogeneous trees and their continuum limit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write `<name>.csv` and `<name>.json`.
    Run {
        scenario: PathBuf,
        /// Override the simulation seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for simulation (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Directory for outputs, overriding the scenario.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Check a scenario without running it.
    Validate { scenario: PathBuf },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Run {
            scenario,
            seed,
            threads,
            out_dir,
        } => {
            if threads == Some(0) {
                anyhow::bail!("--threads must be at least 1");
            }
            let overrides = Overrides { seed, out_dir };
            let written = run::run_file(&scenario, &overrides, threads)
                .with_context(|| format!("running {}", scenario.display()))?;
            println!("{}", written.csv.display());
            println!("{}", written.report.display());
            if written.pass {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("check failed, see {}", written.report.display());
                Ok(ExitCode::from(1))
            }
        }
        Command::Validate { scenario } => {
            run::validate_file(&scenario)
                .with_context(|| format!("invalid scenario {}", scenario.display()))?;
            println!("ok");
            Ok(ExitCode::SUCCESS)
        }
    }
}
