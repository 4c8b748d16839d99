//! `relcert`: construct, convert, verify, and search finite-window
//! certificates over coset spaces from TOML scenario configs.
//!
//! Exit codes separate execution health from mathematics: 0 means the run
//! completed (whatever the verdict), 2 a configuration problem, 3 a
//! resource cap, 4 an internal consistency failure. Pipelines must branch
//! on report fields, never on the exit status.

mod config;
mod tasks;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("resource cap exceeded: {0}")]
    Resource(String),
    #[error("internal invariant breach: {0}")]
    Invariant(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Resource(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }
}

#[derive(Parser)]
#[command(name = "relcert", version, about = "Finite-window certificates on coset spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a TOML config and emit a report.
    Run {
        /// Scenario config file.
        config: PathBuf,
    },
    /// Verify a stored certificate against a stored coset space.
    Verify {
        /// Certificate JSON file.
        cert: PathBuf,
        /// Coset-space JSON file.
        space: PathBuf,
        /// Comparison radius; defaults to the value stored in the file.
        #[arg(long = "R")]
        r: Option<u32>,
        /// Strict variation threshold, e.g. `2/3`; defaults to stored.
        #[arg(long)]
        eps: Option<String>,
        /// Strict support radius; defaults to the value stored in the file.
        #[arg(long = "S")]
        s: Option<u32>,
        /// Expected centering convention; errors when the file disagrees.
        #[arg(long)]
        convention: Option<String>,
        /// Window radius; defaults to the value stored in the file.
        #[arg(long)]
        window: Option<u32>,
    },
    /// Solve an optimum curve (variation or invariant-mean) as CSV.
    Curve {
        /// Scenario config file.
        config: PathBuf,
    },
    /// Render a scenario's LP instance in solver interchange text.
    ExportLp {
        /// Scenario config file.
        config: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config } => {
            let report = tasks::run_scenario(&config)?;
            if let Some(dir) = report.scenario.out_dir.clone() {
                std::fs::create_dir_all(&dir).map_err(|e| {
                    CliError::Config(format!("cannot create out_dir '{}': {}", dir.display(), e))
                })?;
                let path = dir.join("report.json");
                let text = serde_json::to_string_pretty(&report)
                    .expect("report serialization cannot fail");
                std::fs::write(&path, text).map_err(|e| {
                    CliError::Config(format!("cannot write '{}': {}", path.display(), e))
                })?;
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serialization cannot fail")
            );
            Ok(())
        }
        Command::Verify { cert, space, r, eps, s, convention, window } => {
            let (report, _params) =
                tasks::load_and_verify(&cert, &space, r, eps, s, convention, window)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serialization cannot fail")
            );
            Ok(())
        }
        Command::Curve { config } => {
            let (_sc, csv) = tasks::run_curve(&config)?;
            print!("{}", csv);
            Ok(())
        }
        Command::ExportLp { config } => {
            let (_sc, text) = tasks::run_export_lp(&config)?;
            print!("{}", text);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(e.exit_code())
        }
    }
}
