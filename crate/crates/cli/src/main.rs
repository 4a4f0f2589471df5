//! `ahflow`: runs scenario files against the asymptotically hyperbolic flow
//! library and writes deterministic reports.

mod converge;
mod report;
mod scenario;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::scenario::Scenario;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid scenario: {0}")]
    Schema(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Schema(_) | CliError::Output(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<ahflow_core::Error> for CliError {
    fn from(e: ahflow_core::Error) -> Self {
        use ahflow_core::Error as E;
        match e {
            E::InvalidParameter(_) | E::OrderMismatch { .. } => CliError::Schema(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "ahflow", version, about = "Asymptotically hyperbolic Ricci flow experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file and write its report.
    Run { config: PathBuf },
    /// Repeat a grid-based scenario under successive refinement.
    Converge {
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Print the JSON schema of scenario files.
    Schema,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("AHFLOW_THREADS") else {
        return Ok(());
    };
    let threads: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|t| *t > 0)
        .ok_or_else(|| CliError::Schema(format!("AHFLOW_THREADS = {v:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Schema(format!("cannot configure {threads} threads: {e}")))
}

fn run(cli: Cli) -> Result<bool, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Schema => {
            println!("{}", scenario::schema_json());
            Ok(true)
        }
        Command::Run { config } => {
            let s = Scenario::load(&config)?;
            let out = tasks::run_task(&s)?;
            let path = report::emit_report(&s.output_dir(), &s.name, s.task.name(), s.seed, &out)?;
            for c in out.checks.iter().filter(|c| !c.pass) {
                eprintln!("check failed: {}: {}", c.name, c.detail);
            }
            println!("{}", path.display());
            Ok(out.passed())
        }
        Command::Converge { config, levels } => {
            let s = Scenario::load(&config)?;
            let out = converge::converge(&s, levels)?;
            let name = format!("{}.converge", s.name);
            let path = report::emit_report(&s.output_dir(), &name, s.task.name(), s.seed, &out)?;
            for c in out.checks.iter().filter(|c| !c.pass) {
                eprintln!("check failed: {}: {}", c.name, c.detail);
            }
            println!("{}", path.display());
            Ok(out.passed())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
