//! `singlet-sim`: run, verify and audit singlet-correlation experiments.

mod audit;
mod chsh;
mod freewill;
mod inputs;
mod simulate;
mod verify;

use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use singlet_core::SimError;

/// Exit status contract.
pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_VERIFICATION: u8 = 2;
pub const EXIT_AUDIT: u8 = 3;
pub const EXIT_RUNTIME: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "singlet-sim", version, about = "Local hidden-variable simulations of spin-singlet correlations")]
#[command(after_help = "Exit codes: 0 success, 1 usage or configuration error, 2 verification failure, 3 audit violation, 4 runtime failure.")]
struct Cli {
    /// Worker threads; outputs do not depend on this value.
    #[arg(long, global = true, env = "SINGLET_SIM_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    Simulate(simulate::Args),
    Verify(verify::Args),
    Chsh(chsh::Args),
    Freewill(freewill::Args),
    Audit(audit::Args),
}

/// Why a command stopped early, mapped onto the exit status contract.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Verification(String),
    Audit(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Verification(_) => EXIT_VERIFICATION,
            Failure::Audit(_) => EXIT_AUDIT,
            Failure::Runtime(_) => EXIT_RUNTIME,
        }
    }

    pub fn usage(e: impl fmt::Display) -> Self {
        Failure::Usage(e.to_string())
    }

    pub fn runtime(e: impl fmt::Display) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Verification(m) => write!(f, "verification failed: {m}"),
            Failure::Audit(m) => write!(f, "audit failed: {m}"),
            Failure::Runtime(m) => write!(f, "runtime failure: {m}"),
        }
    }
}

/// Configuration problems are usage errors; everything else happened while running.
impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::NotUnit { .. }
            | SimError::NonFinite(_)
            | SimError::AngleOutOfRange(_)
            | SimError::InvalidWatch(_)
            | SimError::NegativeDelay(_)
            | SimError::Config(_)
            | SimError::Unsupported(_)
            | SimError::MismatchedTables(_) => Failure::usage(e),
            _ => Failure::runtime(e),
        }
    }
}

pub type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("usage error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("runtime failure: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    }
    let result = match cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Verify(a) => verify::run(a),
        Command::Chsh(a) => chsh::run(a),
        Command::Freewill(a) => freewill::run(a),
        Command::Audit(a) => audit::run(a),
    };
    match result {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.code())
        }
    }
}
