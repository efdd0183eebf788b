//! Command-line front end. The binary is a thin wrapper around [`main`].

pub mod commands;
pub mod run_config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{cmd_construct, cmd_simulate, cmd_sweep, cmd_verify, SweepRow, CHECKS};
pub use run_config::RunConfig;

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

/// Exit code for an error that ends a command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvariantViolation { .. } | Error::StepSizeUnderflow { .. } | Error::IllegalTransition { .. } => {
            EXIT_INVARIANT
        }
        Error::Io(_) => EXIT_IO,
        _ => EXIT_INVALID,
    }
}

#[derive(Debug, Parser)]
#[command(name = "nonlocal-flow", version, about = "Construct, simulate and verify finitely-valued nonlocal gradient flows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// Config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `[run] out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for randomized checks; overrides `[run] seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a construction and write the resulting state.
    Construct(Common),
    /// Integrate the flow and write the trajectory.
    Simulate(Common),
    /// Run named checks; exits 4 when any fails.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Check to run (repeatable); replaces `[verify] checks`.
        #[arg(long = "check")]
        checks: Vec<String>,
    },
    /// Fit convergence rates over a parameter grid.
    Sweep(Common),
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Messages go to stderr.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let common = match &cli.command {
        Command::Construct(c) | Command::Simulate(c) | Command::Sweep(c) => c,
        Command::Verify { common, .. } => common,
    };
    let mut cfg = match RunConfig::load(&common.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    let out = common.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let result = match &cli.command {
        Command::Construct(_) => cmd_construct(&cfg, &out).map(|s| {
            eprintln!("wrote {} levels to {}", s.len(), out.display());
            EXIT_OK
        }),
        Command::Simulate(_) => cmd_simulate(&cfg, &out).map(|t| {
            eprintln!("{} samples, {} transitions, written to {}", t.samples.len(), t.events.len(), out.display());
            EXIT_OK
        }),
        Command::Verify { checks, .. } => cmd_verify(&cfg, &out, checks, common.seed).map(|rep| {
            eprint!("{}", rep.to_text());
            if rep.passed() {
                EXIT_OK
            } else {
                let names: Vec<_> = rep.failures().map(|c| c.name.as_str()).collect();
                eprintln!("failed: {}", names.join(", "));
                EXIT_VERIFY
            }
        }),
        Command::Sweep(_) => cmd_sweep(&cfg, &out).map(|rows| {
            let bad = rows.iter().filter(|r| r.status != "ok").count();
            eprintln!("{} grid points ({bad} failed), written to {}", rows.len(), out.display());
            EXIT_OK
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    })
}
