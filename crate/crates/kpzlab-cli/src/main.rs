//! `kpzlab`: run experiments, structural checks and dumps from a JSON config
//! and flags.
//!
//! Exit codes: 0 success, 1 a check or run failed, 2 usage error, 3 invalid
//! configuration.

mod commands;
mod config;
mod output;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;

use config::Cli;

#[derive(Debug)]
pub enum Failure {
    Check(String),
    Usage(String),
    Config(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Check(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Config(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Check(m) => write!(f, "{m}"),
            Failure::Usage(m) => write!(f, "usage: {m}"),
            Failure::Config(m) => write!(f, "invalid configuration: {m}"),
        }
    }
}

impl From<kpzlab::Error> for Failure {
    fn from(e: kpzlab::Error) -> Self {
        match e {
            kpzlab::Error::Config(m) => Failure::Config(m),
            other => Failure::Check(other.to_string()),
        }
    }
}

/// Cap the worker pool at `KPZLAB_THREADS`.
fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("KPZLAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = match value.trim().parse() {
        Ok(t) if t >= 1 => t,
        _ => return Err(Failure::Config(format!("KPZLAB_THREADS: expected a positive integer, got {value:?}"))),
    };
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Check(e.to_string()))?;
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    let (cfg, overrides) = config::resolve(&cli)?;
    let outcome = commands::dispatch(&cfg)?;
    output::write_all(&cfg, &overrides, &outcome.artifacts)?;
    match outcome.failure {
        Some(msg) => Err(Failure::Check(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("kpzlab: {f}");
            ExitCode::from(f.code())
        }
    }
}
