//! `gexitlab` command-line front end.
//!
//! Exit codes: 0 success, 2 invalid arguments or specs, 3 numerical
//! non-convergence (partial output is still written), 4 I/O failure.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::Parser;

use crate::commands::Cli;

/// Error carrying the process exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Numeric(anyhow::Error),
    Io(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Numeric(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Numeric(e) | Failure::Io(e) => e,
        }
    }
}

impl From<gexitlab::Error> for Failure {
    fn from(e: gexitlab::Error) -> Failure {
        use gexitlab::Error as E;
        match e {
            E::NonConvergent(_) | E::Unsolvable { .. } | E::Resolution(_) => Failure::Numeric(e.into()),
            _ => Failure::Usage(e.into()),
        }
    }
}

fn main() -> ExitCode {
    let args = match config::expand_args(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            return ExitCode::from(f.code());
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
