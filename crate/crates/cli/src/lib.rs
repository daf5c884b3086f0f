//! Command-line front end: `plan`, `simulate`, `analyze` and `plot`.
//!
//! Exit codes: 0 on success, 2 for configuration or usage errors, 3 for
//! runtime failures (I/O, simulation errors).

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

use std::ffi::OsString;

use clap::Parser;
use thiserror::Error;

pub use commands::Cli;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<hmbandit_core::Error> for CliError {
    fn from(e: hmbandit_core::Error) -> Self {
        use hmbandit_core::Error as E;
        match e {
            E::InvalidParam { .. } | E::InvalidK(_) | E::EmptyPrior | E::InvalidPrior(_) | E::Config(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let mut stdout = std::io::stdout().lock();
    match commands::dispatch(cli, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
