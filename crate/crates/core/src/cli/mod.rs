// Copyright 2026 The tcl-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

//! The `tcl` command line.
//!
//! ```text
//! tcl <simulate|oracle|channel|perturb|linresp|converge|identities> --config <path> --out <path> [--quiet]
//! ```
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 invalid configuration
//! (including grid errors), 3 breakdown of the convolutionless form, 4 a
//! failed check in `identities`.

mod commands;
pub mod config;
pub mod output;

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};

use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Convolutionless trajectory with oracle comparison (CSV).
    Simulate,
    /// Brute-force reduced trajectory (CSV).
    Oracle,
    /// Quantum operation and Choi spectrum at one time (JSON).
    Channel,
    /// First- and second-order corrections with a coupling scaling study (CSV + JSON).
    Perturb,
    /// Kubo response against the finite-field oracle (CSV + JSON).
    Linresp,
    /// Error against the oracle under grid refinement (JSON).
    Converge,
    /// Projector and propagator identity report (JSON).
    Identities,
}

#[derive(Debug, Parser)]
#[command(name = "tcl", version, about = "Exact reduced dynamics in the time-convolutionless form")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Result file; auxiliary tables are written next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Suppress progress and summary lines on stderr.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Breakdown(String),
    Identity(String),
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Other(_) => 1,
            CliError::Config(_) => 2,
            CliError::Breakdown(_) => 3,
            CliError::Identity(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Breakdown(m) | CliError::Identity(m) | CliError::Other(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::TclBreakdown { .. } => CliError::Breakdown(e.to_string()),
            Error::Grid(_) | Error::Model(_) | Error::StateValidation(_) => CliError::Config(e.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(format!("i/o error: {e}"))
    }
}

/// Diagnostics sink honoring `--quiet`.
pub(crate) struct Log {
    quiet: bool,
}

impl Log {
    pub(crate) fn info(&self, msg: impl fmt::Display) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    pub(crate) fn warn(&self, msg: impl fmt::Display) {
        eprintln!("warning: {msg}");
    }
}

/// Runs one subcommand; the error carries the exit code.
pub fn run(command: Command, config_path: &Path, out: &Path, quiet: bool) -> Result<(), CliError> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", config_path.display())))?;
    let cfg = config::parse(&text).map_err(CliError::Config)?;
    let log = Log { quiet };
    commands::dispatch(command, &cfg, out, &log)
}

/// Runs the parsed command line and returns the process exit code.
pub fn main_with(args: Args) -> i32 {
    match run(args.command, &args.config, &args.out, args.quiet) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
