//! Command-line front end: configuration, run orchestration and CSV output.

// `!(x < y)` checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::GridMismatch;
use crate::config::{ConfigError, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_LIMIT: i32 = 3;
pub const EXIT_MISMATCH: i32 = 4;
pub const EXIT_NUMERICAL: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "spinsc",
    version,
    about = "Semiclassical spin coherent-state propagator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact propagator by diagonalization; writes exact.csv.
    Exact(RunArgs),
    /// Branch search and semiclassical sum; writes CSVs and report.json.
    Semiclassical(RunArgs),
    /// Branch search only; writes branches.csv and report.json.
    Branches(RunArgs),
    /// Closed-form equator sum; writes equator.csv and frequencies.csv.
    Equator(RunArgs),
    /// Compares two propagator CSVs; writes compare.json and residuals.csv.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Drop the constant phase from the mu -> j^2 replacement.
    #[arg(long)]
    pub mu_to_j2: bool,
    /// Enable the Stokes guard with this log-modulus margin.
    #[arg(long, value_name = "MARGIN")]
    pub stokes_guard: Option<f64>,
    #[arg(long, value_name = "X")]
    pub ode_tol: Option<f64>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub exact: PathBuf,
    #[arg(long)]
    pub semiclassical: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub quiet: bool,
}

impl RunArgs {
    pub fn load(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if self.mu_to_j2 {
            cfg.mu_to_j2 = true;
        }
        if let Some(m) = self.stokes_guard {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(
                    ConfigError::Invalid("--stokes-guard must be non-negative".into()).into(),
                );
            }
            cfg.stokes_guard = Some(m);
        }
        if let Some(t) = self.ode_tol {
            if !(1e-13..=1e-6).contains(&t) {
                return Err(
                    ConfigError::Invalid("--ode-tol must lie in [1e-13, 1e-6]".into()).into(),
                );
            }
            cfg.ode_tol = t;
        }
        Ok(cfg)
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or("n/a".to_string(), |v| format!("{v:.3e}"))
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Exact(a) => {
            let path = commands::command_exact(&a.load()?, &a.out)?;
            if !a.quiet {
                println!("wrote {}", path.display());
            }
        }
        Command::Semiclassical(a) => {
            let out = commands::command_semiclassical(&a.load()?, &a.out)?;
            if !a.quiet {
                let r = &out.report;
                println!(
                    "branches found {}, contributing {}, caustic warnings {}, missing samples {}",
                    r.branches_found,
                    r.branches_contributing,
                    r.caustic_warnings,
                    r.missing_samples
                );
                if let Some(c) = &r.comparison {
                    println!(
                        "vs exact over {} samples: max |dRe K| {}, max |dIm K| {}, max |d|K|^2| {}",
                        c.compared,
                        fmt_opt(c.max_abs_error_re),
                        fmt_opt(c.max_abs_error_im),
                        fmt_opt(c.max_abs_error_abs2)
                    );
                }
            }
        }
        Command::Branches(a) => {
            let r = commands::command_branches(&a.load()?, &a.out)?;
            if !a.quiet {
                println!("branches found {}", r.branches_found);
            }
        }
        Command::Equator(a) => {
            commands::command_equator(&a.load()?, &a.out)?;
            if !a.quiet {
                println!("wrote {}", a.out.join("equator.csv").display());
            }
        }
        Command::Compare(a) => {
            let r = commands::command_compare(&a.exact, &a.semiclassical, &a.out)?;
            if !a.quiet {
                let c = &r.comparison;
                println!(
                    "compared {} samples: max |dRe K| {}, max |dIm K| {}, max |d|K|^2| {}",
                    c.compared,
                    fmt_opt(c.max_abs_error_re),
                    fmt_opt(c.max_abs_error_im),
                    fmt_opt(c.max_abs_error_abs2)
                );
            }
        }
    }
    Ok(())
}

/// Maps an error chain to the process exit status.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return EXIT_CONFIG;
        }
        if cause.is::<GridMismatch>() {
            return EXIT_MISMATCH;
        }
        if let Some(e) = cause.downcast_ref::<spinsc::Error>() {
            use spinsc::Error as E;
            return match e {
                E::DimensionLimit { .. } => EXIT_LIMIT,
                E::InvalidSpin(_) | E::InvalidArgument(_) | E::NonHermitian(_) | E::Domain(_) => {
                    EXIT_CONFIG
                }
                _ => EXIT_NUMERICAL,
            };
        }
    }
    EXIT_OTHER
}

/// Parses arguments, runs, and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
