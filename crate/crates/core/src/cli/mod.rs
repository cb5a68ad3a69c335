//! Command-line front end.
//!
//! Exit codes: 0 success, 1 input or configuration error, 2 numerical
//! failure (non-convergence, unbalanced search, failed check).

pub mod config;
pub mod io;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::fit::{balance_theta1, fit, FitOptions, ModelKind};
use crate::report::{render, run_checks, Tolerances};
use crate::scan::{poissonize, run_scan};
use crate::Error;

use config::{RunConfig, DEFAULT_BALANCE_TOLERANCE};
use io::{balance_json, fit_report_json, read_csv, write_csv};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fourphoton", version, about = "Four-photon interference simulator and fitter")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the scan described by a JSON config and write a CSV table.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config seed (only used with a sampling section).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Add a seeded Poisson counts column to a scan table.
    Sample {
        table: PathBuf,
        /// Mean counts at the curve maximum.
        #[arg(long)]
        counts: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a model to the counts column of a scan table.
    Fit {
        data: PathBuf,
        #[arg(long)]
        model: ModelKind,
        #[arg(long)]
        weighted: bool,
        #[arg(long)]
        free_phase: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search the HWP1 angle that cancels the cos 2phi fringe term.
    Balance {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in checks and print a pass/fail table.
    Report {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl clap::ValueEnum for ModelKind {
    fn value_variants<'a>() -> &'a [Self] {
        &[ModelKind::Dip, ModelKind::Theta, ModelKind::Fringe]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(match self {
            ModelKind::Dip => "dip",
            ModelKind::Theta => "theta",
            ModelKind::Fringe => "fringe",
        }))
    }
}

/// A failed command: its exit code and a diagnostic.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Numerical(_) => EXIT_NUMERICAL,
            _ => EXIT_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn input_error(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: msg.into(),
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| input_error(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_table(path: &Path) -> Result<crate::scan::ScanTable, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?;
    Ok(read_csv(&text)?)
}

fn to_json(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

pub fn cmd_simulate(config: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<(), Failure> {
    let cfg = RunConfig::load(config)?;
    let scan = cfg.scan_config()?;
    let mut table = run_scan(&scan)?;
    if let Some(sampling) = &cfg.sampling {
        let seed = seed
            .or(cfg.seed)
            .ok_or_else(|| input_error("sampling needs a seed (config 'seed' or --seed)"))?;
        table = poissonize(&table, sampling.mean_counts_at_max, seed)?;
    }
    let target = out.map(Path::to_path_buf).or(cfg.output.clone());
    emit(&write_csv(&table), target.as_deref())
}

pub fn cmd_sample(table: &Path, counts: f64, seed: u64, out: Option<&Path>) -> Result<(), Failure> {
    let t = read_table(table)?;
    let sampled = poissonize(&t, counts, seed)?;
    emit(&write_csv(&sampled), out)
}

pub fn cmd_fit(data: &Path, model: ModelKind, opts: FitOptions, out: Option<&Path>) -> Result<(), Failure> {
    let t = read_table(data)?;
    let report = fit(&t, model, None, &opts)?;
    emit(&to_json(&fit_report_json(&report)), out)?;
    if report.converged {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_NUMERICAL,
            message: format!("fit did not converge after {} iterations", report.iterations),
        })
    }
}

pub fn cmd_balance(config: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let cfg = RunConfig::load(config)?;
    let spec = cfg.source.schmidt_spec()?;
    let tolerance = cfg
        .balance
        .as_ref()
        .map(|b| b.tolerance)
        .unwrap_or(DEFAULT_BALANCE_TOLERANCE);
    let b = balance_theta1(&spec, tolerance)?;
    let target = out.map(Path::to_path_buf).or(cfg.output.clone());
    emit(&to_json(&balance_json(&b, tolerance)), target.as_deref())?;
    if b.balanced {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_NUMERICAL,
            message: format!("not balanced: |V2| = {:e} > {:e}", b.v2.abs(), tolerance),
        })
    }
}

pub fn cmd_report(out: Option<&Path>) -> Result<(), Failure> {
    let checks = run_checks(&Tolerances::default())?;
    emit(&render(&checks), out)?;
    let failed = checks.iter().filter(|c| !c.passed()).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_NUMERICAL,
            message: format!("{failed} check(s) failed"),
        })
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Simulate { config, out, seed } => cmd_simulate(&config, out.as_deref(), seed),
        Command::Sample { table, counts, seed, out } => cmd_sample(&table, counts, seed, out.as_deref()),
        Command::Fit { data, model, weighted, free_phase, out } => {
            cmd_fit(&data, model, FitOptions { weighted, free_phase }, out.as_deref())
        }
        Command::Balance { config, out } => cmd_balance(&config, out.as_deref()),
        Command::Report { out } => cmd_report(out.as_deref()),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("fourphoton: {}", f.message);
            f.code
        }
    }
}
