//! `spikelab`: command-line access to every spikelab module.
//!
//! Exit status 0 means success, 1 a usage or configuration error, 2 a failed
//! verification or numerical check.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use spikelab::SpikeError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] SpikeError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Core(e) => match e {
                SpikeError::Config(_) | SpikeError::Precondition(_) | SpikeError::Domain(_) | SpikeError::TooCloseToBoundary { .. } => 1,
                _ => 2,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
pub enum Lemma {
    A2,
    A3,
    A4,
    A5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Min,
    Degree,
}

#[derive(Debug, Parser)]
#[command(name = "spikelab", version, about = "Robin functions, bubble projections and reduced energies for critical systems in R^4")]
pub struct Cli {
    /// Seed for every randomized component.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "SPIKELAB_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Universal constants and radial integrals.
    Constants {
        #[arg(long)]
        json: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// τ and ∇τ on an N×N grid of the (x1, x2) plane through the domain origin.
    Robin {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long, default_value_t = 21)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Critical points of τ in a box, optionally with a degree certificate.
    CriticalPoints {
        #[arg(long)]
        domain: PathBuf,
        /// Eight numbers lo1 hi1 … lo4 hi4, space separated or as --box=lo1,hi1,…
        #[arg(long = "box", num_args = 1..=8, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        bx: Vec<f64>,
        #[arg(long, default_value_t = 16)]
        starts: usize,
        #[arg(long)]
        certify: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Defect between the exact projection and its first-order expansion.
    ProjectCheck {
        #[arg(long)]
        domain: PathBuf,
        /// Four coordinates, space separated or as --xi=x1,x2,x3,x4.
        #[arg(long, num_args = 1..=4, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        xi: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1e-1,1e-2,1e-3")]
        deltas: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Rate fits for the concentrated integral estimates.
    Asymptotics {
        #[arg(long, value_enum, ignore_case = true)]
        lemma: Lemma,
        #[arg(long)]
        domain: Option<PathBuf>,
        /// Derivative index for A5.
        #[arg(long, default_value_t = 0)]
        j: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Critical points of the reduced energy for a spike ensemble.
    ReducedEnergy {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        ensemble: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Min)]
        mode: Mode,
        #[arg(long, default_value_t = 32)]
        starts: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Radial solutions on the unit ball and the concentration fit.
    RadialStudy {
        #[arg(long, value_delimiter = ',', default_value = "8,7,6,5,4")]
        lambdas: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Also write the JSON fit report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Every module check on one domain.
    VerifyAll {
        #[arg(long)]
        domain: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("spikelab: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("spikelab: verification failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("spikelab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
