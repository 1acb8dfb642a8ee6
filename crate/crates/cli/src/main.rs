//! `l2dyn`: batch runs for twist tables, homoclinic masses, Melnikov slopes and orbit export.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use commands::{ModelChoice, OrbitExport, Rendered, SweepGrid};
use config::{Format, RunConfig};
use l2dyn::melnikov::{MelnikovForm, Parity};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0:#}")]
    Config(anyhow::Error),
    #[error("{0:#}")]
    Numerical(anyhow::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<l2dyn::Error> for CliError {
    fn from(e: l2dyn::Error) -> Self {
        match e {
            l2dyn::Error::InvalidParameter(_) => CliError::Config(e.into()),
            _ => CliError::Numerical(e.into()),
        }
    }
}

impl From<config::ConfigError> for CliError {
    fn from(e: config::ConfigError) -> Self {
        CliError::Config(e.into())
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Numerical(e)
    }
}

#[derive(Debug, Parser)]
#[command(name = "l2dyn", version, about = "Dynamics near L2 of the restricted three-body problem")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand; they override the configuration file.
#[derive(Debug, Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Integrator tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Quadrature tolerance.
    #[arg(long, global = true)]
    quad_tol: Option<f64>,
    /// Seed offset along the unstable direction.
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Flight-time budget for branches and tip searches.
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Output directory; standard output when neither this nor L2DYN_OUT_DIR is set.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Parallel jobs for multi-row commands; row order does not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ParityArg {
    Even,
    Odd,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormArg {
    Bracket,
    Potential,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Twist coefficients at tabulated masses and the Hill limit.
    Table1 {
        /// Wave counts with a tabulated mass; all of them when neither this nor --mu is given.
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
        /// Additional mass ratios.
        #[arg(long, value_delimiter = ',')]
        mu: Vec<f64>,
    },
    /// Homoclinic masses and Melnikov slopes at zero for k_min..=k_max.
    Table2 {
        #[arg(long)]
        k_min: Option<usize>,
        #[arg(long)]
        k_max: Option<usize>,
    },
    /// Melnikov slope along tip-calibrated Hill branches.
    HillLimit {
        #[arg(long, value_enum, default_value = "both")]
        parity: ParityArg,
        #[arg(long)]
        tip_index: Option<usize>,
    },
    /// Export the symmetric homoclinic orbit with k waves (samples as CSV, summary as JSON).
    Homoclinic {
        #[arg(long)]
        k: usize,
        /// Use this mass instead of searching for it.
        #[arg(long)]
        mu: Option<f64>,
        /// Append the mirrored stable half.
        #[arg(long)]
        full: bool,
    },
    /// Export one period of a Lapunov orbit (samples as CSV, summary as JSON).
    Lapunov {
        #[arg(long, value_enum, default_value = "hill")]
        model: ModelChoice,
        #[arg(long)]
        mu: Option<f64>,
        /// Energy above the equilibrium.
        #[arg(long, default_value_t = 1e-5)]
        energy_offset: f64,
    },
    /// Melnikov function on a grid of phases.
    MelnikovSweep {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long, default_value_t = -std::f64::consts::PI, allow_negative_numbers = true)]
        t0_min: f64,
        #[arg(long, default_value_t = std::f64::consts::PI, allow_negative_numbers = true)]
        t0_max: f64,
        #[arg(long, default_value_t = 65)]
        points: usize,
        #[arg(long, value_enum, default_value = "bracket")]
        form: FormArg,
    },
    /// Homoclinic masses with their crossing data.
    MuK {
        /// A single wave count; k_min..=k_max otherwise.
        #[arg(long)]
        k: Option<usize>,
    },
}

fn build_config(common: &Common, command: &Command) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::from_env();
    if let Some(path) = &common.config {
        cfg.load_file(path)?;
    }
    if let Some(v) = common.tol {
        cfg.tol = v;
    }
    if let Some(v) = common.quad_tol {
        cfg.quad_tol = v;
    }
    if let Some(v) = common.delta {
        cfg.delta = v;
    }
    if let Some(v) = common.horizon {
        cfg.horizon = v;
    }
    if let Some(v) = &common.out {
        cfg.out = Some(v.clone());
    }
    if let Some(v) = common.format {
        cfg.format = v;
    }
    if let Some(v) = common.workers {
        cfg.workers = v;
    }
    match command {
        Command::Table2 { k_min, k_max } => {
            if let Some(v) = k_min {
                cfg.k_min = *v;
            }
            if let Some(v) = k_max {
                cfg.k_max = *v;
            }
        }
        Command::HillLimit { tip_index: Some(v), .. } => cfg.tip_index = *v,
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_table<T: Serialize>(cfg: &RunConfig, rendered: Rendered<T>) -> Result<(), CliError> {
    let bytes = output::render(&rendered.rows, cfg.format)?;
    if let Some(path) = output::emit(cfg, &rendered.stem, &bytes)? {
        eprintln!("wrote {}", path.display());
    }
    match rendered.partial_failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn write_export<S: Serialize>(cfg: &RunConfig, stem: &str, export: OrbitExport<S>) -> Result<(), CliError> {
    let bytes = match export {
        OrbitExport::Samples(rows) => output::render(&rows, cfg.format)?,
        OrbitExport::Summary(s) => {
            let mut b = serde_json::to_vec_pretty(&s).map_err(|e| CliError::Numerical(e.into()))?;
            b.push(b'\n');
            b
        }
    };
    if let Some(path) = output::emit(cfg, stem, &bytes)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = build_config(&cli.common, &cli.command)?;
    match cli.command {
        Command::Table1 { k, mu } => {
            let ks: Vec<usize> = if k.is_empty() && mu.is_empty() {
                commands::TABULATED_MASSES.iter().map(|&(k, _)| k).collect()
            } else {
                k
            };
            write_table(&cfg, commands::table1(&cfg, &ks, &mu)?)
        }
        Command::Table2 { .. } => write_table(&cfg, commands::table2(&cfg)?),
        Command::HillLimit { parity, .. } => {
            let parities = match parity {
                ParityArg::Even => vec![Parity::Even],
                ParityArg::Odd => vec![Parity::Odd],
                ParityArg::Both => vec![Parity::Even, Parity::Odd],
            };
            write_table(&cfg, commands::hill_limit(&cfg, &parities)?)
        }
        Command::Homoclinic { k, mu, full } => {
            if k < 2 {
                return Err(CliError::Config(anyhow!("k must be at least 2, got {k}")));
            }
            let (stem, export) = commands::homoclinic(&cfg, k, mu, full)?;
            write_export(&cfg, &stem, export)
        }
        Command::Lapunov { model, mu, energy_offset } => {
            let (stem, export) = commands::lapunov_orbit(&cfg, model, mu, energy_offset)?;
            write_export(&cfg, &stem, export)
        }
        Command::MelnikovSweep { k, mu, t0_min, t0_max, points, form } => {
            if k < 2 {
                return Err(CliError::Config(anyhow!("k must be at least 2, got {k}")));
            }
            let form = match form {
                FormArg::Bracket => MelnikovForm::Bracket,
                FormArg::Potential => MelnikovForm::Potential,
            };
            let grid = SweepGrid { t0_min, t0_max, points };
            write_table(&cfg, commands::melnikov_sweep(&cfg, k, mu, &grid, form)?)
        }
        Command::MuK { k } => write_table(&cfg, commands::mu_k(&cfg, k)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = match e {
                CliError::Config(_) => "configuration error",
                CliError::Numerical(_) => "numerical failure",
            };
            eprintln!("l2dyn: {kind}: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
