// SPDX-License-Identifier: Apache-2.0

//! The `stack3d` command line: cost scenarios, the 2D-versus-3D placement
//! flow, the connection-pitch roadmap, power delivery and shrink
//! calibration.
//!
//! Exit codes: 0 on success, 2 for bad flags, configuration or unreadable
//! inputs, 3 when a model stage fails.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

pub mod config;
pub mod cost_cmd;
pub mod flow;
pub mod output;
pub mod pdn_cmd;
pub mod roadmap;

use config::{Config, ConfigError};
use output::{Artifacts, Format};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{path}: {msg}")]
    Input { path: PathBuf, msg: String },
    #[error("{stage}: {msg}")]
    Stage { stage: &'static str, msg: String },
    #[error("writing output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Input { .. } => EXIT_CONFIG,
            CliError::Stage { .. } | CliError::Io(_) => EXIT_RUNTIME,
        }
    }

    pub fn stage(stage: &'static str, err: impl std::fmt::Display) -> Self {
        CliError::Stage {
            stage,
            msg: err.to_string(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "stack3d",
    version,
    about = "3D-stacked IC cost, placement, timing and power-delivery explorer"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Seeds for the flow, e.g. `1,2,7` or `1-20`.
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// Worker threads for seed and area sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Format of tabular outputs.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Die cost of 2D and 3D scenarios over a sweep of design sizes.
    Cost,
    /// 2D placement against tier partitioning and 3D placement, with
    /// path timing and power delivery for both.
    Flow {
        /// Netlist file; without it a synthetic netlist is generated per seed.
        #[arg(long)]
        netlist: Option<PathBuf>,
    },
    /// Connection density of 3D interconnect pitches.
    Roadmap,
    /// Bump current, power density and IR drop for a footprint and its 3D
    /// reduction.
    Pdn,
    /// New-node wafer-cost ratio that gives a target shrink saving.
    Calibrate,
}

/// Settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub config: Config,
    pub seeds: Vec<u64>,
    pub jobs: usize,
    pub format: Format,
}

/// Parses `1,3,5-8` into seeds in the given order.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| format!("bad seed range `{part}`"))?;
                let b: u64 = b.trim().parse().map_err(|_| format!("bad seed range `{part}`"))?;
                if b < a || b - a >= 1_000_000 {
                    return Err(format!("bad seed range `{part}`"));
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| format!("bad seed `{part}`"))?),
        }
    }
    if out.is_empty() {
        return Err("empty seed list".into());
    }
    Ok(out)
}

pub fn read_input(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

/// Computes every artifact of the requested subcommand without touching the
/// output directory.
pub fn execute(cli: &Cli) -> Result<Artifacts, CliError> {
    if cli.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let config = match &cli.config {
        Some(p) => Config::parse(&read_input(p)?)?,
        None => Config::default(),
    };
    let seeds = match &cli.seed {
        Some(s) => parse_seeds(s).map_err(CliError::Usage)?,
        None => vec![1],
    };
    let ctx = RunContext {
        config,
        seeds,
        jobs: cli.jobs,
        format: cli.format,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} workers: {e}", cli.jobs)))?;
    pool.install(|| match &cli.command {
        Command::Cost => cost_cmd::run_cost(&ctx),
        Command::Calibrate => cost_cmd::run_calibrate(&ctx),
        Command::Flow { netlist } => flow::run_flow(&ctx, netlist.as_deref()),
        Command::Roadmap => roadmap::run_roadmap(&ctx),
        Command::Pdn => pdn_cmd::run_pdn(&ctx),
    })
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    let result = execute(&cli).and_then(|a| Ok(a.commit(&cli.out)?));
    match result {
        Ok(written) => {
            for p in written {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
