//! `sinai`: command-line front end for the spectra toolkit.
//!
//! Exit codes: 0 success, 2 validation failure or usage error, 3 solver
//! failure, 4 budget exceeded, 1 anything else (I/O).

mod commands;
mod config;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use config::{Overrides, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

/// Invalid invocation or configuration.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "usage error: {}", self.0)
    }
}

impl std::error::Error for Usage {}

#[derive(Debug, Parser)]
#[command(name = "sinai", version, about = "Periodic-orbit and enriched length spectra of Sinai billiards")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    q_max: Option<usize>,
    #[arg(long, global = true)]
    t_max: Option<f64>,
    #[arg(long, global = true)]
    tol_crit: Option<f64>,
    #[arg(long, global = true)]
    tol_graze: Option<f64>,
    #[arg(long, global = true)]
    tol_sub: Option<f64>,
    /// Largest accepted deviation in `compare`.
    #[arg(long = "tol", global = true)]
    compare_tol: Option<f64>,
    #[arg(long, global = true)]
    lattice_bound: Option<i64>,
    /// Comma-separated flattening parameters.
    #[arg(long = "eps", global = true, value_delimiter = ',')]
    eps_list: Option<Vec<f64>>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Report destination (standard output when absent).
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
}

impl GlobalArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            q_max: self.q_max,
            t_max: self.t_max,
            tol_crit: self.tol_crit,
            tol_graze: self.tol_graze,
            tol_sub: self.tol_sub,
            compare_tol: self.compare_tol,
            lattice_bound: self.lattice_bound,
            eps_list: self.eps_list.clone(),
            seed: self.seed,
            workers: self.workers,
            output: self.output.clone(),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a table file: parsing, convexity, disjointness and horizon.
    Validate { table: PathBuf },
    /// Print the finite-horizon certificate or a corridor witness.
    Horizon { table: PathBuf },
    /// Periodic orbits up to `q_max` bounces and length `t_max`.
    Spectrum { table: PathBuf },
    /// Enriched marked length spectrum up to `q_max` and `t_max`.
    Enriched { table: PathBuf },
    /// Compare the enriched spectra of two tables (or two enriched reports).
    Compare { a: PathBuf, b: PathBuf },
    /// Boundary perturbations.
    #[command(subcommand)]
    Perturb(PerturbCommand),
    /// Geodesics on the flattened two-sheeted surface.
    #[command(subcommand)]
    Kourganoff(KourganoffCommand),
    /// Monte Carlo check of the Crofton identity for a segment.
    Crofton {
        #[arg(long, default_value_t = 0.5)]
        length: f64,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum PerturbCommand {
    /// Remove grazing orbits by local retractions.
    Degraze {
        table: PathBuf,
        #[command(flatten)]
        opts: GenericArgs,
    },
    /// Separate equal lengths by local tilts.
    Separate {
        table: PathBuf,
        #[command(flatten)]
        opts: GenericArgs,
        #[arg(long, default_value_t = 1e-9)]
        gap: f64,
    },
    /// First-order response of one orbit to a bump field.
    Respond {
        table: PathBuf,
        #[arg(long)]
        word: String,
        #[arg(long)]
        scatterer: usize,
        /// Bump centre in arc length.
        #[arg(long)]
        center: f64,
        #[arg(long, default_value_t = 0.3)]
        half_width: f64,
        /// move, tilt or retract.
        #[arg(long, default_value = "tilt")]
        mode: String,
    },
    /// Re-apply a perturbation log to its starting table.
    Replay {
        table: PathBuf,
        log: PathBuf,
        /// Where to write the resulting table.
        #[arg(long)]
        table_out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct GenericArgs {
    /// Where to write the perturbed table.
    #[arg(long)]
    pub table_out: Option<PathBuf>,
    #[arg(long)]
    pub half_width: Option<f64>,
    #[arg(long)]
    pub eps_max: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum KourganoffCommand {
    /// Sup-distance between projected geodesics and billiard trajectories.
    Converge {
        table: PathBuf,
        /// Start as `x,y,vx,vy`; repeat for several starts.
        #[arg(long = "start", required = true, value_parser = parse_start)]
        starts: Vec<[f64; 4]>,
        #[arg(long, default_value_t = 0.6)]
        t_end: f64,
    },
    /// Closed geodesic in the class of a billiard cycle, for each ε.
    ClosedGeodesic {
        table: PathBuf,
        #[arg(long)]
        word: String,
    },
}

fn parse_start(s: &str) -> std::result::Result<[f64; 4], String> {
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"))).collect::<std::result::Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected 4 comma-separated numbers, got {}", v.len()))
}

/// Report text plus the exit status it implies.
pub struct Outcome {
    pub report: String,
    pub code: u8,
}

fn run(cli: Cli) -> Result<u8> {
    let cfg = RunConfig::load(cli.global.config.as_deref(), &cli.global.overrides())?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
    let outcome = pool.install(|| commands::dispatch(&cli.command, &cfg))?;
    match &cfg.output {
        Some(p) => std::fs::write(p, &outcome.report)?,
        None => print!("{}", outcome.report),
    }
    Ok(outcome.code)
}

/// Stable exit code of an error.
fn exit_code(e: &anyhow::Error) -> u8 {
    use sinai_core::Error as E;
    if e.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match e.downcast_ref::<E>() {
        Some(E::BudgetExceeded(_)) => 4,
        Some(
            E::SolverFailure { .. }
            | E::IntegrationFailure { .. }
            | E::HessianSingular(_)
            | E::ClassEscape(_)
            | E::InfeasibleWord(_)
            | E::InsufficientSamples(_),
        ) => 3,
        Some(E::Io(_)) | None => 1,
        Some(_) => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("sinai: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
