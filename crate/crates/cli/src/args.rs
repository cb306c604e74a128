use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use thmpc::harness::{StateMix, SweepAxis};
use thmpc::PtVariant;

#[derive(Debug, Parser)]
#[command(name = "thmpc", version, about = "Block preconditioned solves of fracture contact thermo-poromechanics Jacobians")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a surrogate Jacobian and write <out>.mtx, <out>.json and <out>.txt.
    Gen(GenArgs),
    /// Solve an ingested or generated system and report.
    Solve(SolveArgs),
    /// Solve generated systems over a grid of one parameter.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Ambient dimension (2 or 3).
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Grid cells per side.
    #[arg(long, default_value_t = 8)]
    pub refine: usize,
    /// Contact state fractions, e.g. `stick:0.5,slide:0.5` (remainder open).
    #[arg(long, default_value = "stick:0.5,slide:0.5")]
    pub states: StateMix,
    /// Convection to diffusion ratio of the energy block.
    #[arg(long, default_value_t = 1.0)]
    pub peclet: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Dense exact Schur chain and direct subsolves everywhere.
    #[arg(long)]
    pub exact_mode: bool,
    #[arg(long, default_value_t = 30)]
    pub restart: usize,
    #[arg(long, default_value_t = 120)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-12)]
    pub rtol: f64,
    /// AMG strong-connection threshold.
    #[arg(long, default_value_t = 0.7)]
    pub amg_theta: f64,
    /// Add the thermal diagonal stabilization to the temperature rows.
    #[arg(long)]
    pub thermal_stab: bool,
    /// Flexible GMRES outside, GMRES-accelerated subsolvers inside.
    #[arg(long)]
    pub flexible: bool,
    /// Fill the wall-clock columns of CSV rows.
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Output path prefix.
    #[arg(long, default_value = "problem")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// MatrixMarket coordinate file; without it a problem is generated from the problem flags.
    #[arg(long, requires = "layout")]
    pub matrix: Option<PathBuf>,
    /// Block layout JSON belonging to `--matrix`.
    #[arg(long, requires = "matrix")]
    pub layout: Option<PathBuf>,
    /// Right-hand side, one float per line. Defaults to J times a unit random vector drawn from `--seed`.
    #[arg(long, requires = "matrix")]
    pub rhs: Option<PathBuf>,
    #[arg(long, default_value = "cpr")]
    pub pt: PtVariant,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV file to append one row to.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Write the solution, one float per line.
    #[arg(long)]
    pub solution: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// refine, state_fraction (sliding fraction, rest stick) or peclet.
    #[arg(long)]
    pub axis: SweepAxis,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub values: Vec<String>,
    /// Comma-separated pressure-temperature variants.
    #[arg(long, value_delimiter = ',', default_value = "cpr,samg")]
    pub pt: Vec<PtVariant>,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// CSV output path; standard output when absent.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}
