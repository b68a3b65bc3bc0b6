//! Command-line front end for the `sphere-ot` library.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod error;
pub mod input;
pub mod json;
pub mod verify;

pub use error::{CliError, CliResult, EXIT_FAIL, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};

pub const MIN_GRID: usize = 32;
pub const MAX_GRID: usize = 256;

#[derive(Debug, Parser)]
#[command(name = "sphere-ot", version, about = "Optimal transport on the sphere with cost |x-y|²/2")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Theorem constants for a dimension.
    Constants {
        #[arg(long)]
        dim: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Evaluates a theorem hypothesis on a pair of densities.
    Check(CheckArgs),
    /// Solves the transport equation on S² by continuation.
    Solve(SolveArgs),
    /// Transport cost between two weighted point clouds.
    W2(W2Args),
    /// Minimum of the normalized MTW form over quasi-random samples.
    MtwScan(MtwArgs),
    /// Runs the verification suites.
    Verify(VerifyArgs),
    /// Writes sample density and cloud files.
    #[command(hide = true)]
    Gen(GenArgs),
}

#[derive(Debug, Args)]
pub struct Output {
    /// Write JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn grid_size(s: &str) -> Result<usize, String> {
    let n: usize = s.parse().map_err(|_| format!("'{s}' is not an integer"))?;
    if !(MIN_GRID..=MAX_GRID).contains(&n) {
        return Err(format!("grid size must lie in [{MIN_GRID}, {MAX_GRID}]"));
    }
    Ok(n)
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if !(v > 0.0 && v.is_finite()) {
        return Err("value must be positive".into());
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Theorem {
    #[value(name = "1.1")]
    T11,
    #[value(name = "1.2")]
    T12,
    #[value(name = "1.3")]
    T13,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long, value_enum)]
    pub theorem: Theorem,
    /// Source density: uniform, zonal:eps=E, bump:center=X,Y,Z,eps=E or a CSV file.
    #[arg(long)]
    pub f: String,
    #[arg(long)]
    pub g: String,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 48, value_parser = grid_size)]
    pub grid: usize,
    /// Cloud size for the transport cost in the 1.2 check.
    #[arg(long, default_value_t = 800)]
    pub nodes: usize,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub f: String,
    #[arg(long)]
    pub g: String,
    #[arg(long, value_parser = grid_size)]
    pub grid: usize,
    #[arg(long, default_value_t = 10)]
    pub t_steps: usize,
    #[arg(long, default_value_t = 1e-10, value_parser = positive)]
    pub tol: f64,
    /// Solve even when the gradient hypothesis fails.
    #[arg(long)]
    pub force: bool,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Lp,
    Sinkhorn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Convention {
    /// `Σ γ |x-y|²/2`.
    Half,
    /// `Σ γ |x-y|²`.
    Full,
}

#[derive(Debug, Args)]
pub struct W2Args {
    #[arg(long)]
    pub mu: PathBuf,
    #[arg(long)]
    pub nu: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Lp)]
    pub method: Method,
    #[arg(long, default_value_t = 1e-2, value_parser = positive)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = Convention::Half)]
    pub convention: Convention,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct MtwArgs {
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.01, value_parser = positive)]
    pub dmin: f64,
    #[arg(long, default_value_t = std::f64::consts::PI - 0.05, value_parser = positive)]
    pub dmax: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = verify::Case::All)]
    pub case: verify::Case,
    /// Grid for the c-convexity and nonsplitting suites.
    #[arg(long, default_value_t = 48, value_parser = grid_size)]
    pub grid: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    /// Nodal density CSV.
    Nodal,
    /// `theta,logrho` table of a zonal density.
    Zonal,
    /// Weighted cloud on a Fibonacci lattice.
    Cloud,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: GenKind,
    #[arg(long)]
    pub spec: String,
    #[arg(long, default_value_t = 32, value_parser = grid_size)]
    pub grid: usize,
    /// Rows of a zonal table or points of a cloud.
    #[arg(long, default_value_t = 181)]
    pub count: usize,
    /// Rotation about e3 applied to cloud points, in radians.
    #[arg(long, default_value_t = 0.0)]
    pub rotate: f64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
