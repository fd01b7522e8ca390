//! The `jetflow` command line: `shoot`, `flow`, `match` and `check`.
//!
//! Exit status: 0 on success, 2 for configuration or validation errors
//! (including usage errors), 3 for numerical divergence, 1 when an output
//! file cannot be written.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{self, RunConfig};
use crate::conservation::audit;
use crate::dynamics::{flow_points, integrate};
use crate::error::Error;

pub const THREADS_ENV: &str = "JETFLOW_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "jetflow", version, about = "Jet particle geodesic shooting and registration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the configured particles and write the trajectory (JSON).
    Shoot(RunArgs),
    /// Advect the configured grid and write initial/final coordinates (CSV).
    Flow(RunArgs),
    /// Solve the configured registration problem and write the result (JSON).
    Match(RunArgs),
    /// Integrate and write the invariant drift report (JSON).
    Check(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Run configuration (JSON).
    #[arg(short, long)]
    pub config: PathBuf,
    /// Output file.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Override `integrator.dt`.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Override `integrator.t_final`.
    #[arg(long = "t-final")]
    pub t_final: Option<f64>,
    /// Seed for random momenta of particles that specify none.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = if e.is_divergence() {
            EXIT_DIVERGENCE
        } else {
            EXIT_VALIDATION
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn load(args: &RunArgs) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| CliError {
        code: EXIT_VALIDATION,
        message: format!("cannot read {}: {e}", args.config.display()),
    })?;
    let mut cfg = RunConfig::from_json(&text).map_err(|e| CliError {
        code: EXIT_VALIDATION,
        message: format!("{}: {e}", args.config.display()),
    })?;
    if let Some(dt) = args.dt {
        cfg.integrator.dt = dt;
    }
    if let Some(t) = args.t_final {
        cfg.integrator.t_final = t;
    }
    Ok(cfg)
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError {
        code: EXIT_IO,
        message: format!("cannot write {}: {e}", path.display()),
    })
}

/// Runs one parsed command; `threads` bounds grid advection parallelism.
pub fn execute(command: &Command, threads: usize) -> Result<(), CliError> {
    match command {
        Command::Shoot(args) => {
            let cfg = load(args)?;
            let state = cfg.build_state(args.seed)?;
            let (dt, t_final) = cfg.timing()?;
            let traj = integrate(&state, t_final, dt, cfg.integrator.scheme)?;
            write(&args.output, &config::trajectory_json(&traj))
        }
        Command::Flow(args) => {
            let cfg = load(args)?;
            let state = cfg.build_state(args.seed)?;
            let (dt, t_final) = cfg.timing()?;
            let points = cfg.grid_points()?;
            let flow = flow_points(&state, &points, t_final, dt, threads)?;
            write(&args.output, &config::grid_csv(cfg.dim, &flow.paths))
        }
        Command::Match(args) => {
            let cfg = load(args)?;
            let (dt, _) = cfg.timing()?;
            let problem = cfg.registration_problem(args.seed, dt)?;
            let result = problem.solve()?;
            write(&args.output, &config::match_json(&result))
        }
        Command::Check(args) => {
            let cfg = load(args)?;
            let state = cfg.build_state(args.seed)?;
            let (dt, t_final) = cfg.timing()?;
            let traj = integrate(&state, t_final, dt, cfg.integrator.scheme)?;
            let report = audit(&traj)?;
            write(&args.output, &config::report_json(&report))
        }
    }
}

pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

/// Parses `args` (including the program name) and runs; returns the exit
/// status.
pub fn run<I, T>(args: I, threads: usize) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match execute(&cli.command, threads) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("jetflow: {}", e.message);
            e.code
        }
    }
}
