//! Batch front end: assemble, solve, scan and verify problems described by
//! plain-text problem files.

pub mod commands;
pub mod error;
pub mod problem;
pub mod table;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::Outcome;
pub use error::CliError;
pub use problem::ProblemSpec;

/// Caps the worker pool when set.
pub const THREADS_ENV: &str = "PSI_SPECTRAL_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "psi-spectral",
    version,
    about = "Band-matrix eigen-solver for rational-coefficient ODEs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Assemble the exact band matrix and audit it.
    Assemble {
        #[command(flatten)]
        settings: Settings,
    },
    /// Solve for square-summable null vectors and check them.
    Solve {
        #[command(flatten)]
        settings: Settings,
        #[command(flatten)]
        checks: Checks,
    },
    /// Smallest singular value over a grid of eigenvalue guesses.
    Scan {
        #[command(flatten)]
        settings: Settings,
        /// Grid as FROM:TO:STEP.
        #[arg(long, allow_hyphen_values = true)]
        scan: String,
    },
    /// Residual and oracle checks of a coefficient file.
    Verify {
        #[command(flatten)]
        settings: Settings,
        #[command(flatten)]
        checks: Checks,
        /// Coefficients as `n,re,im` rows.
        #[arg(long)]
        coeffs: PathBuf,
    },
}

/// Problem file plus overrides. Flags win over values in the file.
#[derive(Args, Debug, Clone, Default)]
pub struct Settings {
    #[arg(long)]
    pub problem: PathBuf,
    /// Eigenvalue, exact: `2`, `-1/3`, `0.25`, `1/2+1*i`.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub truncation: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub k0: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    pub kdiamond: Option<i64>,
    /// Relative singular value cutoff [default: 1e-8].
    #[arg(long)]
    pub sigma_tol: Option<f64>,
    /// Largest energy share in the last quarter of a vector [default: 1e-4].
    #[arg(long)]
    pub tail_tol: Option<f64>,
    /// Largest principal angle between truncations, radians [default: 1e-4].
    #[arg(long)]
    pub angle_tol: Option<f64>,
    /// Rationalization tolerance for scan points [default: 1e-15].
    #[arg(long)]
    pub lambda_tol: Option<f64>,
    /// Residual samples this close to a singular point are skipped [default: 1e-6].
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long, default_value = "psi-spectral-out")]
    pub out: PathBuf,
}

/// Where reconstructed functions are checked.
#[derive(Args, Debug, Clone)]
pub struct Checks {
    #[arg(long, value_parser = parse_range, default_value = "-3:3", allow_hyphen_values = true)]
    pub residual_range: (f64, f64),
    #[arg(long, default_value_t = 601)]
    pub samples: usize,
    #[arg(long, value_parser = parse_range, default_value = "0:2", allow_hyphen_values = true)]
    pub oracle_range: (f64, f64),
    #[arg(long, default_value_t = psi_spectral::oracle::DEFAULT_STEPS)]
    pub oracle_steps: usize,
}

impl Default for Checks {
    fn default() -> Self {
        Self {
            residual_range: (-3.0, 3.0),
            samples: 601,
            oracle_range: (0.0, 2.0),
            oracle_steps: psi_spectral::oracle::DEFAULT_STEPS,
        }
    }
}

/// `A:B` with finite `A < B`.
pub fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("'{s}' is not A:B"))?;
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("bad number '{t}' in '{s}'"))
    };
    let (a, b) = (num(a)?, num(b)?);
    if a >= b {
        return Err(format!("empty range '{s}'"));
    }
    Ok((a, b))
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        CliError::Input(format!(
            "{THREADS_ENV} must be a positive integer, got '{raw}'"
        ))
    })?;
    // A pool that already exists keeps its size.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Assemble { settings } => {
            let spec = ProblemSpec::load(&settings.problem, &settings)?;
            commands::assemble(&spec, &settings.out)
        }
        Command::Solve { settings, checks } => {
            let spec = ProblemSpec::load(&settings.problem, &settings)?;
            commands::solve(&spec, &checks, &settings.out)
        }
        Command::Scan { settings, scan } => {
            let spec = ProblemSpec::load(&settings.problem, &settings)?;
            commands::scan(&spec, &scan, &settings.out)
        }
        Command::Verify {
            settings,
            checks,
            coeffs,
        } => {
            let spec = ProblemSpec::load(&settings.problem, &settings)?;
            commands::verify(&spec, &checks, &coeffs, &settings.out)
        }
    }
}
