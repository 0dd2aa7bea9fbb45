use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

mod commands;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Check,
    Sweep,
    Iterate,
    Verify,
}

/// Lower-dimensional KAM tori: condition checks, resonance sweeps,
/// iteration and numerical verification.
#[derive(Clone, Debug, Parser)]
#[command(name = "kamtori", version)]
pub struct Args {
    /// Builtin name (`ex41-line`, `ex43,a=2`, ..) or path to a scenario TOML file.
    #[arg(long)]
    pub scenario: String,
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Chart parameter, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lambda: Option<Vec<f64>>,
    /// Grid cells per chart axis, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    /// Gamma ladder for sweeps; the first entry replaces gamma0 elsewhere.
    #[arg(long, value_delimiter = ',')]
    pub gamma: Option<Vec<f64>>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Initial perturbation size; 0 runs with no perturbation.
    #[arg(long)]
    pub eps0: Option<f64>,
    #[arg(long, default_value_t = 4)]
    pub steps: usize,
    /// Degree in y of the divisor expansion.
    #[arg(long)]
    pub dy: Option<u32>,
    #[arg(long)]
    pub lie_tol: Option<f64>,
    #[arg(long)]
    pub slack: Option<f64>,
    /// Seed of the random perturbation and of the verification phases.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Largest |k| scanned by the sweep.
    #[arg(long, default_value_t = 8)]
    pub k_max: u32,
    /// Chain dump to verify; defaults to `<out>/chain.txt`.
    #[arg(long)]
    pub chain: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    /// Integration time of the verification.
    #[arg(long, default_value_t = 100.0)]
    pub time: f64,
    /// Sampling interval of the verification.
    #[arg(long, default_value_t = 0.5)]
    pub dt: f64,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match commands::run(&args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::Status::Input as u8)
        }
    }
}
