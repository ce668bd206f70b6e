use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use hypermode::degeneracy::Thresholds;
use hypermode::spectral::Tolerances;

#[derive(Debug, Parser)]
#[command(
    name = "hypermode",
    version,
    about = "Dispersion roots, modes and linear degeneracy of hyperbolic systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check semi-strict definite hyperbolicity at a state.
    Check(CheckArgs),
    /// Dispersion roots, amplitude spaces and first-order modes.
    Spectrum(SpectrumArgs),
    /// Print the first-order reduction of a second-order system.
    Reduce(ReduceArgs),
    /// Classify modes as genuinely nonlinear or linearly degenerate.
    Degeneracy(DegeneracyArgs),
    /// Verify the reduction's mode structure and linear degeneracy.
    Verify(VerifyArgs),
    /// Evolve smooth periodic data in one space dimension.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Built-in model name.
    #[arg(long)]
    pub model: Option<String>,
    /// System spec file (TOML).
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[command(flatten)]
    pub source: Source,
    /// Replace a coefficient matrix by a constant, e.g. `B11=-4` or
    /// `B00=[[-1,0],[0,-2]]`. Repeatable.
    #[arg(long = "override", value_name = "NAME=VALUE")]
    pub overrides: Vec<String>,
    /// Seed for random models and state sampling.
    #[arg(long, env = "HYPERMODE_SEED", default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ToleranceArgs {
    /// Largest imaginary part counted as real, relative to the spectral radius.
    #[arg(long, default_value_t = Tolerances::default().imag)]
    pub tol_imag: f64,
    /// Gap below which roots are merged, relative to the spectral radius.
    #[arg(long, default_value_t = Tolerances::default().cluster)]
    pub tol_cluster: f64,
    /// Relative singular-value cutoff for kernels.
    #[arg(long, default_value_t = Tolerances::default().rank)]
    pub tol_rank: f64,
}

impl ToleranceArgs {
    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            imag: self.tol_imag,
            cluster: self.tol_cluster,
            rank: self.tol_rank,
        }
    }
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    /// Indicators below this are linearly degenerate.
    #[arg(long, default_value_t = Thresholds::default().ld)]
    pub theta_ld: f64,
    /// Indicators above this are genuinely nonlinear.
    #[arg(long, default_value_t = Thresholds::default().gnl)]
    pub theta_gnl: f64,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write the JSON report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub tol: ToleranceArgs,
    /// Comma-separated state (U for second-order, V for first-order input).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub state: Option<Vec<f64>>,
    /// Number of sampled directions (d = 1 always uses +-1).
    #[arg(long, default_value_t = 16)]
    pub dirs: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub tol: ToleranceArgs,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub state: Option<Vec<f64>>,
    /// Comma-separated direction; normalized. Defaults to sampled directions.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub xi: Option<Vec<f64>>,
    #[arg(long, default_value_t = 8)]
    pub dirs: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Constant-coefficient reduction frozen at `--state` instead of the
    /// quasisemilinear one.
    #[arg(long)]
    pub linear: bool,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub state: Option<Vec<f64>>,
    /// Write the spec file here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SamplingArgs {
    /// Number of sampled states.
    #[arg(long, default_value_t = 128)]
    pub states: usize,
    /// Number of sampled directions (d = 1 always uses +-1).
    #[arg(long, default_value_t = 8)]
    pub dirs: usize,
    /// Half-width of the sampling box.
    #[arg(long = "box", default_value_t = 0.5)]
    pub half_width: f64,
}

#[derive(Debug, Args)]
pub struct DegeneracyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub tol: ToleranceArgs,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub tol: ToleranceArgs,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// Reference state U for the constant-coefficient checks.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub state: Option<Vec<f64>>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Grid cells.
    #[arg(long = "N", default_value_t = 1024)]
    pub cells: usize,
    #[arg(long, default_value_t = 0.5)]
    pub cfl: f64,
    /// Final time.
    #[arg(long = "T", default_value_t = 2.0)]
    pub horizon: f64,
    /// Amplitude `a` of the data `a sin(2 pi x / L)`.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub amplitude: f64,
    /// Period length.
    #[arg(long = "L", default_value_t = std::f64::consts::TAU)]
    pub length: f64,
    /// Trajectory CSV (columns t, x, V1, ..).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Summary JSON; printed to stdout when omitted.
    #[arg(long, value_name = "PATH")]
    pub summary: Option<PathBuf>,
}
