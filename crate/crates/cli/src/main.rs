//! `tvpwl` command-line tool.
//!
//! Exit codes: 0 success, 1 I/O or check failure, 2 solver did not converge
//! (results are still written), 64 usage error.

mod benchmark;
mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tvpwl::{GammaEstimateParams, SolverParams, TgvParams};

pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_NONCONVERGED: u8 = 2;
pub const EXIT_USAGE: u8 = 64;

/// Environment variable overriding the benchmark worker count.
pub const WORKERS_ENV: &str = "TVPWL_WORKERS";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
}

impl From<tvpwl::Error> for CliError {
    fn from(e: tvpwl::Error) -> Self {
        match e {
            tvpwl::Error::InvalidParameter { .. } => CliError::Usage(e.to_string()),
            other => CliError::Io(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "tvpwl", version, about = "Piecewise-Lipschitz TV denoising")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Denoise an image with TV, TV_pwL or TGV^2.
    Denoise(DenoiseArgs),
    /// Estimate the Lipschitz budget gamma.
    EstimateGamma(EstimateGammaArgs),
    /// Add seeded Gaussian noise to a clean image.
    AddNoise(AddNoiseArgs),
    /// Run the denoising benchmark and write CSV results.
    Benchmark(BenchmarkArgs),
    /// Run the built-in property checks.
    Check(CheckArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Regulariser {
    Tv,
    Tvpwl,
    Tgv,
}

impl Regulariser {
    pub fn name(self) -> &'static str {
        match self {
            Self::Tv => "tv",
            Self::Tvpwl => "tvpwl",
            Self::Tgv => "tgv",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GammaSource {
    File,
    OverTv,
    Gt,
}

impl GammaSource {
    pub fn name(self) -> &'static str {
        match self {
            Self::File => "file",
            Self::OverTv => "over-tv",
            Self::Gt => "gt",
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    /// Dual step size.
    #[arg(long, default_value_t = SolverParams::default().sigma)]
    pub sigma: f64,
    /// Primal step size.
    #[arg(long, default_value_t = SolverParams::default().tau)]
    pub tau: f64,
    /// Extrapolation weight in [0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    /// Residual threshold for stopping.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    /// TGV^2 second-order weight.
    #[arg(long, default_value_t = 1.25)]
    pub beta: f64,
    /// Over-regularisation weight of the ROF step in gamma estimation.
    #[arg(long, default_value_t = 500.0)]
    pub lambda: f64,
    /// Gaussian std (pixels) used to smooth the ROF residual.
    #[arg(long, default_value_t = 2.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub rof_tol: f64,
    #[arg(long, default_value_t = 20_000)]
    pub rof_max_iter: usize,
}

impl SolverArgs {
    pub fn solver(&self) -> SolverParams {
        SolverParams {
            sigma: self.sigma,
            tau: self.tau,
            theta: self.theta,
            tol: self.tol,
            max_iter: self.max_iter,
            record_history: true,
        }
    }

    pub fn tgv(&self) -> TgvParams {
        TgvParams { beta: self.beta }
    }

    pub fn gamma(&self) -> GammaEstimateParams {
        GammaEstimateParams {
            lambda: self.lambda,
            rho: self.rho,
            rof_tol: self.rof_tol,
            rof_max_iter: self.rof_max_iter,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.solver().validate()?;
        self.tgv().validate()?;
        self.gamma().validate()?;
        Ok(())
    }
}

#[derive(Args, Debug)]
pub struct DenoiseArgs {
    /// Noisy image (PNG, PGM or raw).
    #[arg(long)]
    pub input: PathBuf,
    /// Denoised image; format from the extension.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = Regulariser::Tvpwl)]
    pub regulariser: Regulariser,
    #[arg(long, value_enum, default_value_t = GammaSource::OverTv)]
    pub gamma_source: GammaSource,
    /// Gamma field for `--gamma-source file`.
    #[arg(long)]
    pub gamma: Option<PathBuf>,
    /// Clean image, used for `--gamma-source gt`, for delta and for metrics.
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    /// Radius of the fidelity ball.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Noise std; sets delta = std * sqrt(M N) when --delta is absent.
    #[arg(long)]
    pub noise_std: Option<f64>,
    /// JSON report (default: output path with .json extension).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// CSV of (iter, residual, gap).
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long, default_value_t = 255.0)]
    pub peak: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args, Debug)]
pub struct EstimateGammaArgs {
    /// Noisy image (for over-tv).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = GammaSource::OverTv)]
    pub source: GammaSource,
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args, Debug)]
pub struct AddNoiseArgs {
    /// Clean image.
    #[arg(long)]
    pub input: PathBuf,
    /// Noisy image; use .raw to keep unquantised values.
    #[arg(long)]
    pub output: PathBuf,
    /// Noise std as a fraction of the peak value.
    #[arg(long, default_value_t = 0.1)]
    pub noise_level: f64,
    /// Absolute noise std; overrides --noise-level.
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 255.0)]
    pub peak: f64,
    /// JSON file receiving delta and the noise parameters.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchmarkArgs {
    /// Directory of clean grey-scale images.
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    pub images: Option<PathBuf>,
    /// Use the built-in piecewise-affine image instead of a directory.
    #[arg(long)]
    pub synthetic: bool,
    /// Side length of the synthetic image.
    #[arg(long, default_value_t = 256)]
    pub size: usize,
    #[arg(long, num_args = 1.., default_values_t = vec![0.1])]
    pub noise_level: Vec<f64>,
    /// Absolute noise std; overrides --noise-level.
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Global seed, combined with a hash of each image name.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output directory for benchmark.csv and the per-run histories.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Worker threads (default: TVPWL_WORKERS, then the number of CPUs).
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value_t = 255.0)]
    pub peak: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    /// Replace an operator with a known-bad variant (div-sign, prox-branch).
    #[arg(long, hide = true)]
    pub inject_fault: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Denoise(a) => commands::denoise(&a),
        Command::EstimateGamma(a) => commands::estimate_gamma(&a),
        Command::AddNoise(a) => commands::add_noise(&a),
        Command::Benchmark(a) => benchmark::run(&a),
        Command::Check(a) => commands::check(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run `tvpwl --help` for usage");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_IO)
        }
    }
}
