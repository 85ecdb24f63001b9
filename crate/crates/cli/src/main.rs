//! `blockbeta` command-line front end.
//!
//! Exit codes: 0 pass, 1 statistical failure, 2 usage or validation error,
//! 3 numerical degeneracy (flag rates exceeded).

mod commands;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "blockbeta", version, about = "Random block tridiagonal beta ensembles")]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "BLOCKBETA_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample spectra (or block matrices) from an ensemble.
    Sample(SampleArgs),
    /// Check an exact identity on random rational points.
    Verify(VerifyArgs),
    /// Ensemble eigenvalues against MCMC draws from the closed-form density.
    DensityTest(DensityArgs),
    /// Monte-Carlo moment of |det M|^{βs}.
    Moment(MomentArgs),
    /// Soft-edge CDF tables and cross-estimator checks.
    SoftEdge(EdgeArgs),
    /// Hard-edge CDF tables and cross-estimator checks.
    HardEdge(EdgeArgs),
    /// Semicircle check of the empirical spectral distribution.
    Dos(DosArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum FamilyArg {
    Hermite,
    Laguerre,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SampleArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long)]
    beta: u32,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    r: usize,
    #[arg(long, allow_negative_numbers = true)]
    s: f64,
    /// Laguerre parameter.
    #[arg(long)]
    m: Option<f64>,
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Write the block matrices as JSON instead of spectra (Hermite only).
    #[arg(long)]
    matrices: bool,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    /// Identity name, or `conjecture`.
    #[arg(long)]
    id: String,
    /// Subset size `n` (or overlap-conjecture size).
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Cycle length for `cauchy-cycle`; overrides `--n`.
    #[arg(long)]
    k: Option<usize>,
    /// Block size for `detm-expansion`.
    #[arg(long, default_value_t = 2)]
    r: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Reading of the overlap conjecture.
    #[arg(long, value_enum, default_value_t = ConjectureArg::SinglePower)]
    form: ConjectureArg,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum ConjectureArg {
    Printed,
    SinglePower,
}

#[derive(Args, Debug, Clone)]
pub struct DensityArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long)]
    beta: u32,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    r: usize,
    #[arg(long, allow_negative_numbers = true)]
    s: f64,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long, default_value_t = 199)]
    perms: usize,
    /// MCMC chains; each contributes `per_chain` samples.
    #[arg(long, default_value_t = 500)]
    chains: usize,
    #[arg(long, default_value_t = 20)]
    per_chain: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum ModeArg {
    Haar,
    Gaussian,
}

#[derive(Args, Debug, Clone)]
pub struct MomentArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    r: usize,
    #[arg(long)]
    beta: u32,
    /// Exponent `βs`.
    #[arg(long = "exp")]
    exponent: f64,
    #[arg(long = "N", default_value_t = 100_000)]
    samples: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Gaussian)]
    mode: ModeArg,
    /// Comma-separated spectrum of length rn; default 0, 1, …, rn−1.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambda: Option<Vec<f64>>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum EdgeMode {
    Cdf,
    CrossCheck,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum InteractionArg {
    Ito,
    Printed,
}

#[derive(Args, Debug, Clone)]
pub struct EdgeArgs {
    #[arg(long, value_enum, default_value_t = EdgeMode::Cdf)]
    mode: EdgeMode,
    #[arg(long)]
    r: usize,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    s: f64,
    /// Hard-edge parameter `a` with `m = n + a` (ignored at the soft edge).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    a: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambdas: Option<Vec<f64>>,
    /// Number of lowest levels in a CDF table.
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 4000)]
    paths: usize,
    #[arg(long, value_enum, default_value_t = InteractionArg::Ito)]
    interaction: InteractionArg,
    /// Deterministic (noise-free) limit.
    #[arg(long)]
    noise_off: bool,
    #[arg(long, default_value_t = 2000)]
    operator_draws: usize,
    #[arg(long, default_value_t = 2000)]
    ensemble_draws: usize,
    #[arg(long, default_value_t = 400)]
    rn: usize,
    /// Operator grid step (default 0.02 soft, 0.01 hard).
    #[arg(long)]
    h: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct DosArgs {
    #[arg(long)]
    r: usize,
    #[arg(long, allow_negative_numbers = true)]
    s: f64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    beta: u32,
    #[arg(long, default_value_t = 20)]
    draws: usize,
    #[command(flatten)]
    common: Common,
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
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let res = match &cli.command {
        Command::Sample(a) => commands::sample(a),
        Command::Verify(a) => commands::verify(a),
        Command::DensityTest(a) => commands::density_test(a),
        Command::Moment(a) => commands::moment(a),
        Command::SoftEdge(a) => commands::soft_edge(a),
        Command::HardEdge(a) => commands::hard_edge(a),
        Command::Dos(a) => commands::dos(a),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
