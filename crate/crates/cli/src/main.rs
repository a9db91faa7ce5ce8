//! `permgap`: command-line driver for the random bistochastic chain toolkit.
//!
//! Exit status: 0 on success, 1 on invalid input, 2 on I/O failure, 3 when a
//! solver did not converge (the report is still written).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use permgap::rng::DEFAULT_SEED;
use permgap::{Error, Method};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "permgap",
    version,
    about = "Spectral gaps of random bistochastic chains P = MQ"
)]
struct Cli {
    /// Worker threads for parallel experiments (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build Q from a model and write it as Matrix Market.
    Gen(GenArgs),
    /// Norms of Q: hs, linf, relaxed norm, d and rho.
    Norms(NormsArgs),
    /// All eigenvalues of Q or of P = MQ, as CSV.
    Spectrum(SpectrumArgs),
    /// |lambda_2| of P = MQ.
    Lambda2(Lambda2Args),
    /// Certify that (M, Q) is ell-tangle-free, or print a tangled path.
    Tangle(TangleArgs),
    /// Exact path sums and the decomposition checks (small n only).
    Decompose(TangleArgs),
    /// Monte Carlo trials from a JSON experiment config.
    Montecarlo(MonteCarloArgs),
    /// |lambda_2| over permutations of the shuffle-fold chain.
    Foldmix(FoldmixArgs),
    /// Eigenvalues of one 2x2-block chain (CSV) and a JSON sidecar.
    Fig1(Fig1Args),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum ModelName {
    Fig1,
    UniformRegular,
    ShuffleFold,
}

#[derive(Debug, Args, Serialize)]
struct GenArgs {
    /// Model spec as a JSON file; overrides --model.
    #[arg(long, conflicts_with = "model")]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, required_unless_present = "spec")]
    model: Option<ModelName>,
    #[arg(long)]
    n: Option<usize>,
    /// Weight of the diagonal in each 2x2 block (fig1).
    #[arg(long)]
    p: Option<f64>,
    /// Row support (uniform-regular, shuffle-fold).
    #[arg(long)]
    r: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output file; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct NormsArgs {
    /// Matrix Market file holding Q.
    #[arg(long)]
    q: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ChainArgs {
    /// Matrix Market file holding Q.
    #[arg(long)]
    q: PathBuf,
    /// `id`, `random` (drawn from --seed) or a permutation file.
    #[arg(long, default_value = "id")]
    sigma: String,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Debug, Args, Serialize)]
struct SpectrumArgs {
    /// Matrix Market file holding Q.
    #[arg(long)]
    q: PathBuf,
    /// Spectrum of MQ instead of Q: `id`, `random` or a permutation file.
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = permgap::spectral::DEFAULT_DENSE_CAP)]
    dense_cap: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct Lambda2Args {
    #[command(flatten)]
    #[serde(flatten)]
    chain: ChainArgs,
    #[arg(long, value_parser = parse_method, default_value = "dense")]
    method: Method,
    #[arg(long, default_value_t = permgap::spectral::DEFAULT_DENSE_CAP)]
    dense_cap: usize,
    /// Krylov subspace dimension.
    #[arg(long, default_value_t = 40)]
    subspace: usize,
    /// Krylov restart cycles.
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    /// Krylov residual tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct TangleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    chain: ChainArgs,
    #[arg(long, default_value_t = 2)]
    ell: usize,
    /// Gram-graph radius; default ceil(20 sqrt(ln n)).
    #[arg(long)]
    h: Option<usize>,
    /// Exceptional set, 1-based indices; default: the witness of the relaxed
    /// norm at --delta.
    #[arg(long = "E-file")]
    #[serde(rename = "E_file")]
    e_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct MonteCarloArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum FoldModeName {
    Exhaustive,
    Sampled,
}

#[derive(Debug, Args, Serialize)]
struct FoldmixArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    r: usize,
    #[arg(long, value_enum, default_value = "exhaustive")]
    mode: FoldModeName,
    /// Sampled mode only.
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct Fig1Args {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output stem: writes STEM.csv and STEM.json.
    #[arg(long, default_value = "fig1")]
    out: PathBuf,
}

fn parse_method(s: &str) -> Result<Method, String> {
    match s {
        "dense" => Ok(Method::Dense),
        "krylov" => Ok(Method::Krylov),
        _ => Err(format!("expected `dense` or `krylov`, got `{s}`")),
    }
}

/// What a command ended with, short of an error.
enum Outcome {
    Done,
    NotConverged,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 2,
        Error::NoConvergence => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let res = match &cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Norms(a) => commands::norms(a),
        Command::Spectrum(a) => commands::spectrum(a),
        Command::Lambda2(a) => commands::lambda2(a),
        Command::Tangle(a) => commands::tangle(a),
        Command::Decompose(a) => commands::decompose(a),
        Command::Montecarlo(a) => commands::montecarlo(a),
        Command::Foldmix(a) => commands::foldmix(a),
        Command::Fig1(a) => commands::fig1(a),
    };
    match res {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => {
            eprintln!("warning: solver did not converge");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
