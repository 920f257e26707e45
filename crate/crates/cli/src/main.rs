//! `prefcomp`: convert ratings to comparisons, train, evaluate, benchmark
//! and run the synthetic scaling experiments.

mod bench;
mod config;
mod convert;
mod eval;
mod experiment;
mod output;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use prefcomp::altsvm::AltSvmConfig;
use prefcomp::{ErrorClass, LossKind};
use serde::Serialize;

pub const GIT_DESCRIBE: &str = env!("PREFCOMP_GIT_DESCRIBE");
pub const WORKERS_ENV: &str = "PREFCOMP_WORKERS";

/// Bad arguments or config values; exit status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "prefcomp", version = GIT_DESCRIBE, args_override_self = true)]
#[command(about = "Collaborative ranking from pairwise comparisons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ratings file to a comparison file, ID maps and a stats sidecar.
    Convert(ConvertArgs),
    /// Fit factors with AltSVM, SGD or the global-ranking baseline.
    Train(TrainArgs),
    /// Score a checkpoint on held-out data.
    Eval(EvalArgs),
    /// Time AltSVM to convergence for several worker counts.
    Bench(BenchArgs),
    /// Synthetic risk-scaling or sign-matrix norm experiment.
    Experiment(ExperimentArgs),
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ConvertArgs {
    /// Read `key=value` options from this file; explicit flags win.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Ratings file (`user item rating [timestamp]`).
    #[arg(long)]
    pub input: PathBuf,
    /// `tsv`, `dat` (double colon) or `auto`.
    #[arg(long, default_value = "auto")]
    pub format: String,
    #[arg(long)]
    pub out: PathBuf,
    /// `none`, `per-user:N` (N training ratings per user) or `holdout:F`.
    #[arg(long, default_value = "none")]
    pub split: String,
    /// Users with fewer than N + min-test ratings are dropped by `per-user:N`.
    #[arg(long, default_value_t = 10)]
    pub min_test: usize,
    /// Keep each user's N comparisons with the largest rating gap.
    #[arg(long, conflicts_with_all = ["uniform", "binarize"])]
    pub largest_gap: Option<usize>,
    /// Keep N uniformly drawn comparisons per user.
    #[arg(long, conflicts_with = "binarize")]
    pub uniform: Option<usize>,
    /// Treat every rating as relevant and draw C (relevant, unrated) pairs per user.
    #[arg(long)]
    pub binarize: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Altsvm,
    Sgd,
    Global,
}

/// AltSVM settings shared by `train` and `bench`.
#[derive(Args, Serialize, Clone)]
#[serde(rename_all = "kebab-case")]
pub struct SolverArgs {
    #[arg(long, default_value_t = 10)]
    pub rank: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// `l2-hinge`, `logistic` or `logistic-mle`.
    #[arg(long, default_value = "l2-hinge")]
    pub loss: String,
    /// Coordinate steps per pass; defaults to the number of comparisons.
    #[arg(long)]
    pub inner_steps: Option<usize>,
    #[arg(long, default_value_t = 50)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Standard deviation of the initial user factors; defaults to 1/sqrt(rank).
    #[arg(long)]
    pub init_scale: Option<f64>,
}

impl SolverArgs {
    pub fn loss(&self) -> anyhow::Result<LossKind> {
        self.loss
            .parse()
            .map_err(|e: prefcomp::Error| UsageError(e.to_string()).into())
    }

    pub fn altsvm(&self, workers: usize) -> anyhow::Result<AltSvmConfig> {
        let config = AltSvmConfig {
            rank: self.rank,
            lambda: self.lambda,
            loss: self.loss()?,
            inner_steps_per_pass: self.inner_steps,
            max_outer_iters: self.max_iters,
            tolerance: self.tolerance,
            workers,
            seed: self.seed,
            init_scale: self.init_scale,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct TrainArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "altsvm")]
    pub algorithm: Algorithm,
    /// Comparison file, or a `convert` output directory.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
    /// Worker threads; falls back to $PREFCOMP_WORKERS, then 1.
    #[arg(long)]
    pub workers: Option<usize>,
    /// SGD step size `alpha0 / (1 + beta0 t)`.
    #[arg(long, default_value_t = 0.01)]
    pub alpha0: f64,
    #[arg(long, default_value_t = 0.001)]
    pub beta0: f64,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    /// SGD only: try alpha0, beta0 over the first N powers of 1/10 and keep
    /// the lowest training objective.
    #[arg(long)]
    pub sweep: Option<usize>,
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct EvalArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Factor checkpoint, or a `train` output directory.
    #[arg(long)]
    pub factors: PathBuf,
    /// A `convert` output directory supplying test/train ratings and ID maps.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub test_ratings: Option<PathBuf>,
    /// Items rated here are excluded from Precision@K rankings.
    #[arg(long)]
    pub train_ratings: Option<PathBuf>,
    /// Comparison file for pairwise accuracy when no test ratings are given.
    #[arg(long)]
    pub test_comparisons: Option<PathBuf>,
    /// Directory holding `users.ids` and `items.ids`.
    #[arg(long)]
    pub ids: Option<PathBuf>,
    /// Any of `pairwise`, `pairwise-restricted`, `ndcg@K`, `precision@K`.
    #[arg(long, value_delimiter = ',', default_value = "pairwise,ndcg@10")]
    pub metrics: Vec<String>,
    /// Minimum rating gap for `pairwise-restricted`.
    #[arg(long, default_value_t = 2.0)]
    pub min_gap: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct BenchArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    pub worker_counts: Vec<usize>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    RiskScaling,
    MNorm,
}

/// Unset values take the experiment's defaults; the resolved values are
/// written with the outputs.
#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ExperimentArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: ExperimentKind,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    // risk-scaling
    #[arg(long)]
    pub d1: Option<usize>,
    #[arg(long)]
    pub d2: Option<usize>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub fit_rank: Option<usize>,
    /// `noise-matched:C` or `fixed:LAMBDA`.
    #[arg(long)]
    pub penalty: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub m_grid: Option<Vec<usize>>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    // m-norm
    #[arg(long, value_delimiter = ',')]
    pub d_grid: Option<Vec<usize>>,
    #[arg(long)]
    pub p_fixed: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub p_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub d_fixed: Option<usize>,
}

/// Explicit value, else `$PREFCOMP_WORKERS`, else 1.
pub fn resolve_workers(flag: Option<usize>) -> anyhow::Result<usize> {
    if let Some(w) = flag {
        return Ok(w);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            UsageError(format!(
                "{WORKERS_ENV} must be a positive integer, got {v:?}"
            ))
            .into()
        }),
        Err(_) => Ok(1),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<prefcomp::Error>() {
            return match e.class() {
                ErrorClass::Usage => 1,
                ErrorClass::Data => 2,
                ErrorClass::Numerical => 3,
            };
        }
    }
    2
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Convert(args) => convert::run(args),
        Command::Train(args) => train::run(args),
        Command::Eval(args) => eval::run(args),
        Command::Bench(args) => bench::run(args),
        Command::Experiment(args) => experiment::run(args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = match config::expand_args(std::env::args_os().collect()) {
        Ok(args) => args,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
