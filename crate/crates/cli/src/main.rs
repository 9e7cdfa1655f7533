//! `seqdet` — train and evaluate learned binary sequential detectors.
//!
//! Subcommands cover the full pipeline: generate or ingest data (`synth`,
//! `har-prepare`), fit a scorer (`train`), and measure sequential-test
//! performance (`eval`, `sweep`, `compare`). Each run takes a flat
//! `key = value` config file plus one flag per key (same spelling, flags
//! win), writes its outputs into `--out`, and drops a `manifest.json` there
//! with the resolved settings so the run can be replayed exactly.
//!
//! Exit codes: 0 success; 2 configuration error (bad flag, unknown or
//! invalid key, missing input); 3 infeasible fit; 4 optimizer stopped on its
//! iteration budget (outputs are still written); 5 file I/O or input parse
//! failure; 6 model/dataset dimension mismatch; 7 evaluation aborted
//! (non-finite score or every trial truncated).

mod commands;
mod config;
mod manifest;

use clap::{Args, Parser, Subcommand};
use seqdet::Error;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "seqdet", version, about = "Sequential detector training and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a labeled two-class dataset from a Gaussian-mixture spec file.
    Synth(SynthArgs),
    /// Convert UCI HAR feature/label files into a labeled dataset CSV.
    HarPrepare(HarPrepareArgs),
    /// Fit a scorer (wkdrf, klfit, or waldboost), with optional CV grids.
    Train(TrainArgs),
    /// Monte Carlo evaluation of one scorer at one target operating point.
    Eval(EvalArgs),
    /// Monte Carlo performance curve of one scorer over a target grid.
    Sweep(SweepArgs),
    /// Performance curves of several scorers under common random numbers.
    Compare(CompareArgs),
}

#[derive(Args)]
#[command(rename_all = "snake_case")]
pub struct SynthArgs {
    /// Flat `key = value` config file; every other flag mirrors a key.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Two-class mixture spec JSON ({"class0": {...}, "class1": {...}}).
    #[arg(long)]
    spec: Option<String>,
    /// Samples to draw for class 0.
    #[arg(long)]
    n0: Option<usize>,
    /// Samples to draw for class 1.
    #[arg(long)]
    n1: Option<usize>,
    /// Root seed for the run.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if absent).
    #[arg(long)]
    out: Option<String>,
    /// Worker-thread cap; 0 uses all cores. Results never depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
#[command(rename_all = "snake_case")]
pub struct HarPrepareArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Whitespace-separated feature matrix (X_train.txt layout).
    #[arg(long)]
    features: Option<String>,
    /// One activity label per line (y_train.txt layout).
    #[arg(long)]
    labels: Option<String>,
    /// Task preset: `moving` (walk/upstairs/downstairs vs rest), `updown`
    /// (upstairs vs downstairs), or `custom`.
    #[arg(long)]
    task: Option<String>,
    /// 1-based feature column indices, comma-separated.
    #[arg(long)]
    feature_indices: Option<String>,
    /// Activity codes mapped to class 1 (custom task), comma-separated.
    #[arg(long)]
    positive: Option<String>,
    /// Activity codes mapped to class 0 (custom task), comma-separated.
    #[arg(long)]
    negative: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
#[command(rename_all = "snake_case")]
pub struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training dataset CSV (`class,f1,...,fd`).
    #[arg(long)]
    data: Option<String>,
    /// One of `wkdrf`, `klfit`, `waldboost`.
    #[arg(long)]
    method: Option<String>,
    /// Kernel bandwidth σ (σ² in the exponent denominator).
    #[arg(long)]
    sigma: Option<f64>,
    /// Ridge weight λ.
    #[arg(long)]
    lambda: Option<f64>,
    /// CV grid over σ, comma-separated; triggers cross-validation.
    #[arg(long)]
    sigma_grid: Option<String>,
    /// CV grid over λ, comma-separated; triggers cross-validation.
    #[arg(long)]
    lambda_grid: Option<String>,
    /// Holdout fraction for cross-validation.
    #[arg(long)]
    holdout_fraction: Option<f64>,
    /// Number of kernel centers drawn from the pooled training data.
    #[arg(long)]
    centers: Option<usize>,
    /// Reuse the kernel centers of a previous run (klfit only): path to a
    /// `centers.json` written by `train`.
    #[arg(long)]
    centers_file: Option<String>,
    /// Target false-alarm probability P_F (wkdrf objective weight).
    #[arg(long)]
    target_pf: Option<f64>,
    /// Target miss probability P_M (wkdrf objective weight).
    #[arg(long)]
    target_pm: Option<f64>,
    /// Prior probability of class 0.
    #[arg(long)]
    prior0: Option<f64>,
    /// Boosting rounds (waldboost).
    #[arg(long)]
    rounds: Option<usize>,
    /// Gradient-descent iteration budget per barrier stage (wkdrf).
    #[arg(long)]
    inner_iters: Option<usize>,
    /// Gradient-ascent iteration budget (klfit).
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
#[command(rename_all = "snake_case")]
pub struct EvalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Synthetic source: two-class mixture spec JSON (exact streams).
    #[arg(long)]
    spec: Option<String>,
    /// Real source: labeled dataset CSV, resampled with replacement per class.
    #[arg(long)]
    data: Option<String>,
    /// Model file from `train` (kernel model or boosted ensemble JSON).
    #[arg(long)]
    model: Option<String>,
    /// Score with the exact log-density-ratio of `spec` instead of a model.
    #[arg(long)]
    oracle: Option<bool>,
    /// Label for this scorer in outputs; defaults to the model file stem.
    #[arg(long)]
    label: Option<String>,
    /// Target false-alarm probability P_F.
    #[arg(long)]
    target_pf: Option<f64>,
    /// Target miss probability P_M.
    #[arg(long)]
    target_pm: Option<f64>,
    /// Prior probability of class 0 (aggregation weight).
    #[arg(long)]
    prior0: Option<f64>,
    /// Monte Carlo trials per class.
    #[arg(long)]
    trials: Option<usize>,
    /// Truncation cap on samples per trial.
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
#[command(rename_all = "snake_case")]
pub struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    spec: Option<String>,
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    oracle: Option<bool>,
    #[arg(long)]
    label: Option<String>,
    /// Target grid, comma-separated; each entry is a symmetric error `e` or
    /// an asymmetric pair `pf:pm`.
    #[arg(long)]
    targets: Option<String>,
    #[arg(long)]
    prior0: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
#[command(rename_all = "snake_case")]
pub struct CompareArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    spec: Option<String>,
    #[arg(long)]
    data: Option<String>,
    /// Model files to compare, comma-separated.
    #[arg(long)]
    models: Option<String>,
    /// Labels for the models, comma-separated, same order; default file stems.
    #[arg(long)]
    labels: Option<String>,
    /// Also include the exact-density oracle of `spec`.
    #[arg(long)]
    oracle: Option<bool>,
    #[arg(long)]
    targets: Option<String>,
    #[arg(long)]
    prior0: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidParameter(_) => 2,
        Error::Infeasible(_) => 3,
        Error::NotConverged(_) => 4,
        Error::Io(_) | Error::Parse { .. } | Error::Json(_) | Error::Csv(_) => 5,
        Error::DimensionMismatch { .. } => 6,
        Error::NonFiniteScore { .. } | Error::AllTruncated { .. } => 7,
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => commands::synth::run(a),
        Command::HarPrepare(a) => commands::har_prepare::run(a),
        Command::Train(a) => commands::train::run(a),
        Command::Eval(a) => commands::run_eval::eval(a),
        Command::Sweep(a) => commands::run_eval::sweep(a),
        Command::Compare(a) => commands::run_eval::compare(a),
    };
    match result {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}
