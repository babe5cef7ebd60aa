use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use ubauc::baselines::PAIRWISE_CAP;
use ubauc::online::Shuffle;

#[derive(Parser, Debug)]
#[command(name = "ubauc", version, about = "Train, evaluate and benchmark AUC-optimizing linear models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train one model and write it with its training report.
    Train(TrainArgs),
    /// Repeated subsample → train → test-AUC protocol.
    Eval(EvalArgs),
    /// Hyperparameter search on a validation split of the training data.
    Grid(GridArgs),
    /// Per-pass time and auxiliary memory of the online solver.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    Online,
    Batch,
    PairwiseHinge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShuffleArg {
    PerEpoch,
    None,
    WithReplacement,
}

impl From<ShuffleArg> for Shuffle {
    fn from(s: ShuffleArg) -> Self {
        match s {
            ShuffleArg::PerEpoch => Shuffle::PerEpoch,
            ShuffleArg::None => Shuffle::None,
            ShuffleArg::WithReplacement => Shuffle::WithReplacement,
        }
    }
}

/// Feature preprocessing, fitted on the training part only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    /// Map every feature to [-1, 1] by its training min and max.
    Minmax,
    None,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value_t = Algo::Online)]
    pub algo: Algo,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub gamma: f64,
    /// Step-size scale of the online solver.
    #[arg(long, default_value_t = 0.1)]
    pub eta0: f64,
    /// Passes over the training data (online and pairwise-hinge).
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, value_enum, default_value_t = ShuffleArg::PerEpoch)]
    pub shuffle: ShuffleArg,
    /// Outer iterations of the batch solver.
    #[arg(long, default_value_t = 50)]
    pub max_outer: usize,
    #[arg(long, default_value_t = 1e-7)]
    pub inner_tol: f64,
    #[arg(long, default_value_t = 1e-7)]
    pub outer_tol: f64,
    #[arg(long, default_value_t = 2000)]
    pub inner_max_iters: usize,
    /// Initial step of the pairwise-hinge baseline.
    #[arg(long, default_value_t = 0.5)]
    pub step0: f64,
    #[arg(long, default_value_t = PAIRWISE_CAP)]
    pub pairwise_cap: usize,
}

impl Default for SolverArgs {
    fn default() -> Self {
        SolverArgs {
            algo: Algo::Online,
            beta: 1.0,
            gamma: 1e-4,
            eta0: 0.1,
            epochs: 30,
            shuffle: ShuffleArg::PerEpoch,
            max_outer: 50,
            inner_tol: 1e-7,
            outer_tol: 1e-7,
            inner_max_iters: 2000,
            step0: 0.5,
            pairwise_cap: PAIRWISE_CAP,
        }
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Training data in LIBSVM format (optionally gzipped).
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Scale::Minmax)]
    pub scale: Scale,
    #[arg(long, default_value = "model.json")]
    pub model_out: PathBuf,
    #[arg(long, default_value = "report.json")]
    pub report_out: PathBuf,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// Held-out test data. Without it every repeat tests on the part of the
    /// training data it did not train on.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Hyperparameters from a `grid` best-config file; they override
    /// `--beta`, `--gamma` and `--eta0`.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 25)]
    pub repeats: usize,
    /// Fraction of the training data used by each repeat.
    #[arg(long, default_value_t = 0.8)]
    pub split: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Scale::Minmax)]
    pub scale: Scale,
    #[arg(long, default_value = "eval.json")]
    pub out: PathBuf,
}

pub const DEFAULT_BETAS: &str = "1e-4,1e-3,1e-2,1e-1,1,10,100";
pub const DEFAULT_GAMMAS: &str = "1e-4,1e-3,1e-2,1e-1,1,10,100";
pub const DEFAULT_ETA0S: &str = "1e-3,1e-2,1e-1,1";

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, value_delimiter = ',', default_value = DEFAULT_BETAS)]
    pub betas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = DEFAULT_GAMMAS)]
    pub gammas: Vec<f64>,
    /// Only searched for the online solver.
    #[arg(long, value_delimiter = ',', default_value = DEFAULT_ETA0S)]
    pub eta0s: Vec<f64>,
    /// Fraction of the training data kept for fitting; the rest validates.
    #[arg(long, default_value_t = 0.8)]
    pub val_split: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Scale::Minmax)]
    pub scale: Scale,
    #[arg(long, default_value = "grid.csv")]
    pub csv_out: PathBuf,
    #[arg(long, default_value = "best.json")]
    pub best_out: PathBuf,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchArgs {
    /// Synthetic spec `N:d:density` (repeatable).
    #[arg(long)]
    pub synthetic: Vec<String>,
    /// LIBSVM dataset (repeatable).
    #[arg(long)]
    pub data: Vec<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.01)]
    pub eta0: f64,
    /// Minimum timed passes per measurement.
    #[arg(long, default_value_t = 3)]
    pub passes: usize,
    /// Minimum seconds per measurement; more passes are run if needed.
    #[arg(long, default_value_t = 0.2)]
    pub min_time: f64,
    /// Measurements per dataset; the fastest is reported.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "bench.csv")]
    pub out: PathBuf,
}
