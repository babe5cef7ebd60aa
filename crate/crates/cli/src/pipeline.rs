//! Shared steps of the commands: loading, label mapping, scaling, fitting.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use ubauc::baselines::{train_pairwise_hinge_batch, PairwiseConfig};
use ubauc::batch::{train_batch, BatchConfig};
use ubauc::dataset::{class_partition, load_libsvm, LabelPartition, ScalingParams};
use ubauc::metrics::{auc, has_ties, score_dataset};
use ubauc::online::{train_online, OnlineConfig};
use ubauc::report::TrainReport;
use ubauc::{Dataset, LinearModel, Objective};

use crate::args::{Algo, Scale, SolverArgs};
use crate::failure::{CliResult, Failure};

pub fn load(path: &Path) -> CliResult<Dataset> {
    Ok(load_libsvm(path)?)
}

/// Label mapping used by every command: `{-1, +1}` is kept, two other labels
/// map the larger one to `+1`, more labels are split at random by `seed`.
pub fn label_partition(ds: &Dataset, seed: u64) -> CliResult<LabelPartition> {
    let labels = ds.distinct_labels();
    if labels.len() == 2 {
        return Ok(LabelPartition {
            positive: vec![labels[1]],
            negative: vec![labels[0]],
        });
    }
    Ok(class_partition(ds, seed)?)
}

/// Binarizes `train` (and `test` with the same partition) and pads both to
/// a common dimension.
pub fn align(
    train: Dataset,
    test: Option<Dataset>,
    seed: u64,
) -> CliResult<(Dataset, Option<Dataset>, LabelPartition)> {
    let partition = label_partition(&train, seed)?;
    let dim = train.dim().max(test.as_ref().map_or(0, Dataset::dim));
    let train = partition.apply(&train)?.with_dim(dim)?;
    let test = match test {
        Some(t) => Some(partition.apply(&t)?.with_dim(dim)?),
        None => None,
    };
    Ok((train, test, partition))
}

/// Fits scaling on `train` and applies it to both parts.
pub fn scale(
    mode: Scale,
    train: &Dataset,
    others: &[&Dataset],
) -> CliResult<(Dataset, Vec<Dataset>, Option<ScalingParams>)> {
    match mode {
        Scale::None => Ok((train.clone(), others.iter().map(|d| (*d).clone()).collect(), None)),
        Scale::Minmax => {
            let params = ScalingParams::fit(train)?;
            let scaled = params.apply(train)?;
            let rest = others.iter().map(|d| params.apply(d)).collect::<Result<Vec<_>, _>>()?;
            Ok((scaled, rest, Some(params)))
        }
    }
}

pub struct Fitted {
    pub model: LinearModel,
    pub report: TrainReport,
    pub seconds: f64,
    /// Passes (online, pairwise) or outer iterations (batch) performed.
    pub passes: usize,
}

impl Fitted {
    pub fn time_per_pass(&self) -> f64 {
        self.seconds / self.passes.max(1) as f64
    }
}

pub fn fit(solver: &SolverArgs, seed: u64, ds: &Dataset) -> CliResult<Fitted> {
    let objective = Objective::new(solver.beta, solver.gamma);
    let start = Instant::now();
    let (model, report) = match solver.algo {
        Algo::Online => {
            let cfg = OnlineConfig {
                shuffle: solver.shuffle.into(),
                ..OnlineConfig::new(objective, solver.eta0, solver.epochs, seed)
            };
            train_online(ds, &cfg)?
        }
        Algo::Batch => {
            let cfg = BatchConfig {
                objective,
                max_outer_iters: solver.max_outer,
                inner_tol: solver.inner_tol,
                outer_tol: solver.outer_tol,
                inner_max_iters: solver.inner_max_iters,
            };
            train_batch(ds, &cfg, None)?
        }
        Algo::PairwiseHinge => {
            let cfg = PairwiseConfig {
                gamma: solver.gamma,
                epochs: solver.epochs,
                step0: solver.step0,
                seed,
                cap: solver.pairwise_cap,
            };
            train_pairwise_hinge_batch(ds, &cfg)?
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    let passes = match solver.algo {
        Algo::Batch => report.trajectory.len().saturating_sub(1),
        _ => solver.epochs,
    };
    Ok(Fitted {
        model,
        report,
        seconds,
        passes,
    })
}

/// AUC of `model` on `ds` (ties count one half) and whether ties occurred.
pub fn test_auc(model: &LinearModel, ds: &Dataset) -> CliResult<(f64, bool)> {
    let samples = score_dataset(model, ds)?;
    Ok((auc(&samples)?, has_ties(&samples)))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    ensure_parent(path)?;
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::io(path, e))?;
    fs::write(path, text + "\n").map_err(|e| Failure::io(path, e))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| Failure::io(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| Failure::io(path, e))?;
    }
    w.flush().map_err(|e| Failure::io(path, e))
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))
        }
        _ => Ok(()),
    }
}

/// Thread pool for independent repeats, capped by `UBAUC_THREADS`.
pub fn pool() -> CliResult<rayon::ThreadPool> {
    let threads = match std::env::var("UBAUC_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Failure::usage(format!("UBAUC_THREADS must be a positive integer, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::runtime(format!("could not start thread pool: {e}")))
}
