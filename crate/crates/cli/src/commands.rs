use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use ubauc::dataset::{holdout_split, subsample_split, LabelPartition, ScalingParams};
use ubauc::online::{consume_stream, OnlineConfig, OnlineState, Shuffle};
use ubauc::report::TrainReport;
use ubauc::synthetic::random_linear;
use ubauc::{Dataset, Objective};

use crate::alloc::peak_bytes_during;
use crate::args::{Algo, BenchArgs, EvalArgs, GridArgs, SolverArgs, TrainArgs};
use crate::failure::{CliResult, Failure};
use crate::pipeline::{align, fit, load, pool, scale, test_auc, write_csv, write_json};

#[derive(Debug, Serialize, Deserialize)]
pub struct TrainOutput {
    pub config: TrainArgs,
    pub train: TrainReport,
    pub train_auc: f64,
    pub wall_time_seconds: f64,
    pub labels: LabelPartition,
    pub scaling: Option<ScalingParams>,
}

pub fn cmd_train(args: &TrainArgs) -> CliResult<TrainOutput> {
    let (train, _, labels) = align(load(&args.data)?, None, args.seed)?;
    let (train, _, scaling) = scale(args.scale, &train, &[])?;
    let fitted = fit(&args.solver, args.seed, &train)?;
    let (train_auc, _) = test_auc(&fitted.model, &train)?;
    write_json(&args.model_out, &fitted.model)?;
    let out = TrainOutput {
        config: args.clone(),
        train: fitted.report,
        train_auc,
        wall_time_seconds: fitted.seconds,
        labels,
        scaling,
    };
    write_json(&args.report_out, &out)?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatOutcome {
    pub repeat: usize,
    pub seed: u64,
    pub auc: f64,
    pub loss_final: f64,
    pub ties: bool,
    pub wall_time_per_pass: f64,
    pub warnings: Vec<String>,
}

/// Mean ± sample standard deviation of the test AUC over the repeats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc: f64,
    pub auc_std: f64,
    /// Mean final training objective.
    pub loss_final: f64,
    /// Mean seconds per pass (online, pairwise) or outer iteration (batch).
    /// The only field that varies between identical runs.
    pub wall_time_per_pass: f64,
    pub repeats: usize,
    pub tie_flag: bool,
    pub per_repeat: Vec<RepeatOutcome>,
    pub config: EvalArgs,
}

/// Hyperparameters read back from a `grid` best-config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub beta: f64,
    pub gamma: f64,
    pub eta0: Option<f64>,
}

pub fn read_params(path: &Path) -> CliResult<Params> {
    let text = fs::read_to_string(path).map_err(|e| Failure {
        kind: crate::failure::Kind::Input,
        message: format!("{}: {e}", path.display()),
    })?;
    serde_json::from_str(&text).map_err(|e| Failure {
        kind: crate::failure::Kind::Input,
        message: format!("{}: {e}", path.display()),
    })
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n.max(1) as f64
}

pub fn cmd_eval(args: &EvalArgs) -> CliResult<EvalReport> {
    if args.repeats == 0 {
        return Err(Failure::usage("--repeats must be >= 1"));
    }
    let mut resolved = args.clone();
    if let Some(path) = &args.params {
        let p = read_params(path)?;
        resolved.solver.beta = p.beta;
        resolved.solver.gamma = p.gamma;
        if let Some(eta0) = p.eta0 {
            resolved.solver.eta0 = eta0;
        }
    }
    let test = match &args.test {
        Some(p) => Some(load(p)?),
        None => None,
    };
    let (train, test, _) = align(load(&args.train)?, test, args.seed)?;

    let run = |r: usize| -> CliResult<RepeatOutcome> {
        let seed = args.seed + r as u64;
        let (tr, te) = match &test {
            Some(t) => (subsample_split(&train, args.split, seed)?, t.clone()),
            None => holdout_split(&train, args.split, seed)?,
        };
        let (tr, rest, _) = scale(args.scale, &tr, &[&te])?;
        let fitted = fit(&resolved.solver, seed, &tr)?;
        let (auc, ties) = test_auc(&fitted.model, &rest[0])?;
        Ok(RepeatOutcome {
            repeat: r,
            seed,
            auc,
            loss_final: fitted.report.final_objective().unwrap_or(f64::NAN),
            ties,
            wall_time_per_pass: fitted.time_per_pass(),
            warnings: fitted.report.warnings,
        })
    };
    let outcomes: Vec<RepeatOutcome> = pool()?
        .install(|| (0..args.repeats).into_par_iter().map(run).collect::<Vec<_>>())
        .into_iter()
        .collect::<CliResult<_>>()?;

    let auc_mean = mean(outcomes.iter().map(|o| o.auc));
    let auc_std = if outcomes.len() > 1 {
        let ss: f64 = outcomes.iter().map(|o| (o.auc - auc_mean).powi(2)).sum();
        (ss / (outcomes.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    let report = EvalReport {
        auc: auc_mean,
        auc_std,
        loss_final: mean(outcomes.iter().map(|o| o.loss_final)),
        wall_time_per_pass: mean(outcomes.iter().map(|o| o.wall_time_per_pass)),
        repeats: outcomes.len(),
        tie_flag: outcomes.iter().any(|o| o.ties),
        per_repeat: outcomes,
        config: resolved,
    };
    write_json(&args.out, &report)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub beta: Option<f64>,
    pub gamma: f64,
    pub eta0: Option<f64>,
    pub val_auc: f64,
    pub loss_final: f64,
    pub status: String,
    pub best: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridBest {
    pub algo: Algo,
    pub beta: f64,
    pub gamma: f64,
    pub eta0: Option<f64>,
    pub val_auc: f64,
    pub config: GridArgs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridOutput {
    pub rows: Vec<GridRow>,
    pub best: GridBest,
}

/// Grid points as `(beta, gamma, eta0)`; axes a solver ignores collapse.
fn grid_points(args: &GridArgs) -> Vec<(Option<f64>, f64, Option<f64>)> {
    let betas: Vec<Option<f64>> = match args.solver.algo {
        Algo::PairwiseHinge => vec![None],
        _ => args.betas.iter().copied().map(Some).collect(),
    };
    let eta0s: Vec<Option<f64>> = match args.solver.algo {
        Algo::Online => args.eta0s.iter().copied().map(Some).collect(),
        _ => vec![None],
    };
    let mut points = Vec::new();
    for &b in &betas {
        for &g in &args.gammas {
            for &e in &eta0s {
                points.push((b, g, e));
            }
        }
    }
    points
}

/// Highest validation AUC; ties go to the smaller `γ`, then `β`, then `η₀`.
pub fn select_best(rows: &[GridRow]) -> Option<usize> {
    let key = |r: &GridRow| (r.gamma, r.beta.unwrap_or(0.0), r.eta0.unwrap_or(0.0));
    (0..rows.len())
        .filter(|&i| rows[i].status == "ok" && rows[i].val_auc.is_finite())
        .min_by(|&i, &j| {
            let (a, b) = (&rows[i], &rows[j]);
            b.val_auc
                .total_cmp(&a.val_auc)
                .then_with(|| {
                    let (ka, kb) = (key(a), key(b));
                    ka.0.total_cmp(&kb.0)
                        .then(ka.1.total_cmp(&kb.1))
                        .then(ka.2.total_cmp(&kb.2))
                })
        })
}

pub fn cmd_grid(args: &GridArgs) -> CliResult<GridOutput> {
    let points = grid_points(args);
    if points.is_empty() {
        return Err(Failure::usage("the grid is empty"));
    }
    let (full, _, _) = align(load(&args.train)?, None, args.seed)?;
    let (fit_part, val_part) = holdout_split(&full, args.val_split, args.seed)?;
    let (fit_part, rest, _) = scale(args.scale, &fit_part, &[&val_part])?;
    let val_part = &rest[0];

    let evaluate = |&(beta, gamma, eta0): &(Option<f64>, f64, Option<f64>)| -> CliResult<GridRow> {
        let solver = SolverArgs {
            beta: beta.unwrap_or(args.solver.beta),
            gamma,
            eta0: eta0.unwrap_or(args.solver.eta0),
            ..args.solver.clone()
        };
        let row = |val_auc, loss_final, status: String| GridRow {
            beta,
            gamma,
            eta0,
            val_auc,
            loss_final,
            status,
            best: false,
        };
        match fit(&solver, args.seed, &fit_part) {
            Ok(f) => {
                let (val_auc, _) = test_auc(&f.model, val_part)?;
                Ok(row(val_auc, f.report.final_objective().unwrap_or(f64::NAN), "ok".into()))
            }
            Err(e) if e.exit_code() == crate::failure::EXIT_RUNTIME => {
                Ok(row(f64::NAN, f64::NAN, format!("failed: {}", e.message)))
            }
            Err(e) => Err(e),
        }
    };
    let mut rows: Vec<GridRow> = pool()?
        .install(|| points.par_iter().map(evaluate).collect::<Vec<_>>())
        .into_iter()
        .collect::<CliResult<_>>()?;
    let best = select_best(&rows).ok_or_else(|| Failure::runtime("every grid point failed"))?;
    rows[best].best = true;
    let b = &rows[best];
    let best = GridBest {
        algo: args.solver.algo,
        beta: b.beta.unwrap_or(args.solver.beta),
        gamma: b.gamma,
        eta0: b.eta0,
        val_auc: b.val_auc,
        config: args.clone(),
    };
    write_csv(&args.csv_out, &rows)?;
    write_json(&args.best_out, &best)?;
    Ok(GridOutput { rows, best })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub dataset: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub d: usize,
    pub time_per_pass: f64,
    pub peak_aux_bytes: usize,
}

fn parse_synthetic(spec: &str) -> CliResult<(usize, usize, f64)> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Failure::usage(format!("synthetic spec must be N:d:density, got {spec:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let n = parts[0].parse::<f64>().map_err(|_| bad())? as usize;
    let d = parts[1].parse::<f64>().map_err(|_| bad())? as usize;
    let density = parts[2].parse::<f64>().map_err(|_| bad())?;
    if n < 2 || d == 0 || !(density > 0.0 && density <= 1.0) {
        return Err(bad());
    }
    Ok((n, d, density))
}

/// Times online passes over `ds` in dataset order with no trajectory
/// logging. `peak_aux_bytes` is the solver's heap high-water mark beyond the
/// dataset itself.
pub fn bench_dataset(name: &str, ds: &Dataset, args: &BenchArgs) -> CliResult<BenchRow> {
    let cfg = OnlineConfig {
        shuffle: Shuffle::None,
        log_trajectory: false,
        ..OnlineConfig::new(Objective::new(args.beta, args.gamma), args.eta0, 1, args.seed)
    };
    cfg.validate()?;
    let examples = ds.examples();
    let (best, peak) = peak_bytes_during(|| -> CliResult<f64> {
        let mut state = OnlineState::new(ds.dim());
        consume_stream(&mut state, examples, &cfg)?;
        let mut best = f64::INFINITY;
        for _ in 0..args.repeats.max(1) {
            let start = Instant::now();
            let mut passes = 0usize;
            while passes < args.passes.max(1) || start.elapsed().as_secs_f64() < args.min_time {
                consume_stream(&mut state, examples, &cfg)?;
                passes += 1;
            }
            best = best.min(start.elapsed().as_secs_f64() / passes as f64);
        }
        Ok(best)
    });
    Ok(BenchRow {
        dataset: name.to_string(),
        n: ds.len(),
        d: ds.dim(),
        time_per_pass: best?,
        peak_aux_bytes: peak,
    })
}

pub fn cmd_bench(args: &BenchArgs) -> CliResult<Vec<BenchRow>> {
    if args.synthetic.is_empty() && args.data.is_empty() {
        return Err(Failure::usage("give at least one --synthetic spec or --data file"));
    }
    let mut rows = Vec::new();
    for spec in &args.synthetic {
        let (n, d, density) = parse_synthetic(spec)?;
        let ds = random_linear(n, d, density, args.seed);
        rows.push(bench_dataset(&format!("synthetic:{spec}"), &ds, args)?);
    }
    for path in &args.data {
        let (ds, _, _) = align(load(path)?, None, args.seed)?;
        rows.push(bench_dataset(&dataset_name(path), &ds, args)?);
    }
    write_csv(&args.out, &rows)?;
    Ok(rows)
}

fn dataset_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| PathBuf::from(path).display().to_string())
}
