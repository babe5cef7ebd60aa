//! Pairwise AUC surrogates and the linear SVM objective, used as reference
//! points for the univariate surrogate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{auc_risk, class_counts, score_dataset, ScoredSample, TiePolicy};
use crate::model::{LinearModel, Objective};
use crate::report::{TrainReport, TrajectoryPoint};
use crate::surrogate::hinge;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairwiseLossKind {
    /// `[1 − (c⁺ − c⁻)]₊`
    Hinge,
    /// `[1 − (c⁺ − c⁻)]₊²`
    SquaredHinge,
    /// `exp(c⁻ − c⁺)`
    RankBoost,
}

impl PairwiseLossKind {
    /// Loss of a (positive score, negative score) pair.
    pub fn loss(self, pos: f64, neg: f64) -> f64 {
        match self {
            PairwiseLossKind::Hinge => hinge(1.0 - (pos - neg)),
            PairwiseLossKind::SquaredHinge => hinge(1.0 - (pos - neg)).powi(2),
            PairwiseLossKind::RankBoost => (neg - pos).exp(),
        }
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Mean pairwise loss over all (positive, negative) pairs.
///
/// The hinge kinds loop over every pair. The rank-boost sum factorizes as
/// `(Σ_j e^{c_j})(Σ_i e^{−c_i})` and is evaluated in log space; a result that
/// still overflows is reported as an error.
pub fn pairwise_surrogate_risk(samples: &[ScoredSample], kind: PairwiseLossKind) -> Result<f64> {
    let (n_pos, n_neg) = class_counts(samples)?;
    let pairs = n_pos as f64 * n_neg as f64;
    let pos = samples.iter().filter(|s| s.positive).map(|s| s.score);
    let neg = samples.iter().filter(|s| !s.positive).map(|s| s.score);
    let risk = match kind {
        PairwiseLossKind::RankBoost => {
            let log_total = log_sum_exp(neg) + log_sum_exp(pos.map(|c| -c)) - pairs.ln();
            log_total.exp()
        }
        _ => {
            let mut total = 0.0;
            for p in pos {
                for n in neg.clone() {
                    total += kind.loss(p, n);
                }
            }
            total / pairs
        }
    };
    if !risk.is_finite() {
        return Err(Error::NonFinite(format!("{kind:?} pairwise risk overflowed")));
    }
    Ok(risk)
}

/// `Σ_i [1 + y_i(λ − w·x_i)]₊`
pub fn svm_objective(model: &LinearModel, ds: &Dataset) -> Result<f64> {
    model.check_dim(ds)?;
    ds.require_binary()?;
    Ok(ds
        .examples()
        .iter()
        .map(|ex| hinge(1.0 + ex.sign() * (model.threshold - model.score(&ex.features))))
        .sum())
}

/// Default limit on the training-set size for the pairwise trainer.
pub const PAIRWISE_CAP: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseConfig {
    pub gamma: f64,
    pub epochs: usize,
    pub step0: f64,
    pub seed: u64,
    pub cap: usize,
}

impl Default for PairwiseConfig {
    fn default() -> Self {
        PairwiseConfig {
            gamma: 1e-3,
            epochs: 200,
            step0: 0.5,
            seed: 0,
            cap: PAIRWISE_CAP,
        }
    }
}

/// Pairwise hinge risk and its subgradient coefficients from sorted scores.
///
/// For each positive `i`, `pos_coef[i]` counts the negatives with
/// `c_j > c_i − 1` (active pairs); `neg_coef[j]` counts the positives with
/// `c_i < c_j + 1`. The subgradient of the mean risk with respect to `w` is
/// `−(Σ_i pos_coef_i x_i − Σ_j neg_coef_j x_j) / (N⁺N⁻)`.
struct PairwiseHinge {
    risk: f64,
    pos_coef: Vec<f64>,
    neg_coef: Vec<f64>,
}

fn pairwise_hinge_sorted(pos: &[f64], neg: &[f64]) -> PairwiseHinge {
    let mut neg_sorted = neg.to_vec();
    neg_sorted.sort_by(f64::total_cmp);
    let mut pos_sorted = pos.to_vec();
    pos_sorted.sort_by(f64::total_cmp);
    // suffix[k] = Σ neg_sorted[k..]
    let mut suffix = vec![0.0; neg_sorted.len() + 1];
    for k in (0..neg_sorted.len()).rev() {
        suffix[k] = suffix[k + 1] + neg_sorted[k];
    }
    let mut total = 0.0;
    let pos_coef = pos
        .iter()
        .map(|&c| {
            let first = neg_sorted.partition_point(|&v| v <= c - 1.0);
            let active = (neg_sorted.len() - first) as f64;
            total += active * (1.0 - c) + suffix[first];
            active
        })
        .collect();
    let neg_coef = neg
        .iter()
        .map(|&c| pos_sorted.partition_point(|&v| v < c + 1.0) as f64)
        .collect();
    PairwiseHinge {
        risk: total / (pos.len() as f64 * neg.len() as f64),
        pos_coef,
        neg_coef,
    }
}

/// Full-batch subgradient descent on `(γ/2)‖w‖² + mean pairwise hinge risk`.
///
/// Each epoch costs `O(N log N + nnz)` through the sorted-count form of the
/// subgradient. The best iterate by objective is returned. The pairwise risk
/// does not involve a threshold, so the returned model has `λ = 0`.
pub fn train_pairwise_hinge_batch(
    ds: &Dataset,
    cfg: &PairwiseConfig,
) -> Result<(LinearModel, TrainReport)> {
    ds.require_both_classes()?;
    if ds.len() > cfg.cap {
        return Err(Error::CapExceeded {
            n: ds.len(),
            cap: cfg.cap,
        });
    }
    if !(cfg.gamma.is_finite() && cfg.gamma >= 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be >= 0, got {}", cfg.gamma)));
    }
    if !(cfg.step0.is_finite() && cfg.step0 > 0.0) || cfg.epochs == 0 {
        return Err(Error::InvalidArgument(
            "step0 must be > 0 and epochs >= 1".into(),
        ));
    }

    let dim = ds.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = Normal::new(0.0, 1e-2).expect("valid normal");
    let mut model = LinearModel {
        weights: (0..dim).map(|_| init.sample(&mut rng)).collect(),
        threshold: 0.0,
    };
    let pairs = ds.n_pos() as f64 * ds.n_neg() as f64;
    let mut report = TrainReport::new("pairwise_hinge", Objective::new(0.0, cfg.gamma));

    let evaluate = |m: &LinearModel| -> (f64, PairwiseHinge, Vec<ScoredSample>) {
        let samples = score_dataset(m, ds).expect("dimension checked");
        let pos: Vec<f64> = samples.iter().filter(|s| s.positive).map(|s| s.score).collect();
        let neg: Vec<f64> = samples.iter().filter(|s| !s.positive).map(|s| s.score).collect();
        let h = pairwise_hinge_sorted(&pos, &neg);
        (0.5 * cfg.gamma * m.squared_norm() + h.risk, h, samples)
    };

    let (mut value, mut state, _) = evaluate(&model);
    let mut best = (value, model.clone());
    for epoch in 1..=cfg.epochs {
        let mut grad: Vec<f64> = model.weights.iter().map(|w| cfg.gamma * w).collect();
        let (mut pi, mut ni) = (0, 0);
        for ex in ds.examples() {
            if ex.label == 1 {
                ex.features.axpy(-state.pos_coef[pi] / pairs, &mut grad);
                pi += 1;
            } else {
                ex.features.axpy(state.neg_coef[ni] / pairs, &mut grad);
                ni += 1;
            }
        }
        let step = cfg.step0 / (epoch as f64).sqrt();
        for (w, g) in model.weights.iter_mut().zip(&grad) {
            *w -= step * g;
        }
        if !model.is_finite() {
            return Err(Error::Divergence {
                step: epoch as u64,
                reason: "non-finite weights in pairwise trainer".into(),
                last_finite: Box::new(best.1),
            });
        }
        let (v, s, samples) = evaluate(&model);
        value = v;
        state = s;
        if value < best.0 {
            best = (value, model.clone());
        }
        report.steps = epoch as u64;
        report.trajectory.push(TrajectoryPoint {
            iteration: epoch,
            objective: value,
            train_auc_risk: auc_risk(&samples, TiePolicy::Half)?,
        });
    }
    report.converged = true;
    Ok((best.1, report))
}
