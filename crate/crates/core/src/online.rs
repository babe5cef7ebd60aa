//! Streaming stochastic subgradient descent on the joint objective.
//!
//! Each step costs `O(nnz(x))`: the `γw` shrink is folded into a scalar
//! multiplier (`w = scale · v`) and only materialized when the multiplier
//! underflows.

use std::borrow::Borrow;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Example};
use crate::error::{Error, Result};
use crate::metrics::{auc_risk, score_dataset, TiePolicy};
use crate::model::{LinearModel, Objective};
use crate::report::{TrainReport, TrajectoryPoint};
use crate::surrogate::{hinge, objective_value};

/// Below this the lazy multiplier is folded back into the stored vector.
const DENSIFY_BELOW: f64 = 1e-9;
/// Smoothing weight of `running_objective`.
const RUNNING_WEIGHT: f64 = 0.01;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSchedule {
    /// `η_t = η₀ / √t`
    #[default]
    InvSqrt,
}

impl StepSchedule {
    pub fn rate(self, eta0: f64, t: u64) -> f64 {
        match self {
            StepSchedule::InvSqrt => eta0 / (t as f64).sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shuffle {
    /// A fresh permutation every pass.
    #[default]
    PerEpoch,
    /// Dataset order.
    None,
    /// `N` uniform draws per pass.
    WithReplacement,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlineConfig {
    pub objective: Objective,
    pub eta0: f64,
    pub schedule: StepSchedule,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: Shuffle,
    /// Evaluate the full objective after every pass. Costs one extra pass.
    pub log_trajectory: bool,
}

impl OnlineConfig {
    pub fn new(objective: Objective, eta0: f64, epochs: usize, seed: u64) -> Self {
        OnlineConfig {
            objective,
            eta0,
            schedule: StepSchedule::InvSqrt,
            epochs,
            seed,
            shuffle: Shuffle::PerEpoch,
            log_trajectory: true,
        }
    }

    /// `eta0 = 0` is accepted and freezes the model.
    pub fn validate(&self) -> Result<()> {
        self.objective.validate()?;
        if !(self.eta0.is_finite() && self.eta0 >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "eta0 must be finite and >= 0 (got {})",
                self.eta0
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        Ok(())
    }
}

/// Live solver state. Single owner; copy a snapshot out with [`model`](Self::model).
#[derive(Clone, Debug)]
pub struct OnlineState {
    v: Vec<f64>,
    scale: f64,
    /// `‖v‖²`, maintained incrementally.
    v_sq: f64,
    threshold: f64,
    step_count: u64,
    running_objective: f64,
}

impl OnlineState {
    pub fn new(dim: usize) -> Self {
        OnlineState {
            v: vec![0.0; dim],
            scale: 1.0,
            v_sq: 0.0,
            threshold: 0.0,
            step_count: 0,
            running_objective: f64::NAN,
        }
    }

    pub fn from_model(model: &LinearModel) -> Self {
        OnlineState {
            v_sq: model.squared_norm(),
            v: model.weights.clone(),
            threshold: model.threshold,
            ..OnlineState::new(0)
        }
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Exponentially smoothed per-example objective of the examples seen,
    /// evaluated before each update. `NaN` before the first step.
    pub fn running_objective(&self) -> f64 {
        self.running_objective
    }

    pub fn model(&self) -> LinearModel {
        LinearModel {
            weights: self.v.iter().map(|v| v * self.scale).collect(),
            threshold: self.threshold,
        }
    }

    /// Bytes held by the state. Constant for a given dimension, whatever the
    /// number of examples consumed.
    pub fn aux_bytes(&self) -> usize {
        std::mem::size_of::<Self>() + self.v.capacity() * std::mem::size_of::<f64>()
    }

    pub fn score(&self, ex: &Example) -> f64 {
        self.scale * ex.features.dot(&self.v)
    }

    fn densify(&mut self) {
        if self.scale == 0.0 {
            self.v.iter_mut().for_each(|v| *v = 0.0);
            self.v_sq = 0.0;
        } else {
            let s = self.scale;
            self.v.iter_mut().for_each(|v| *v *= s);
            self.v_sq *= s * s;
        }
        self.scale = 1.0;
    }

    /// One step of
    /// `w ← w − η_t[γw + β(w·x)x − (β + a)yx]`, `λ ← λ − η_t·y·a`,
    /// where `a = 1` when `y(λ − w·x) > 0` and `0` otherwise.
    ///
    /// If the step would produce a non-finite value nothing is changed and
    /// [`Error::Divergence`] carries the current (finite) model.
    pub fn sgd_step(&mut self, ex: &Example, cfg: &OnlineConfig) -> Result<()> {
        if ex.features.dim() > self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: ex.features.dim(),
            });
        }
        let obj = &cfg.objective;
        let y = match ex.label {
            1 => 1.0,
            -1 => -1.0,
            other => return Err(Error::NonBinaryLabel(other)),
        };
        let t = self.step_count + 1;
        let eta = cfg.schedule.rate(cfg.eta0, t);
        let s = self.score(ex);
        let margin = y * (self.threshold - s);
        let active = if margin > 0.0 { 1.0 } else { 0.0 };

        let loss = 0.5 * obj.gamma * self.scale * self.scale * self.v_sq
            + hinge(margin)
            + 0.5 * obj.beta * (1.0 - y * s).powi(2);

        let shrink = 1.0 - eta * obj.gamma;
        let coef = -eta * (obj.beta * s - (obj.beta + active) * y);
        let new_threshold = self.threshold - eta * y * active;
        let new_scale = self.scale * shrink;

        let diverged = |reason: String, st: &Self| Error::Divergence {
            step: t,
            reason,
            last_finite: Box::new(st.model()),
        };
        if !(s.is_finite() && coef.is_finite() && new_threshold.is_finite() && new_scale.is_finite()) {
            return Err(diverged(
                format!("score {s}, coefficient {coef}, threshold {new_threshold}"),
                self,
            ));
        }
        // Probe the touched coordinates before committing anything.
        let effective_scale = if new_scale.abs() < DENSIFY_BELOW { 1.0 } else { new_scale };
        let step = coef / effective_scale;
        let factor = if new_scale.abs() < DENSIFY_BELOW { new_scale } else { 1.0 };
        for (i, x) in ex.features.iter() {
            if !(self.v[i] * factor + step * x).is_finite() {
                return Err(diverged(format!("weight {i} overflowed"), self));
            }
        }

        self.scale = new_scale;
        if self.scale.abs() < DENSIFY_BELOW {
            self.densify();
        }
        if step != 0.0 {
            for (i, x) in ex.features.iter() {
                let old = self.v[i];
                let new = old + step * x;
                self.v[i] = new;
                self.v_sq += new * new - old * old;
            }
            self.v_sq = self.v_sq.max(0.0);
        }
        self.threshold = new_threshold;
        self.step_count = t;
        self.running_objective = if self.running_objective.is_nan() {
            loss
        } else {
            (1.0 - RUNNING_WEIGHT) * self.running_objective + RUNNING_WEIGHT * loss
        };
        Ok(())
    }
}

/// Feeds every example of `stream` through one [`OnlineState::sgd_step`].
/// Nothing is retained; the iterator may generate examples on the fly.
/// Returns the number of steps taken.
pub fn consume_stream<I>(state: &mut OnlineState, stream: I, cfg: &OnlineConfig) -> Result<u64>
where
    I: IntoIterator,
    I::Item: Borrow<Example>,
{
    cfg.validate()?;
    let mut n = 0;
    for ex in stream {
        state.sgd_step(ex.borrow(), cfg)?;
        n += 1;
    }
    Ok(n)
}

/// `epochs · N` steps from `w = 0, λ = 0`.
pub fn train_online(ds: &Dataset, cfg: &OnlineConfig) -> Result<(LinearModel, TrainReport)> {
    train_online_from(ds, cfg, OnlineState::new(ds.dim()))
}

pub fn train_online_from(
    ds: &Dataset,
    cfg: &OnlineConfig,
    mut state: OnlineState,
) -> Result<(LinearModel, TrainReport)> {
    cfg.validate()?;
    cfg.objective.validate_for_training()?;
    ds.require_both_classes()?;
    if state.dim() != ds.dim() {
        return Err(Error::DimensionMismatch {
            expected: ds.dim(),
            found: state.dim(),
        });
    }
    let mut report = TrainReport::new("online", cfg.objective);
    let log = |state: &OnlineState, pass: usize, report: &mut TrainReport| -> Result<()> {
        let model = state.model();
        report.trajectory.push(TrajectoryPoint {
            iteration: pass,
            objective: objective_value(&model, ds, &cfg.objective)?,
            train_auc_risk: auc_risk(&score_dataset(&model, ds)?, TiePolicy::Half)?,
        });
        Ok(())
    };
    if cfg.log_trajectory {
        log(&state, 0, &mut report)?;
    }

    let examples = ds.examples();
    let n = examples.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = match cfg.shuffle {
        Shuffle::PerEpoch => (0..n).collect(),
        _ => Vec::new(),
    };
    for pass in 1..=cfg.epochs {
        match cfg.shuffle {
            Shuffle::PerEpoch => {
                order.shuffle(&mut rng);
                consume_stream(&mut state, order.iter().map(|&i| &examples[i]), cfg)?;
            }
            Shuffle::None => {
                consume_stream(&mut state, examples, cfg)?;
            }
            Shuffle::WithReplacement => {
                for _ in 0..n {
                    state.sgd_step(&examples[rng.random_range(0..n)], cfg)?;
                }
            }
        }
        if cfg.log_trajectory || pass == cfg.epochs {
            log(&state, pass, &mut report)?;
        }
    }
    report.steps = state.step_count();
    Ok((state.model(), report))
}
