//! Linear scoring model and the augmented training objective it is fit to.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, SparseVector};
use crate::error::{Error, Result};

/// Linear scorer `f(x) = w·x` together with the class-separating threshold `λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelFile", try_from = "ModelFile")]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub threshold: f64,
}

/// On-disk layout: `{"dim": .., "weights": [..], "lambda": ..}`.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    dim: usize,
    weights: Vec<f64>,
    lambda: f64,
}

impl From<LinearModel> for ModelFile {
    fn from(m: LinearModel) -> Self {
        ModelFile {
            dim: m.weights.len(),
            weights: m.weights,
            lambda: m.threshold,
        }
    }
}

impl TryFrom<ModelFile> for LinearModel {
    type Error = String;

    fn try_from(f: ModelFile) -> std::result::Result<Self, Self::Error> {
        if f.weights.len() != f.dim {
            return Err(format!(
                "model declares dim {} but has {} weights",
                f.dim,
                f.weights.len()
            ));
        }
        let model = LinearModel {
            weights: f.weights,
            threshold: f.lambda,
        };
        if !model.is_finite() {
            return Err("model contains non-finite entries".into());
        }
        Ok(model)
    }
}

impl LinearModel {
    pub fn zeros(dim: usize) -> Self {
        LinearModel {
            weights: vec![0.0; dim],
            threshold: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn is_finite(&self) -> bool {
        self.threshold.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }

    pub fn score(&self, x: &SparseVector) -> f64 {
        x.dot(&self.weights)
    }

    pub fn scores(&self, ds: &Dataset) -> Vec<f64> {
        ds.examples().iter().map(|ex| self.score(&ex.features)).collect()
    }

    pub fn squared_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }

    pub(crate) fn check_dim(&self, ds: &Dataset) -> Result<()> {
        if self.dim() != ds.dim() {
            return Err(Error::DimensionMismatch {
                expected: ds.dim(),
                found: self.dim(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularizer {
    /// `½‖w‖²`
    #[default]
    SquaredNorm,
}

/// Weights of the least-squares anchor (`beta`) and the regularizer (`gamma`)
/// added to the surrogate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub beta: f64,
    pub gamma: f64,
    #[serde(default)]
    pub regularizer: Regularizer,
}

impl Objective {
    pub fn new(beta: f64, gamma: f64) -> Self {
        Objective {
            beta,
            gamma,
            regularizer: Regularizer::SquaredNorm,
        }
    }

    /// Checks the weights are usable for evaluation (finite, non-negative).
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "beta must be finite and >= 0, got {}",
                self.beta
            )));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "gamma must be finite and >= 0, got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// Training additionally needs `beta > 0`: without the least-squares term
    /// the surrogate is positively homogeneous in `w` and is driven to the
    /// trivial minimizer `w = 0`.
    pub fn validate_for_training(&self) -> Result<()> {
        self.validate()?;
        if self.beta <= 0.0 {
            return Err(Error::Validation(format!(
                "beta must be > 0 for training (got {}): without the least-squares term the \
                 surrogate shrinks w to the trivial all-zero solution",
                self.beta
            )));
        }
        Ok(())
    }
}
