//! The univariate surrogate `L̃` of the AUC risk and the augmented learning
//! objective built from it.
//!
//! `L̃` compares the sum of the top-`N⁺` scores with the sum of the positive
//! scores. Its variational form replaces the ranking by a minimization over a
//! single threshold `λ`:
//!
//! ```text
//! L̃ = 1/(N⁺N⁻) · min_λ Σ_i [y_i (λ − c_i)]₊
//! ```
//!
//! which is what makes per-example (online) optimization possible.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Example};
use crate::error::{Error, Result};
use crate::metrics::{class_counts, rank_profile, ScoredSample};
use crate::model::{LinearModel, Objective};
use crate::topk::{order_statistic_bracket, LambdaRange};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateForm {
    Sorted,
    Variational,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurrogateValue {
    pub value: f64,
    pub lambda_star: f64,
    pub form: SurrogateForm,
}

#[inline]
pub(crate) fn hinge(a: f64) -> f64 {
    a.max(0.0)
}

/// Minimizing thresholds for `Σ [y(λ − c)]₊`: the closed interval between the
/// `N⁻`-th and `(N⁻+1)`-th smallest scores.
pub fn optimal_threshold_range(samples: &[ScoredSample]) -> Result<LambdaRange> {
    let (n_pos, _) = class_counts(samples)?;
    let scores: Vec<f64> = samples.iter().map(|s| s.score).collect();
    order_statistic_bracket(&scores, n_pos)
}

/// Threshold used throughout: midpoint of [`optimal_threshold_range`], or its
/// left end when the two order statistics coincide.
pub fn optimal_threshold(samples: &[ScoredSample]) -> Result<f64> {
    let range = optimal_threshold_range(samples)?;
    Ok(if range.lower == range.upper {
        range.lower
    } else {
        range.midpoint()
    })
}

/// Sorted form: `(1/(N⁺N⁻)) [Σ top-N⁺ scores − Σ positive scores]`, summed
/// as `Σ_i (c↑_{N⁻+i} − c↑⁺_i)` so every term is non-negative.
pub fn surrogate_sorted(samples: &[ScoredSample]) -> Result<SurrogateValue> {
    let (n_pos, n_neg) = class_counts(samples)?;
    let profile = rank_profile(samples)?;
    let gap_sum: f64 = (1..=n_pos)
        .map(|i| profile.sorted_scores[n_neg + i - 1] - profile.positive_score(i))
        .sum();
    let lower = profile.sorted_scores[n_neg - 1];
    let upper = profile.sorted_scores[n_neg];
    let lambda_star = if lower == upper {
        lower
    } else {
        0.5 * (lower + upper)
    };
    Ok(SurrogateValue {
        value: gap_sum / (n_pos as f64 * n_neg as f64),
        lambda_star,
        form: SurrogateForm::Sorted,
    })
}

/// `Σ_i [y_i (λ − c_i)]₊` at a given threshold.
pub fn threshold_hinge_sum(samples: &[ScoredSample], lambda: f64) -> f64 {
    samples
        .iter()
        .map(|s| hinge(s.label() * (lambda - s.score)))
        .sum()
}

/// Variational form evaluated at the selection-based optimal threshold; no
/// sort is performed.
pub fn surrogate_variational(samples: &[ScoredSample]) -> Result<SurrogateValue> {
    let (n_pos, n_neg) = class_counts(samples)?;
    let lambda_star = optimal_threshold(samples)?;
    Ok(SurrogateValue {
        value: threshold_hinge_sum(samples, lambda_star) / (n_pos as f64 * n_neg as f64),
        lambda_star,
        form: SurrogateForm::Variational,
    })
}

/// Constants of the sandwich `α̲·L̃ ≤ L_AUC ≤ ᾱ·L̃`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundConstants {
    /// `1 / min_i (c↑_{i+1} − c↑_i)`
    pub alpha_upper: f64,
    /// `1 / max_i (c↑_{i+1} − c↑_i)`
    pub alpha_lower: f64,
}

pub fn bound_constants(samples: &[ScoredSample]) -> Result<BoundConstants> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument(
            "bound constants need at least two scores".into(),
        ));
    }
    let mut scores: Vec<f64> = samples.iter().map(|s| s.score).collect();
    if let Some(v) = scores.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("prediction score {v}")));
    }
    scores.sort_by(f64::total_cmp);
    let (mut min_gap, mut max_gap) = (f64::INFINITY, 0.0f64);
    for w in scores.windows(2) {
        let gap = w[1] - w[0];
        min_gap = min_gap.min(gap);
        max_gap = max_gap.max(gap);
    }
    if min_gap <= 0.0 {
        return Err(Error::Ties(
            "a zero gap between sorted scores leaves the upper constant undefined".into(),
        ));
    }
    Ok(BoundConstants {
        alpha_upper: 1.0 / min_gap,
        alpha_lower: 1.0 / max_gap,
    })
}

/// Contribution of one example to the training objective, including the full
/// regularizer: `(γ/2)‖w‖² + [y(λ − w·x)]₊ + (β/2)(1 − y w·x)²`.
pub fn per_example_objective(model: &LinearModel, ex: &Example, obj: &Objective) -> f64 {
    let y = ex.sign();
    let s = model.score(&ex.features);
    0.5 * obj.gamma * model.squared_norm()
        + hinge(y * (model.threshold - s))
        + 0.5 * obj.beta * (1.0 - y * s).powi(2)
}

/// Joint objective in `(w, λ)`:
/// `(γ/2)‖w‖² + Σ_i { [y_i(λ − w·x_i)]₊ + (β/2)(1 − y_i w·x_i)² }`.
pub fn objective_value(model: &LinearModel, ds: &Dataset, obj: &Objective) -> Result<f64> {
    model.check_dim(ds)?;
    obj.validate()?;
    ds.require_binary()?;
    let lambda = model.threshold;
    let data_term: f64 = ds
        .examples()
        .iter()
        .map(|ex| {
            let y = ex.sign();
            let s = model.score(&ex.features);
            hinge(y * (lambda - s)) + 0.5 * obj.beta * (1.0 - y * s).powi(2)
        })
        .sum();
    Ok(0.5 * obj.gamma * model.squared_norm() + data_term)
}
