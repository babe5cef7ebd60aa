//! Exact AUC risk: the pairwise Wilcoxon-Mann-Whitney count and the
//! rank-based form that needs only one sort.
//!
//! The AUC risk is the fraction of (positive, negative) pairs ranked in the
//! wrong order, `1 - AUC`. Pair counts are accumulated as integers so that
//! every form divides once and agrees bit-for-bit on tie-free input.

use std::cmp::Ordering;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::LinearModel;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoredSample {
    pub score: f64,
    pub positive: bool,
}

impl ScoredSample {
    pub fn pos(score: f64) -> Self {
        ScoredSample {
            score,
            positive: true,
        }
    }

    pub fn neg(score: f64) -> Self {
        ScoredSample {
            score,
            positive: false,
        }
    }

    /// `label` must be -1 or +1.
    pub fn from_label(score: f64, label: i64) -> Result<Self> {
        match label {
            1 => Ok(Self::pos(score)),
            -1 => Ok(Self::neg(score)),
            other => Err(Error::NonBinaryLabel(other)),
        }
    }

    pub fn label(&self) -> f64 {
        if self.positive {
            1.0
        } else {
            -1.0
        }
    }
}

/// Pairs scores with labels; fails on non-binary labels.
pub fn zip_scores(scores: &[f64], labels: &[i64]) -> Result<Vec<ScoredSample>> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    scores
        .iter()
        .zip(labels)
        .map(|(&s, &l)| ScoredSample::from_label(s, l))
        .collect()
}

/// Scores every example of `ds` with `model`.
pub fn score_dataset(model: &LinearModel, ds: &Dataset) -> Result<Vec<ScoredSample>> {
    model.check_dim(ds)?;
    ds.examples()
        .iter()
        .map(|ex| ScoredSample::from_label(model.score(&ex.features), ex.label))
        .collect()
}

/// How a positive and a negative with equal scores are counted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TiePolicy {
    /// A tie counts as half a wrongly ordered pair (standard WMW).
    #[default]
    Half,
    /// Ties are not counted as errors.
    Strict,
}

/// Returns `(n_pos, n_neg)` after checking scores are finite and both
/// classes are present.
pub fn class_counts(samples: &[ScoredSample]) -> Result<(usize, usize)> {
    if let Some(s) = samples.iter().find(|s| !s.score.is_finite()) {
        return Err(Error::NonFinite(format!("prediction score {}", s.score)));
    }
    let n_pos = samples.iter().filter(|s| s.positive).count();
    let n_neg = samples.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass { n_pos, n_neg });
    }
    Ok((n_pos, n_neg))
}

fn risk_from_counts(wrong: u64, ties: u64, n_pos: usize, n_neg: usize, policy: TiePolicy) -> f64 {
    let pairs = n_pos as u64 * n_neg as u64;
    match policy {
        TiePolicy::Strict => wrong as f64 / pairs as f64,
        TiePolicy::Half => (2 * wrong + ties) as f64 / (2 * pairs) as f64,
    }
}

/// Direct double loop over every (positive, negative) pair. Quadratic; meant
/// as the reference for the faster forms.
pub fn auc_risk_pairwise(samples: &[ScoredSample], policy: TiePolicy) -> Result<f64> {
    let (n_pos, n_neg) = class_counts(samples)?;
    let mut wrong = 0u64;
    let mut ties = 0u64;
    for p in samples.iter().filter(|s| s.positive) {
        for n in samples.iter().filter(|s| !s.positive) {
            if p.score < n.score {
                wrong += 1;
            } else if p.score == n.score {
                ties += 1;
            }
        }
    }
    Ok(risk_from_counts(wrong, ties, n_pos, n_neg, policy))
}

/// Tie-aware AUC risk in `O(N log N)`; equal to [`auc_risk_pairwise`] under
/// either policy. This is the evaluation metric used for reporting.
pub fn auc_risk(samples: &[ScoredSample], policy: TiePolicy) -> Result<f64> {
    let (n_pos, n_neg) = class_counts(samples)?;
    let mut sorted: Vec<(f64, bool)> = samples.iter().map(|s| (s.score, s.positive)).collect();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut wrong = 0u64;
    let mut ties = 0u64;
    let mut neg_above = 0u64;
    let mut start = 0;
    while start < sorted.len() {
        let score = sorted[start].0;
        let mut end = start;
        let (mut pos_here, mut neg_here) = (0u64, 0u64);
        while end < sorted.len() && sorted[end].0 == score {
            if sorted[end].1 {
                pos_here += 1;
            } else {
                neg_here += 1;
            }
            end += 1;
        }
        wrong += pos_here * neg_above;
        ties += pos_here * neg_here;
        neg_above += neg_here;
        start = end;
    }
    Ok(risk_from_counts(wrong, ties, n_pos, n_neg, policy))
}

/// `1 - auc_risk` under the half-tie policy.
pub fn auc(samples: &[ScoredSample]) -> Result<f64> {
    Ok(1.0 - auc_risk(samples, TiePolicy::Half)?)
}

/// True when any two scores are equal.
pub fn has_ties(samples: &[ScoredSample]) -> bool {
    let mut scores: Vec<f64> = samples.iter().map(|s| s.score).collect();
    scores.sort_by(f64::total_cmp);
    scores.windows(2).any(|w| w[0] == w[1])
}

/// Sorted scores and the 1-based ranks of the positives within them.
#[derive(Clone, Debug, PartialEq)]
pub struct RankProfile {
    /// Scores in ascending order; ties ordered by original index.
    pub sorted_scores: Vec<f64>,
    /// Whether each sorted position holds a positive.
    pub sorted_positive: Vec<bool>,
    /// Strictly increasing ranks `r⁺_1 < … < r⁺_{N⁺}`.
    pub pos_ranks: Vec<usize>,
    pub n_neg: usize,
    /// Set when two scores coincided and the index tiebreak decided the order.
    pub had_ties: bool,
}

impl RankProfile {
    pub fn n_pos(&self) -> usize {
        self.pos_ranks.len()
    }

    /// Score of the `i`-th positive in sorted order (1-based `i`).
    pub fn positive_score(&self, i: usize) -> f64 {
        self.sorted_scores[self.pos_ranks[i - 1] - 1]
    }
}

/// Stable ascending sort by `(score, index)` and extraction of positive ranks.
pub fn rank_profile(samples: &[ScoredSample]) -> Result<RankProfile> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("rank profile of an empty sample".into()));
    }
    if let Some(s) = samples.iter().find(|s| !s.score.is_finite()) {
        return Err(Error::NonFinite(format!("prediction score {}", s.score)));
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| match samples[a].score.total_cmp(&samples[b].score) {
        Ordering::Equal => a.cmp(&b),
        other => other,
    });
    let sorted_scores: Vec<f64> = order.iter().map(|&i| samples[i].score).collect();
    let sorted_positive: Vec<bool> = order.iter().map(|&i| samples[i].positive).collect();
    let pos_ranks: Vec<usize> = sorted_positive
        .iter()
        .enumerate()
        .filter(|(_, &p)| p)
        .map(|(r, _)| r + 1)
        .collect();
    let n_neg = samples.len() - pos_ranks.len();
    let had_ties = sorted_scores.windows(2).any(|w| w[0] == w[1]);
    let profile = RankProfile {
        sorted_scores,
        sorted_positive,
        pos_ranks,
        n_neg,
        had_ties,
    };
    for i in 1..=profile.n_pos() {
        assert!(profile.pos_ranks[i - 1] <= profile.n_neg + i);
        assert!(profile.sorted_scores[profile.n_neg + i - 1] >= profile.positive_score(i));
    }
    Ok(profile)
}

/// Rank form: `(1/(N⁺N⁻)) Σ_i (N⁻ + i − r⁺_i)`. Ties are resolved by the
/// index tiebreak of [`rank_profile`], which makes this equal to the strict
/// pairwise count only on tie-free input.
pub fn auc_risk_rank(samples: &[ScoredSample]) -> Result<f64> {
    let (n_pos, n_neg) = class_counts(samples)?;
    let profile = rank_profile(samples)?;
    let wrong: u64 = profile
        .pos_ranks
        .iter()
        .enumerate()
        .map(|(k, &r)| (n_neg + k + 1 - r) as u64)
        .sum();
    Ok(risk_from_counts(wrong, 0, n_pos, n_neg, TiePolicy::Strict))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 13 increasing scores with positives at sorted positions 4,6,7,8,9,11,13.
    fn figure_one() -> Vec<ScoredSample> {
        let pos = [4, 6, 7, 8, 9, 11, 13];
        (1..=13)
            .map(|r| ScoredSample {
                score: r as f64 * 0.5 - 1.0,
                positive: pos.contains(&r),
            })
            .collect()
    }

    fn three() -> Vec<ScoredSample> {
        vec![ScoredSample::neg(0.1), ScoredSample::pos(0.4), ScoredSample::neg(0.8)]
    }

    #[test]
    fn figure_one_risk_is_two_sevenths() {
        let s = figure_one();
        assert_eq!(auc_risk_pairwise(&s, TiePolicy::Half).unwrap(), 2.0 / 7.0);
        assert_eq!(auc_risk_pairwise(&s, TiePolicy::Strict).unwrap(), 2.0 / 7.0);
        assert_eq!(auc_risk_rank(&s).unwrap(), 2.0 / 7.0);
        assert_eq!(auc_risk(&s, TiePolicy::Half).unwrap(), 2.0 / 7.0);
        let p = rank_profile(&s).unwrap();
        assert_eq!(p.pos_ranks, vec![4, 6, 7, 8, 9, 11, 13]);
        assert_eq!(p.n_neg, 6);
        assert!(!p.had_ties);
    }

    #[test]
    fn three_point_example() {
        let s = three();
        assert_eq!(auc_risk_pairwise(&s, TiePolicy::Half).unwrap(), 0.5);
        assert_eq!(auc_risk_rank(&s).unwrap(), 0.5);
        assert_eq!(rank_profile(&s).unwrap().pos_ranks, vec![2]);
    }

    #[test]
    fn perfect_ranking_is_zero() {
        let s = vec![
            ScoredSample::neg(-3.0),
            ScoredSample::pos(2.0),
            ScoredSample::neg(-1.0),
            ScoredSample::pos(5.0),
        ];
        assert_eq!(auc_risk_pairwise(&s, TiePolicy::Half).unwrap(), 0.0);
        assert_eq!(auc_risk_rank(&s).unwrap(), 0.0);
        let p = rank_profile(&s).unwrap();
        assert_eq!(p.pos_ranks, vec![3, 4]);
    }

    #[test]
    fn single_pair_profile() {
        let s = vec![ScoredSample::pos(1.0), ScoredSample::neg(0.0)];
        assert_eq!(rank_profile(&s).unwrap().pos_ranks, vec![2]);
    }

    #[test]
    fn single_class_is_an_error() {
        let s = vec![ScoredSample::pos(1.0), ScoredSample::pos(2.0)];
        assert!(matches!(
            auc_risk_pairwise(&s, TiePolicy::Half),
            Err(Error::SingleClass { .. })
        ));
        assert!(auc_risk_rank(&s).is_err());
        assert!(auc_risk(&s, TiePolicy::Half).is_err());
        assert!(rank_profile(&[]).is_err());
    }

    #[test]
    fn non_finite_scores_are_rejected() {
        let s = vec![ScoredSample::pos(f64::NAN), ScoredSample::neg(0.0)];
        assert!(matches!(auc_risk(&s, TiePolicy::Half), Err(Error::NonFinite(_))));
    }

    #[test]
    fn tie_policies() {
        let s = vec![
            ScoredSample::pos(1.0),
            ScoredSample::neg(1.0),
            ScoredSample::neg(0.0),
        ];
        assert_eq!(auc_risk_pairwise(&s, TiePolicy::Half).unwrap(), 0.25);
        assert_eq!(auc_risk_pairwise(&s, TiePolicy::Strict).unwrap(), 0.0);
        assert_eq!(auc_risk(&s, TiePolicy::Half).unwrap(), 0.25);
        assert_eq!(auc_risk(&s, TiePolicy::Strict).unwrap(), 0.0);
        assert!(has_ties(&s));
    }

    #[test]
    fn duplicate_scores_use_index_tiebreak() {
        // Brute force: both input orders of a tied (pos, neg) pair, the rank
        // of the positive follows its original position.
        let a = vec![ScoredSample::pos(1.0), ScoredSample::neg(1.0)];
        let b = vec![ScoredSample::neg(1.0), ScoredSample::pos(1.0)];
        let pa = rank_profile(&a).unwrap();
        let pb = rank_profile(&b).unwrap();
        assert_eq!(pa.pos_ranks, vec![1]);
        assert_eq!(pb.pos_ranks, vec![2]);
        assert!(pa.had_ties && pb.had_ties);
        assert_eq!(rank_profile(&a).unwrap(), pa);
        assert_eq!(auc_risk_rank(&a).unwrap(), 1.0);
        assert_eq!(auc_risk_rank(&b).unwrap(), 0.0);
    }
}
