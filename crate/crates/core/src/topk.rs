//! Sum of the `k` largest values, directly and through its variational form
//! `min_λ { kλ + Σ_i [z_i − λ]₊ }`.

use crate::error::{Error, Result};

/// Interval of minimizing thresholds, `[lower, upper)` with `lower = -inf`
/// when `k = N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambdaRange {
    pub lower: f64,
    pub upper: f64,
}

impl LambdaRange {
    /// Half-open membership; a degenerate range (tied order statistics)
    /// admits only its left endpoint.
    pub fn contains(&self, lambda: f64) -> bool {
        if self.lower == self.upper {
            lambda == self.lower
        } else {
            self.lower <= lambda && lambda < self.upper
        }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TopKResult {
    pub sum: f64,
    pub lambda_star: f64,
    pub lambda_range: LambdaRange,
}

fn check(z: &[f64], k: usize) -> Result<()> {
    if k == 0 || k > z.len() {
        return Err(Error::InvalidArgument(format!(
            "k must be in [1, {}], got {k}",
            z.len()
        )));
    }
    if let Some(v) = z.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("top-k input {v}")));
    }
    Ok(())
}

/// Sort-based sum of the `k` largest entries.
pub fn topk_sum_direct(z: &[f64], k: usize) -> Result<f64> {
    check(z, k)?;
    let mut sorted = z.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(sorted[..k].iter().sum())
}

/// `g(λ) = kλ + Σ_i [z_i − λ]₊`; convex and piecewise linear in `λ`, with
/// minimum equal to the top-`k` sum.
pub fn topk_objective(z: &[f64], k: usize, lambda: f64) -> f64 {
    k as f64 * lambda + z.iter().map(|&v| (v - lambda).max(0.0)).sum::<f64>()
}

/// The `(N−k)`-th and `(N−k+1)`-th smallest values (1-based), found by
/// selection rather than a full sort. The first is `-inf` when `k = N`.
pub fn order_statistic_bracket(z: &[f64], k: usize) -> Result<LambdaRange> {
    check(z, k)?;
    let n = z.len();
    let mut buf = z.to_vec();
    if k == n {
        let min = buf.iter().copied().fold(f64::INFINITY, f64::min);
        return Ok(LambdaRange {
            lower: f64::NEG_INFINITY,
            upper: min,
        });
    }
    let (_, lower, above) = buf.select_nth_unstable_by(n - k - 1, f64::total_cmp);
    let lower = *lower;
    let upper = above.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(LambdaRange { lower, upper })
}

/// Evaluates the variational form at `λ* = z_(N−k)` (the left end of the
/// minimizing interval), or at `min(z) − 1` when `k = N`.
pub fn topk_sum_variational(z: &[f64], k: usize) -> Result<TopKResult> {
    let lambda_range = order_statistic_bracket(z, k)?;
    let lambda_star = if k == z.len() {
        lambda_range.upper - 1.0
    } else {
        lambda_range.lower
    };
    let sum = topk_objective(z, k, lambda_star);
    debug_assert!({
        let direct = topk_sum_direct(z, k).unwrap_or(f64::NAN);
        (sum - direct).abs() <= 1e-9 * (1.0 + direct.abs())
    });
    Ok(TopKResult {
        sum,
        lambda_star,
        lambda_range,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_examples() {
        let z = [1.0, 3.0, 5.0, 9.0];
        assert_eq!(topk_sum_direct(&z, 2).unwrap(), 14.0);
        assert_eq!(topk_sum_direct(&z, 4).unwrap(), 18.0);
        assert_eq!(topk_sum_direct(&z, 1).unwrap(), 9.0);
    }

    #[test]
    fn k_out_of_range() {
        assert!(topk_sum_direct(&[1.0], 0).is_err());
        assert!(topk_sum_direct(&[1.0], 2).is_err());
        assert!(topk_sum_variational(&[1.0, 2.0], 3).is_err());
        assert!(topk_sum_variational(&[], 1).is_err());
    }

    #[test]
    fn variational_examples() {
        // g(3) = 2·3 + (2 + 6) = 14
        let r = topk_sum_variational(&[9.0, 1.0, 5.0, 3.0], 2).unwrap();
        assert_eq!(r.sum, 14.0);
        assert_eq!(r.lambda_star, 3.0);
        assert_eq!(r.lambda_range, LambdaRange { lower: 3.0, upper: 5.0 });

        // g(0.4) = 0.4 + 0.4 = 0.8
        let r = topk_sum_variational(&[0.1, 0.4, 0.8], 1).unwrap();
        assert_eq!(r.sum, 0.8);
        assert!(r.lambda_range.contains(r.lambda_star));
        assert_eq!(r.lambda_range, LambdaRange { lower: 0.4, upper: 0.8 });
    }

    #[test]
    fn k_equals_n() {
        let r = topk_sum_variational(&[2.0, -1.0, 4.0], 3).unwrap();
        assert_eq!(r.sum, 5.0);
        assert!(r.lambda_star < -1.0);
        assert!(r.lambda_range.contains(r.lambda_star));
    }

    #[test]
    fn all_equal_values() {
        let z = [2.5; 6];
        for k in 1..=6 {
            let r = topk_sum_variational(&z, k).unwrap();
            assert_eq!(r.sum, 2.5 * k as f64);
            assert_eq!(topk_objective(&z, k, 2.5), 2.5 * k as f64);
            // Every λ ≤ z is optimal only for k = N; below z the slope is k − N.
            let below = topk_objective(&z, k, -10.0);
            if k == 6 {
                assert_eq!(below, 15.0);
            } else {
                assert!(below > 2.5 * k as f64);
            }
        }
    }
}
