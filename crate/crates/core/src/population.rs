//! Monte-Carlo checks of the population form of the surrogate.
//!
//! Scores are drawn from a two-class model (`ρ⁺`, `ρ⁻`, prior `p`). The
//! estimators below are plain sample averages; every check reports both
//! sides together with a 3σ Monte-Carlo slack.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{auc_risk, class_counts, ScoredSample, TiePolicy};
use crate::surrogate::{hinge, optimal_threshold, threshold_hinge_sum};

pub const MIN_DRAWS: usize = 10;
pub const MIN_QUANTILE_DRAWS: usize = 100;
/// Redraws allowed when a sample misses one class.
pub const MAX_DRAW_ATTEMPTS: usize = 16;
const SIGMAS: f64 = 3.0;

/// Univariate score distribution with a known density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ScoreFamily {
    Gaussian { mean: f64, std: f64 },
    Uniform { low: f64, high: f64 },
    Logistic { location: f64, scale: f64 },
    /// Has no density; only usable where the density bound is not needed.
    PointMass { at: f64 },
}

impl ScoreFamily {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ScoreFamily::Gaussian { mean, std } => mean.is_finite() && std.is_finite() && std > 0.0,
            ScoreFamily::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
            ScoreFamily::Logistic { location, scale } => {
                location.is_finite() && scale.is_finite() && scale > 0.0
            }
            ScoreFamily::PointMass { at } => at.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid score family {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ScoreFamily::Gaussian { mean, std } => mean + std * rng.sample::<f64, _>(StandardNormal),
            ScoreFamily::Uniform { low, high } => rng.random_range(low..high),
            ScoreFamily::Logistic { location, scale } => {
                let u: f64 = rng.random_range(f64::EPSILON..1.0);
                location + scale * (u / (1.0 - u)).ln()
            }
            ScoreFamily::PointMass { at } => at,
        }
    }

    /// Density at `c`; infinite at the atom of a point mass.
    pub fn pdf(&self, c: f64) -> f64 {
        match *self {
            ScoreFamily::Gaussian { mean, std } => {
                let z = (c - mean) / std;
                (-0.5 * z * z).exp() / (std * (2.0 * std::f64::consts::PI).sqrt())
            }
            ScoreFamily::Uniform { low, high } => {
                if (low..=high).contains(&c) {
                    1.0 / (high - low)
                } else {
                    0.0
                }
            }
            ScoreFamily::Logistic { location, scale } => {
                let e = (-(c - location).abs() / scale).exp();
                e / (scale * (1.0 + e).powi(2))
            }
            ScoreFamily::PointMass { at } => {
                if c == at {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
        }
    }

    fn mean(&self) -> f64 {
        match *self {
            ScoreFamily::Gaussian { mean, .. } => mean,
            ScoreFamily::Uniform { low, high } => 0.5 * (low + high),
            ScoreFamily::Logistic { location, .. } => location,
            ScoreFamily::PointMass { at } => at,
        }
    }

    /// Interval holding all but a negligible part of the mass.
    fn span(&self) -> (f64, f64) {
        match *self {
            ScoreFamily::Gaussian { mean, std } => (mean - 10.0 * std, mean + 10.0 * std),
            ScoreFamily::Uniform { low, high } => (low, high),
            ScoreFamily::Logistic { location, scale } => (location - 40.0 * scale, location + 40.0 * scale),
            ScoreFamily::PointMass { at } => (at, at),
        }
    }
}

/// `sup_c p·ρ⁺(c) + (1−p)·ρ⁻(c)`, by grid search refined with golden-section
/// steps, inflated by a relative `1e-9` so it can serve as an upper bound.
pub fn mixture_density_sup(pos: &ScoreFamily, neg: &ScoreFamily, prior_pos: f64) -> f64 {
    if matches!(pos, ScoreFamily::PointMass { .. }) || matches!(neg, ScoreFamily::PointMass { .. }) {
        return f64::INFINITY;
    }
    let rho = |c: f64| prior_pos * pos.pdf(c) + (1.0 - prior_pos) * neg.pdf(c);
    let (a0, b0) = pos.span();
    let (a1, b1) = neg.span();
    let (lo, hi) = (a0.min(a1), b0.max(b1));
    const GRID: usize = 200_000;
    let h = (hi - lo) / GRID as f64;
    let mut best = (lo, rho(lo));
    for i in 1..=GRID {
        let c = lo + h * i as f64;
        let v = rho(c);
        if v > best.1 {
            best = (c, v);
        }
    }
    // Golden-section refinement on the bracketing cell pair.
    let (mut a, mut b) = (best.0 - h, best.0 + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if rho(x1) >= rho(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let sup = best.1.max(rho(0.5 * (a + b)));
    sup * (1.0 + 1e-9)
}

/// Two-class score model. `density_bound` (`α′`) must dominate the mixture
/// density; for the analytic families use [`mixture_density_sup`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistributionPair {
    pub pos: ScoreFamily,
    pub neg: ScoreFamily,
    pub prior_pos: f64,
    pub density_bound: f64,
}

impl ScoreDistributionPair {
    pub fn new(pos: ScoreFamily, neg: ScoreFamily, prior_pos: f64, density_bound: f64) -> Result<Self> {
        let d = ScoreDistributionPair {
            pos,
            neg,
            prior_pos,
            density_bound,
        };
        d.validate()?;
        Ok(d)
    }

    /// Pair with `density_bound` set from [`mixture_density_sup`].
    pub fn with_exact_bound(pos: ScoreFamily, neg: ScoreFamily, prior_pos: f64) -> Result<Self> {
        pos.validate()?;
        neg.validate()?;
        Self::new(pos, neg, prior_pos, mixture_density_sup(&pos, &neg, prior_pos))
    }

    pub fn validate(&self) -> Result<()> {
        self.pos.validate()?;
        self.neg.validate()?;
        if !(self.prior_pos > 0.0 && self.prior_pos < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "prior must lie strictly inside (0, 1), got {}",
                self.prior_pos
            )));
        }
        if self.density_bound.is_nan() || self.density_bound <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "density bound must be > 0, got {}",
                self.density_bound
            )));
        }
        Ok(())
    }

    /// `n` labeled draws, both classes present. A draw missing a class is
    /// repeated with a derived seed, at most [`MAX_DRAW_ATTEMPTS`] times.
    pub fn draw(&self, n: usize, seed: u64) -> Result<Vec<ScoredSample>> {
        self.validate()?;
        for attempt in 0..MAX_DRAW_ATTEMPTS {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add((attempt as u64) << 32));
            let samples: Vec<ScoredSample> = (0..n)
                .map(|_| {
                    if rng.random_bool(self.prior_pos) {
                        ScoredSample::pos(self.pos.sample(&mut rng))
                    } else {
                        ScoredSample::neg(self.neg.sample(&mut rng))
                    }
                })
                .collect();
            if class_counts(&samples).is_ok() {
                return Ok(samples);
            }
        }
        Err(Error::RetriesExhausted {
            attempts: MAX_DRAW_ATTEMPTS,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub lhs: f64,
    pub rhs: f64,
    /// 3σ Monte-Carlo allowance used by `holds`.
    pub slack: f64,
    pub holds: bool,
}

fn require_draws(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::InvalidArgument(format!("need at least {min} draws, got {n}")));
    }
    Ok(())
}

fn mean_and_sem(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Empirical AUC risk of `n` draws (ties count one half).
pub fn mc_auc_risk(dist: &ScoreDistributionPair, n: usize, seed: u64) -> Result<f64> {
    require_draws(n, MIN_DRAWS)?;
    auc_risk(&dist.draw(n, seed)?, TiePolicy::Half)
}

/// `min_λ (1/n) Σ_i [y_i(λ − c_i)]₊` on a given sample, with the minimizing
/// `λ` taken from the ranked scores.
pub fn empirical_population_surrogate(samples: &[ScoredSample]) -> Result<(f64, f64)> {
    let lambda = optimal_threshold(samples)?;
    Ok((threshold_hinge_sum(samples, lambda) / samples.len() as f64, lambda))
}

/// Estimate of `min_λ E_{c,y}[y(λ − c)]₊` from `n` draws.
pub fn mc_population_surrogate(dist: &ScoreDistributionPair, n: usize, seed: u64) -> Result<f64> {
    require_draws(n, MIN_DRAWS)?;
    Ok(empirical_population_surrogate(&dist.draw(n, seed)?)?.0)
}

/// Checks `L_AUC ≤ α′/(p(1−p)) · min_λ E[y(λ − c)]₊` on one sample.
pub fn verify_population_bound(dist: &ScoreDistributionPair, n: usize, seed: u64) -> Result<CheckReport> {
    require_draws(n, MIN_DRAWS)?;
    let samples = dist.draw(n, seed)?;
    let (n_pos, n_neg) = class_counts(&samples)?;
    let lhs = auc_risk(&samples, TiePolicy::Half)?;
    let (surrogate, lambda) = empirical_population_surrogate(&samples)?;
    let p = dist.prior_pos;
    let factor = dist.density_bound / (p * (1.0 - p));
    let rhs = factor * surrogate;

    let sigma_lhs = (lhs * (1.0 - lhs) / n_pos.min(n_neg) as f64).sqrt();
    let (_, sem) = mean_and_sem(samples.iter().map(|s| hinge(s.label() * (lambda - s.score))));
    let sigma_rhs = factor * sem;
    let slack = SIGMAS * sigma_lhs.hypot(sigma_rhs);
    Ok(CheckReport {
        lhs,
        rhs,
        slack,
        holds: lhs <= rhs + slack,
    })
}

/// Checks `E⁺[c′] = min_λ E[(c − λ)₊]/p + λ`, where `F(c′) = 1 − p + p·F⁺(c)`.
///
/// `c′` is realized by inverting the empirical mixture CDF with the
/// right-continuous convention `Q(u) = min{c : F̂(c) ≥ u}`, at level
/// `1 − p + p·F̂⁺(c)` for each positive draw `c`. `p` is the model prior.
pub fn verify_lemma5(dist: &ScoreDistributionPair, n: usize, seed: u64) -> Result<CheckReport> {
    require_draws(n, MIN_QUANTILE_DRAWS)?;
    let samples = dist.draw(n, seed)?;
    let p = dist.prior_pos;

    let mut all: Vec<f64> = samples.iter().map(|s| s.score).collect();
    all.sort_by(f64::total_cmp);
    let mut pos: Vec<f64> = samples.iter().filter(|s| s.positive).map(|s| s.score).collect();
    pos.sort_by(f64::total_cmp);
    let n_pos = pos.len();

    // F̂⁺(c) counts positives ≤ c, so tied positives share the upper rank.
    let quantile = |u: f64| {
        let k = (u * n as f64 - 1e-9).ceil().max(1.0) as usize;
        all[k.min(n) - 1]
    };
    let mut c_prime = Vec::with_capacity(n_pos);
    let mut i = 0;
    while i < n_pos {
        let mut j = i;
        while j + 1 < n_pos && pos[j + 1] == pos[i] {
            j += 1;
        }
        let level = 1.0 - p + p * (j + 1) as f64 / n_pos as f64;
        let q = quantile(level);
        c_prime.extend(std::iter::repeat_n(q, j - i + 1));
        i = j + 1;
    }
    let (lhs, sem_lhs) = mean_and_sem(c_prime.iter().copied());

    // g(λ) = λ + (1/(pn)) Σ (c − λ)₊ is piecewise linear with kinks at the
    // draws; its minimum sits at the draw where the slope changes sign.
    let g = |lambda: f64| lambda + all.iter().map(|c| hinge(c - lambda)).sum::<f64>() / (p * n as f64);
    let m = (p * n as f64).floor() as usize;
    let (lambda, rhs) = [m, m + 1]
        .iter()
        .filter(|&&k| k >= 1 && k <= n)
        .map(|&k| all[n - k])
        .chain(std::iter::once(all[0]))
        .map(|l| (l, g(l)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty candidates");
    let (_, sem_rhs) = mean_and_sem(all.iter().map(|c| hinge(c - lambda) / p + lambda));

    let slack = SIGMAS * sem_lhs.hypot(sem_rhs);
    Ok(CheckReport {
        lhs,
        rhs,
        slack,
        holds: (lhs - rhs).abs() <= slack,
    })
}

impl ScoreDistributionPair {
    /// Mean score of the positive class.
    pub fn positive_mean(&self) -> f64 {
        self.pos.mean()
    }
}
