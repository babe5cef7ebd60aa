//! AUC risk optimization without pairwise comparisons.
//!
//! The crate provides exact AUC risk computation ([`metrics`]), the
//! sum-of-top-k identity ([`topk`]), the univariate surrogate and its
//! training objective ([`surrogate`]), pairwise reference losses
//! ([`baselines`]), a batch block-coordinate solver ([`batch`]), a streaming
//! stochastic subgradient solver ([`online`]) and Monte-Carlo checks of the
//! population form ([`population`]).
//!
//! ```
//! use ubauc::metrics::{auc_risk_pairwise, auc_risk_rank, ScoredSample, TiePolicy};
//!
//! let samples = [ScoredSample::neg(0.1), ScoredSample::pos(0.4), ScoredSample::neg(0.8)];
//! assert_eq!(auc_risk_pairwise(&samples, TiePolicy::Half).unwrap(), 0.5);
//! assert_eq!(auc_risk_rank(&samples).unwrap(), 0.5);
//! ```

pub mod baselines;
pub mod batch;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod model;
pub mod online;
pub mod population;
pub mod report;
pub mod surrogate;
pub mod synthetic;
pub mod topk;

pub use dataset::{Dataset, Example, SparseVector};
pub use error::{Error, Result};
pub use model::{LinearModel, Objective};
