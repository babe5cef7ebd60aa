use serde::{Deserialize, Serialize};

use crate::model::Objective;

/// One logged point of a training run: after outer iteration `iteration`
/// (batch) or after pass `iteration` over the data (online).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    pub objective: f64,
    pub train_auc_risk: f64,
}

/// Deterministic record of a training run. Wall-clock timings are kept out so
/// identical inputs give identical reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub algorithm: String,
    pub objective: Objective,
    pub trajectory: Vec<TrajectoryPoint>,
    pub steps: u64,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl TrainReport {
    pub fn new(algorithm: &str, objective: Objective) -> Self {
        TrainReport {
            algorithm: algorithm.to_string(),
            objective,
            trajectory: Vec::new(),
            steps: 0,
            converged: false,
            warnings: Vec::new(),
        }
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.trajectory.last().map(|p| p.objective)
    }
}
