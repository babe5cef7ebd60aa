//! Block coordinate descent on the joint objective in `(w, λ)`.
//!
//! The `w`-block is solved by ADMM on the split `u = Xw`: the quadratic part
//! is a linear solve with the fixed matrix `γI + (β + ρ)XᵀX` (factored once
//! per `ρ`), the hinge part is a closed-form per-example prox. The `λ`-block
//! is solved exactly from the ranked scores.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{auc_risk, score_dataset, TiePolicy};
use crate::model::{LinearModel, Objective};
use crate::report::{TrainReport, TrajectoryPoint};
use crate::surrogate::{objective_value, optimal_threshold};

/// Allowed increase of the objective between outer iterations.
pub const MONOTONICITY_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchConfig {
    pub objective: Objective,
    pub max_outer_iters: usize,
    /// ADMM residual tolerance of the `w` step.
    pub inner_tol: f64,
    /// Relative objective change at which the outer loop stops.
    pub outer_tol: f64,
    /// ADMM iterations per `w` step.
    pub inner_max_iters: usize,
}

impl BatchConfig {
    pub fn new(objective: Objective) -> Self {
        BatchConfig {
            objective,
            max_outer_iters: 50,
            inner_tol: 1e-7,
            outer_tol: 1e-7,
            inner_max_iters: 2000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.objective.validate_for_training()?;
        if !(self.inner_tol > 0.0 && self.outer_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be > 0".into()));
        }
        if self.max_outer_iters == 0 || self.inner_max_iters == 0 {
            return Err(Error::InvalidArgument("iteration caps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Outcome of one `w` step.
#[derive(Clone, Debug, PartialEq)]
pub struct SubproblemResult {
    pub weights: Vec<f64>,
    /// Sub-problem objective at `weights`.
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    /// Set when `max_iters` iterations ran without reaching `tol`.
    pub hit_cap: bool,
}

/// Up to this dimension the `w` system is factored densely; above it the
/// solver switches to conjugate gradients on `XᵀX` products.
pub const DENSE_DIM_LIMIT: usize = 1000;
const MAX_RHO_UPDATES: usize = 40;
const CG_MAX_ITERS: usize = 500;

fn hinge_prox(t: f64, y: f64, lambda: f64, rho: f64) -> f64 {
    // In margin space z = y·u: argmin_z [θ − z]₊ + (ρ/2)(z − r)².
    let (r, theta) = (y * t, y * lambda);
    let z = if r >= theta {
        r
    } else if r + 1.0 / rho <= theta {
        r + 1.0 / rho
    } else {
        theta
    };
    y * z
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// `(γ + ε)I + c·XᵀX`, factored for the current `c` when dense.
enum System {
    Dense {
        gram: DMatrix<f64>,
        factor: Option<(f64, Cholesky<f64, Dyn>)>,
    },
    MatrixFree,
}

/// The `w` sub-problem at fixed `λ`, split as `u = Xw`:
/// `f(w) = (γ/2)‖w‖² + (β/2)‖1 − Y X w‖²`, `g(u) = Σ_i [y_i(λ − u_i)]₊`.
struct WSolver<'a> {
    ds: &'a Dataset,
    obj: Objective,
    signs: Vec<f64>,
    /// `Xᵀy`
    xty: Vec<f64>,
    /// Proximal weight keeping the `w` system definite when `γ = 0`.
    eps: f64,
    system: System,
}

/// ADMM iterate carried between calls (scaled dual form).
struct AdmmState {
    u: Vec<f64>,
    v: Vec<f64>,
    rho: f64,
}

impl<'a> WSolver<'a> {
    fn new(ds: &'a Dataset, obj: Objective) -> Self {
        let d = ds.dim();
        let signs: Vec<f64> = ds.examples().iter().map(|e| e.sign()).collect();
        let mut xty = vec![0.0; d];
        for (ex, &y) in ds.examples().iter().zip(&signs) {
            ex.features.axpy(y, &mut xty);
        }
        let mean_sq = ds.examples().iter().map(|e| e.features.squared_norm()).sum::<f64>()
            / (d.max(1) as f64);
        let eps = if obj.gamma > 0.0 { 0.0 } else { 1e-6 * mean_sq.max(1.0) };
        let system = if d <= DENSE_DIM_LIMIT {
            let mut gram = DMatrix::<f64>::zeros(d, d);
            for ex in ds.examples() {
                for (i, a) in ex.features.iter() {
                    for (j, b) in ex.features.iter() {
                        gram[(i, j)] += a * b;
                    }
                }
            }
            System::Dense { gram, factor: None }
        } else {
            System::MatrixFree
        };
        WSolver {
            ds,
            obj,
            signs,
            xty,
            eps,
            system,
        }
    }

    fn scores(&self, w: &[f64]) -> Vec<f64> {
        self.ds.examples().iter().map(|e| e.features.dot(w)).collect()
    }

    fn transpose_times(&self, a: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ds.dim()];
        for (ex, &c) in self.ds.examples().iter().zip(a) {
            if c != 0.0 {
                ex.features.axpy(c, &mut out);
            }
        }
        out
    }

    fn objective(&self, w: &[f64], scores: &[f64], lambda: f64) -> f64 {
        let reg = 0.5 * self.obj.gamma * w.iter().map(|a| a * a).sum::<f64>();
        let data: f64 = scores
            .iter()
            .zip(&self.signs)
            .map(|(&s, &y)| (y * (lambda - s)).max(0.0) + 0.5 * self.obj.beta * (1.0 - y * s).powi(2))
            .sum();
        reg + data
    }

    /// Solves `((γ + ε)I + c·XᵀX) w = rhs`, starting CG from `warm`.
    fn solve(&mut self, c: f64, rhs: &[f64], warm: &[f64]) -> Vec<f64> {
        let shift = self.obj.gamma + self.eps;
        match &mut self.system {
            System::Dense { gram, factor } => {
                if factor.as_ref().is_none_or(|(fc, _)| *fc != c) {
                    let mut m = gram.clone() * c;
                    for i in 0..m.nrows() {
                        m[(i, i)] += shift;
                    }
                    let chol = Cholesky::new(m).expect("shifted Gram matrix is positive definite");
                    *factor = Some((c, chol));
                }
                let (_, chol) = factor.as_ref().expect("factored above");
                chol.solve(&DVector::from_column_slice(rhs)).as_slice().to_vec()
            }
            System::MatrixFree => {
                let ds = self.ds;
                let apply = |p: &[f64]| {
                    let mut out: Vec<f64> = p.iter().map(|x| shift * x).collect();
                    for ex in ds.examples() {
                        let s = ex.features.dot(p);
                        if s != 0.0 {
                            ex.features.axpy(c * s, &mut out);
                        }
                    }
                    out
                };
                conjugate_gradient(apply, rhs, warm, 1e-12, CG_MAX_ITERS)
            }
        }
    }

    fn fresh_state(&self, w0: &[f64]) -> AdmmState {
        AdmmState {
            u: self.scores(w0),
            v: vec![0.0; self.ds.len()],
            rho: self.obj.beta.max(1e-8),
        }
    }

    /// ADMM from `state`; keeps the best iterate, starting with `w_start`.
    fn run(
        &mut self,
        lambda: f64,
        w_start: &[f64],
        state: &mut AdmmState,
        tol: f64,
        max_iters: usize,
    ) -> SubproblemResult {
        let n = self.ds.len() as f64;
        let d = self.ds.dim() as f64;
        let beta = self.obj.beta;
        let start_scores = self.scores(w_start);
        let mut best_w = w_start.to_vec();
        let mut best_f = self.objective(w_start, &start_scores, lambda);
        let mut w = w_start.to_vec();
        let mut last_f = f64::INFINITY;
        let (mut r_norm, mut s_norm) = (f64::INFINITY, f64::INFINITY);
        let mut rho_updates = 0;
        let mut iterations = 0;
        let mut converged = false;

        while iterations < max_iters {
            iterations += 1;
            let rho = state.rho;
            let diff: Vec<f64> = state.u.iter().zip(&state.v).map(|(u, v)| u - v).collect();
            let mut rhs = self.transpose_times(&diff);
            for ((r, &b), &wp) in rhs.iter_mut().zip(&self.xty).zip(&w) {
                *r = rho * *r + beta * b + self.eps * wp;
            }
            w = self.solve(beta + rho, &rhs, &w);
            let s = self.scores(&w);

            let mut du = vec![0.0; s.len()];
            let mut primal = vec![0.0; s.len()];
            for i in 0..s.len() {
                let u_new = hinge_prox(s[i] + state.v[i], self.signs[i], lambda, rho);
                du[i] = u_new - state.u[i];
                state.u[i] = u_new;
                primal[i] = s[i] - u_new;
                state.v[i] += primal[i];
            }
            r_norm = norm(&primal);
            s_norm = rho * norm(&self.transpose_times(&du));

            let f = self.objective(&w, &s, lambda);
            last_f = f;
            if f < best_f {
                best_f = f;
                best_w.copy_from_slice(&w);
            }

            let eps_pri = tol * (n.sqrt() + norm(&s).max(norm(&state.u)));
            let eps_dual = tol * (d.sqrt() + rho * norm(&self.transpose_times(&state.v)));
            if r_norm <= eps_pri && s_norm <= eps_dual {
                converged = true;
                break;
            }
            // Residual balancing; each change costs a refactorization.
            if rho_updates < MAX_RHO_UPDATES && iterations % 5 == 0 {
                let scale = if r_norm > 10.0 * s_norm {
                    2.0
                } else if s_norm > 10.0 * r_norm {
                    0.5
                } else {
                    1.0
                };
                if scale != 1.0 {
                    state.rho *= scale;
                    state.v.iter_mut().for_each(|v| *v /= scale);
                    rho_updates += 1;
                }
            }
        }
        // Within rounding of the best value, the latest iterate is the more
        // accurate minimizer.
        if last_f <= best_f + 4.0 * f64::EPSILON * best_f.abs() {
            best_w = w;
            best_f = last_f;
        }
        SubproblemResult {
            weights: best_w,
            objective: best_f,
            primal_residual: r_norm,
            dual_residual: s_norm,
            iterations,
            hit_cap: !converged,
        }
    }
}

fn conjugate_gradient(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    x0: &[f64],
    tol: f64,
    max_iters: usize,
) -> Vec<f64> {
    let mut x = x0.to_vec();
    let ax = apply(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr: f64 = r.iter().map(|a| a * a).sum();
    let stop = tol * tol * b.iter().map(|a| a * a).sum::<f64>().max(f64::MIN_POSITIVE);
    for _ in 0..max_iters {
        if rr <= stop {
            break;
        }
        let ap = apply(&p);
        let alpha = rr / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new: f64 = r.iter().map(|a| a * a).sum();
        let ratio = rr_new / rr;
        for i in 0..p.len() {
            p[i] = r[i] + ratio * p[i];
        }
        rr = rr_new;
    }
    x
}

/// Approximately minimizes, at fixed `λ`,
/// `Σ_i [y_i(λ − w·x_i)]₊ + (β/2) Σ_i (1 − y_i w·x_i)² + (γ/2)‖w‖²`
/// starting from `w0`. The returned weights never have a higher objective
/// than `w0`.
pub fn w_subproblem(
    ds: &Dataset,
    lambda: f64,
    obj: &Objective,
    w0: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<SubproblemResult> {
    obj.validate_for_training()?;
    if w0.len() != ds.dim() {
        return Err(Error::DimensionMismatch {
            expected: ds.dim(),
            found: w0.len(),
        });
    }
    ds.require_binary()?;
    if !lambda.is_finite() {
        return Err(Error::NonFinite(format!("threshold {lambda}")));
    }
    let mut solver = WSolver::new(ds, *obj);
    let mut state = solver.fresh_state(w0);
    Ok(solver.run(lambda, w0, &mut state, tol, max_iters))
}

/// Alternates an approximate `w` step with the exact `λ` step
/// `λ ← ½(c↑_{N⁻} + c↑_{N⁻+1})` until the relative objective change drops
/// below `outer_tol`.
pub fn train_batch(
    ds: &Dataset,
    cfg: &BatchConfig,
    init: Option<&LinearModel>,
) -> Result<(LinearModel, TrainReport)> {
    cfg.validate()?;
    ds.require_both_classes()?;
    let mut model = match init {
        Some(m) => {
            m.check_dim(ds)?;
            m.clone()
        }
        None => LinearModel::zeros(ds.dim()),
    };
    let obj = &cfg.objective;
    let mut report = TrainReport::new("batch", *obj);
    let mut current = objective_value(&model, ds, obj)?;
    report.trajectory.push(TrajectoryPoint {
        iteration: 0,
        objective: current,
        train_auc_risk: auc_risk(&score_dataset(&model, ds)?, TiePolicy::Half)?,
    });

    let mut solver = WSolver::new(ds, *obj);
    let mut state = solver.fresh_state(&model.weights);
    for outer in 1..=cfg.max_outer_iters {
        let step = solver.run(
            model.threshold,
            &model.weights,
            &mut state,
            cfg.inner_tol,
            cfg.inner_max_iters,
        );
        report.steps += step.iterations as u64;
        if step.hit_cap {
            report.warnings.push(format!(
                "outer iteration {outer}: w step stopped at the {}-iteration cap (residuals {:.3e} / {:.3e})",
                cfg.inner_max_iters, step.primal_residual, step.dual_residual
            ));
        }
        let candidate = LinearModel {
            weights: step.weights,
            threshold: model.threshold,
        };
        let samples = score_dataset(&candidate, ds)?;
        let candidate = LinearModel {
            threshold: optimal_threshold(&samples)?,
            ..candidate
        };
        let value = objective_value(&candidate, ds, obj)?;
        if !value.is_finite() || !candidate.is_finite() {
            return Err(Error::Divergence {
                step: outer as u64,
                reason: format!("objective became {value}"),
                last_finite: Box::new(model),
            });
        }
        if value > current + MONOTONICITY_SLACK {
            report.warnings.push(format!(
                "outer iteration {outer}: objective rose from {current} to {value}"
            ));
        }
        let change = (current - value).abs() / current.abs().max(1.0);
        model = candidate;
        current = value;
        report.trajectory.push(TrajectoryPoint {
            iteration: outer,
            objective: value,
            train_auc_risk: auc_risk(&samples, TiePolicy::Half)?,
        });
        if change < cfg.outer_tol {
            report.converged = true;
            break;
        }
    }
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hinge_prox_satisfies_optimality() {
        for &(y, lambda) in &[(1.0, 0.3), (-1.0, 0.3), (1.0, -2.0), (-1.0, 1.5)] {
            for &rho in &[0.1, 1.0, 10.0] {
                for k in -20..=20 {
                    let t = k as f64 * 0.37;
                    let u = hinge_prox(t, y, lambda, rho);
                    let f = |u: f64| (y * (lambda - u)).max(0.0) + 0.5 * rho * (u - t).powi(2);
                    for h in [1e-4, -1e-4] {
                        assert!(f(u) <= f(u + h) + 1e-12, "y={y} λ={lambda} ρ={rho} t={t}");
                    }
                }
            }
        }
    }

    #[test]
    fn conjugate_gradient_solves_spd_system() {
        let a = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        let b = [1.0, -2.0, 0.5];
        let apply = |p: &[f64]| (0..3).map(|i| (0..3).map(|j| a[i][j] * p[j]).sum()).collect();
        let x = conjugate_gradient(apply, &b, &[0.0; 3], 1e-14, 50);
        for i in 0..3 {
            let ax: f64 = (0..3).map(|j| a[i][j] * x[j]).sum();
            assert!((ax - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn single_example_matches_closed_form() {
        // Hinge inactive for y = +1 when λ is far below the score.
        let x = vec![0.6, -0.8, 0.3];
        let ds = Dataset::from_dense(std::slice::from_ref(&x), &[1]).unwrap();
        let obj = Objective::new(2.0, 0.5);
        let r = w_subproblem(&ds, -100.0, &obj, &[0.0; 3], 1e-12, 10_000).unwrap();
        let norm2: f64 = x.iter().map(|v| v * v).sum();
        for (w, xi) in r.weights.iter().zip(&x) {
            let expected = obj.beta * xi / (obj.gamma + obj.beta * norm2);
            assert!((w - expected).abs() < 1e-8);
        }
        assert!(!r.hit_cap);
    }

    #[test]
    fn positives_only_reduce_to_ridge_least_squares() {
        let rows = vec![
            vec![1.0, 0.2, -0.3],
            vec![0.5, 1.0, 0.0],
            vec![-0.2, 0.4, 1.0],
            vec![0.9, -0.6, 0.3],
            vec![0.1, 0.1, 0.8],
        ];
        let ds = Dataset::from_dense(&rows, &[1; 5]).unwrap();
        let obj = Objective::new(1.5, 0.1);
        let r = w_subproblem(&ds, -1e6, &obj, &[0.0; 3], 1e-13, 50_000).unwrap();

        // Normal equations (βXᵀX + γI) w = βXᵀ1 solved by Gaussian elimination.
        let mut a = [[0.0f64; 4]; 3];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] = obj.beta * rows.iter().map(|r| r[i] * r[j]).sum::<f64>();
            }
            a[i][i] += obj.gamma;
            a[i][3] = obj.beta * rows.iter().map(|r| r[i]).sum::<f64>();
        }
        for c in 0..3 {
            let p = (c..3).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
            a.swap(c, p);
            for r in 0..3 {
                if r != c {
                    let f = a[r][c] / a[c][c];
                    for k in c..4 {
                        a[r][k] -= f * a[c][k];
                    }
                }
            }
        }
        for i in 0..3 {
            let expected = a[i][3] / a[i][i];
            assert!((r.weights[i] - expected).abs() < 1e-7, "{i}: {} vs {expected}", r.weights[i]);
        }
    }

    #[test]
    fn optimal_start_is_returned_unchanged() {
        let ds = crate::synthetic::gaussian_blobs(40, 3, 1.0, 2);
        let obj = Objective::new(1.0, 0.5);
        let first = w_subproblem(&ds, 0.1, &obj, &[0.0; 3], 1e-12, 20_000).unwrap();
        let again = w_subproblem(&ds, 0.1, &obj, &first.weights, 1e-6, 20_000).unwrap();
        assert!(again.objective <= first.objective);
        assert!((again.objective - first.objective).abs() <= 1e-9 * first.objective);
        for (a, b) in again.weights.iter().zip(&first.weights) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn never_worse_than_start() {
        let ds = crate::synthetic::gaussian_blobs(30, 2, 0.5, 4);
        let obj = Objective::new(0.5, 0.2);
        let w0 = [0.7, -0.1];
        let start = {
            let m = LinearModel {
                weights: w0.to_vec(),
                threshold: 0.3,
            };
            objective_value(&m, &ds, &obj).unwrap()
        };
        let r = w_subproblem(&ds, 0.3, &obj, &w0, 1e-3, 1).unwrap();
        assert!(r.objective <= start);
    }

    #[test]
    fn rejects_invalid_inputs() {
        let ds = crate::synthetic::gaussian_blobs(10, 2, 1.0, 0);
        let cfg = BatchConfig::new(Objective::new(0.0, 1.0));
        assert!(matches!(train_batch(&ds, &cfg, None), Err(Error::Validation(_))));
        let single = Dataset::from_dense(&[vec![1.0], vec![2.0]], &[1, 1]).unwrap();
        let cfg = BatchConfig::new(Objective::new(1.0, 1.0));
        assert!(matches!(train_batch(&single, &cfg, None), Err(Error::SingleClass { .. })));
    }

    #[test]
    fn large_gamma_drives_weights_to_zero() {
        let ds = crate::synthetic::gaussian_blobs(50, 3, 1.0, 1);
        let beta = 0.4;
        let cfg = BatchConfig::new(Objective::new(beta, 1e8));
        let (model, report) = train_batch(&ds, &cfg, None).unwrap();
        assert!(model.squared_norm().sqrt() < 1e-6);
        let f = report.final_objective().unwrap();
        assert!((f - 50.0 * beta / 2.0).abs() < 1e-4);
    }

    #[test]
    fn matrix_free_path_matches_dense_path() {
        let small = crate::synthetic::gaussian_blobs(40, 3, 0.8, 6);
        let wide = small.clone().with_dim(DENSE_DIM_LIMIT + 200).unwrap();
        let obj = Objective::new(1.0, 0.1);
        let a = w_subproblem(&small, 0.2, &obj, &[0.0; 3], 1e-10, 20_000).unwrap();
        let b = w_subproblem(&wide, 0.2, &obj, &vec![0.0; wide.dim()], 1e-10, 20_000).unwrap();
        assert!((a.objective - b.objective).abs() < 1e-7 * a.objective);
        for (x, y) in a.weights.iter().zip(&b.weights) {
            assert!((x - y).abs() < 1e-5);
        }
        assert!(b.weights[3..].iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn zero_gamma_is_supported() {
        let ds = crate::synthetic::gaussian_blobs(60, 2, 1.0, 7);
        let (model, report) = train_batch(&ds, &BatchConfig::new(Objective::new(1.0, 0.0)), None).unwrap();
        assert!(model.is_finite());
        assert!(report.final_objective().unwrap() < 30.0);
    }
}
