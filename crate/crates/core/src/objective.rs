//! Average negative log-likelihood `G_n(θ) = -ℓ_n(θ)/n`, its derivatives and
//! the elastic-net objective.
//!
//! Sums run over observations in index order so results do not depend on how
//! callers schedule work.

use crate::design::{ModelData, PenaltySpec};
use crate::error::{Error, Result};
use crate::family::{interval_grad_hess, log_interval_prob, IntervalDerivs, IntervalEndpoints};
use crate::special::CompensatedSum;
use nalgebra::DMatrix;

/// Cached linear predictors `η_i = Z_i θ + m_i` for one θ.
#[derive(Debug, Clone)]
pub struct ObjectiveState {
    pub theta: Vec<f64>,
    pub eta: Vec<IntervalEndpoints>,
    /// `G_n(θ)`; `+∞` when some observation has an empty interval.
    pub value: f64,
}

impl ObjectiveState {
    pub fn new(model: &ModelData, theta: &[f64]) -> Self {
        let eta: Vec<IntervalEndpoints> = model.blocks().iter().map(|b| b.endpoints(theta)).collect();
        let value = value_from_eta(model, &eta);
        ObjectiveState { theta: theta.to_vec(), eta, value }
    }

    pub fn is_feasible(&self) -> bool {
        self.value.is_finite()
    }

    /// Per-observation gradient and Hessian of `ψ` at the cached `η`.
    pub fn interval_derivs(&self, model: &ModelData) -> Result<Vec<IntervalDerivs>> {
        self.eta
            .iter()
            .map(|&e| interval_grad_hess(model.family(), e))
            .collect()
    }
}

fn value_from_eta(model: &ModelData, eta: &[IntervalEndpoints]) -> f64 {
    let mut acc = CompensatedSum::default();
    for &e in eta {
        let lp = log_interval_prob(model.family(), e);
        if lp == f64::NEG_INFINITY || lp.is_nan() {
            return f64::INFINITY;
        }
        acc.add(lp);
    }
    -acc.value() / model.n_obs() as f64
}

fn check_dim(model: &ModelData, theta: &[f64]) -> Result<()> {
    if theta.len() != model.dim() {
        return Err(Error::Dimension(format!(
            "θ has length {} but the model dimension is {}",
            theta.len(),
            model.dim()
        )));
    }
    Ok(())
}

/// `G_n(θ)`; `+∞` if any observation has an empty or inverted interval at θ.
pub fn neg_loglik(model: &ModelData, theta: &[f64]) -> f64 {
    assert_eq!(theta.len(), model.dim(), "θ dimension mismatch");
    ObjectiveState::new(model, theta).value
}

fn feasible_derivs(model: &ModelData, theta: &[f64]) -> Result<Vec<IntervalDerivs>> {
    check_dim(model, theta)?;
    let state = ObjectiveState::new(model, theta);
    if !state.is_feasible() {
        return Err(Error::Domain("derivatives requested at an infeasible θ".into()));
    }
    state.interval_derivs(model)
}

/// `∇G_n(θ) = -(1/n) Σ Z_iᵀ g(η_i)`.
pub fn neg_loglik_grad(model: &ModelData, theta: &[f64]) -> Result<Vec<f64>> {
    let derivs = feasible_derivs(model, theta)?;
    Ok(grad_from_derivs(model, &derivs))
}

pub(crate) fn grad_from_derivs(model: &ModelData, derivs: &[IntervalDerivs]) -> Vec<f64> {
    let mut grad = vec![0.0; model.dim()];
    for (blk, dv) in model.blocks().iter().zip(derivs) {
        for (j, v) in blk.a.z.iter() {
            grad[j] -= v * dv.g[0];
        }
        for (j, v) in blk.b.z.iter() {
            grad[j] -= v * dv.g[1];
        }
    }
    let n = model.n_obs() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    grad
}

/// `∇²G_n(θ) = -(1/n) Σ Z_iᵀ H(η_i) Z_i`; positive semidefinite.
pub fn neg_loglik_hess(model: &ModelData, theta: &[f64]) -> Result<DMatrix<f64>> {
    let derivs = feasible_derivs(model, theta)?;
    let d = model.dim();
    let mut hess = DMatrix::<f64>::zeros(d, d);
    for (blk, dv) in model.blocks().iter().zip(&derivs) {
        let rows = [(&blk.a.z, 0usize), (&blk.b.z, 1usize)];
        for &(zr, r) in &rows {
            for &(zc, c) in &rows {
                let h = dv.h[r][c];
                if h == 0.0 {
                    continue;
                }
                for (j, vj) in zr.iter() {
                    for (k, vk) in zc.iter() {
                        hess[(j, k)] -= vj * h * vk;
                    }
                }
            }
        }
    }
    hess /= model.n_obs() as f64;
    // Exact symmetry; the two triangles accumulate in different orders.
    for j in 0..d {
        for k in 0..j {
            let s = 0.5 * (hess[(j, k)] + hess[(k, j)]);
            hess[(j, k)] = s;
            hess[(k, j)] = s;
        }
    }
    Ok(hess)
}

/// `G_n(θ) + λ1 Σ w_j|θ_j| + (λ2/2)‖θ‖²`; `+∞` when infeasible or out of bounds.
pub fn penalized_obj(model: &ModelData, theta: &[f64], pen: &PenaltySpec) -> f64 {
    if !pen.is_feasible(theta) {
        return f64::INFINITY;
    }
    let g = neg_loglik(model, theta);
    if !g.is_finite() {
        return f64::INFINITY;
    }
    g + pen.value(theta)
}
