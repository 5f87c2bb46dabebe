//! Observed information, Wald and likelihood-ratio tests, BIC and
//! category probabilities at a new predictor row.

use crate::design::{category_blocks, CategoryGrid, CoordRole, ModelData, ModelKind, Scale};
use crate::error::{Error, Result};
use crate::family::log_interval_prob;
use crate::objective::neg_loglik_hess;
use crate::prox_newton::FitResult;
use crate::special::ndtr;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Relative eigenvalue threshold for the numerical rank of the information.
const RANK_TOL: f64 = 1e-10;

/// `-∇²ℓ_n(θ̂) = n ∇²G_n(θ̂)`.
pub fn observed_information(model: &ModelData, theta_hat: &[f64]) -> Result<DMatrix<f64>> {
    Ok(neg_loglik_hess(model, theta_hat)? * model.n_obs() as f64)
}

/// Two-sided normal p-value `2Φ(-|z|)`.
pub fn two_sided_p(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    (2.0 * ndtr(-z.abs())).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceTable {
    pub labels: Vec<String>,
    pub estimates: Vec<f64>,
    pub null_values: Vec<f64>,
    /// `None` where the information is singular.
    pub std_errors: Vec<Option<f64>>,
    pub z_values: Vec<Option<f64>>,
    pub p_values: Vec<Option<f64>>,
    pub loglik: f64,
    pub bic: f64,
    pub n_obs: usize,
    /// Numerical rank of the observed information.
    pub rank: usize,
    pub dim: usize,
}

impl InferenceTable {
    pub fn is_full_rank(&self) -> bool {
        self.rank == self.dim
    }
}

fn refuse_penalized(fit: &FitResult) -> Result<()> {
    if fit.is_penalized() {
        return Err(Error::PenalizedInference { lambda1: fit.lambda1, lambda2: fit.lambda2 });
    }
    Ok(())
}

fn numerical_rank(info: &DMatrix<f64>) -> usize {
    let eig = SymmetricEigen::new(info.clone());
    let top = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if top == 0.0 {
        return 0;
    }
    eig.eigenvalues.iter().filter(|&&v| v > RANK_TOL * top).count()
}

/// Inverse of the observed information, or the numerical rank when it is singular.
pub fn inverse_information(info: &DMatrix<f64>) -> std::result::Result<DMatrix<f64>, usize> {
    let d = info.nrows();
    let rank = numerical_rank(info);
    if rank < d {
        return Err(rank);
    }
    match info.clone().cholesky() {
        Some(ch) => Ok(ch.inverse()),
        None => Err(rank.min(d.saturating_sub(1))),
    }
}

/// Wald table at an unpenalized fit. `null_values` defaults to 0 except for
/// the inverse-scale coordinate, whose default null is 1.
pub fn wald_table(model: &ModelData, fit: &FitResult, null_values: Option<&[f64]>) -> Result<InferenceTable> {
    refuse_penalized(fit)?;
    let d = model.dim();
    if fit.theta_hat.len() != d {
        return Err(Error::Dimension("fit does not belong to this model".into()));
    }
    let nulls: Vec<f64> = match null_values {
        Some(v) if v.len() != d => {
            return Err(Error::Dimension(format!("{} null values for {d} coordinates", v.len())))
        }
        Some(v) => v.to_vec(),
        None => model.roles().iter().map(|r| r.default_null()).collect(),
    };
    let info = observed_information(model, &fit.theta_hat)?;
    let (std_errors, rank): (Vec<Option<f64>>, usize) = match inverse_information(&info) {
        Ok(inv) => ((0..d).map(|j| Some(inv[(j, j)].sqrt())).collect(), d),
        Err(rank) => (vec![None; d], rank),
    };
    let z_values: Vec<Option<f64>> = (0..d)
        .map(|j| std_errors[j].map(|se| (fit.theta_hat[j] - nulls[j]) / se))
        .collect();
    let p_values = z_values.iter().map(|z| z.map(two_sided_p)).collect();
    let loglik = fit.loglik();
    Ok(InferenceTable {
        labels: model.labels().to_vec(),
        estimates: fit.theta_hat.clone(),
        null_values: nulls,
        std_errors,
        z_values,
        p_values,
        loglik,
        bic: bic_value(loglik, model.n_obs(), d),
        n_obs: model.n_obs(),
        rank,
        dim: d,
    })
}

/// Estimates of `σ` and `β = θ_{2:}/θ_1` for the unknown-scale interval
/// regression, with delta-method standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleTable {
    pub labels: Vec<String>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<Option<f64>>,
}

pub fn natural_scale_table(model: &ModelData, fit: &FitResult) -> Result<ScaleTable> {
    refuse_penalized(fit)?;
    if !matches!(model.kind(), ModelKind::Interval { scale: Scale::Unknown, .. }) {
        return Err(Error::Unsupported("natural-scale table needs an unknown-scale interval model".into()));
    }
    let theta = &fit.theta_hat;
    let d = theta.len();
    let t1 = theta[0];
    if !(t1 > 0.0) {
        return Err(Error::Domain("inverse scale estimate is not positive".into()));
    }
    // Jacobian of (1/θ1, θ2/θ1, …) with respect to θ.
    let mut jac = DMatrix::<f64>::zeros(d, d);
    jac[(0, 0)] = -1.0 / (t1 * t1);
    for j in 1..d {
        jac[(j, 0)] = -theta[j] / (t1 * t1);
        jac[(j, j)] = 1.0 / t1;
    }
    let mut estimates = vec![1.0 / t1];
    estimates.extend(theta[1..].iter().map(|t| t / t1));
    let mut labels = vec!["sigma".to_string()];
    labels.extend(model.labels()[1..].iter().cloned());
    let info = observed_information(model, theta)?;
    let std_errors = match inverse_information(&info) {
        Ok(inv) => {
            let cov = &jac * inv * jac.transpose();
            (0..d).map(|j| Some(cov[(j, j)].max(0.0).sqrt())).collect()
        }
        Err(_) => vec![None; d],
    };
    Ok(ScaleTable { labels, estimates, std_errors })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrtResult {
    pub stat: f64,
    pub df: usize,
    pub p: f64,
}

/// Slack allowed when the smaller model's log-likelihood exceeds the larger's.
const NESTING_SLACK: f64 = 1e-8;

/// Chi-square upper tail.
pub fn chi_square_sf(stat: f64, df: usize) -> Result<f64> {
    if df == 0 {
        return Err(Error::InvalidInput("chi-square test needs df >= 1".into()));
    }
    if stat <= 0.0 {
        return Ok(1.0);
    }
    let dist = ChiSquared::new(df as f64).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(dist.sf(stat))
}

/// Likelihood-ratio test of `fit_small` nested in `fit_large`.
pub fn lrt(fit_small: &FitResult, fit_large: &FitResult, df: usize) -> Result<LrtResult> {
    refuse_penalized(fit_small)?;
    refuse_penalized(fit_large)?;
    let raw = 2.0 * (fit_large.loglik() - fit_small.loglik());
    lrt_from_stat(raw, df)
}

/// As [`lrt`], from `2(ℓ̂_large - ℓ̂_small)` directly.
pub fn lrt_from_stat(raw: f64, df: usize) -> Result<LrtResult> {
    if raw < -2.0 * NESTING_SLACK {
        return Err(Error::NotNested(raw));
    }
    let stat = raw.max(0.0);
    Ok(LrtResult { stat, df, p: chi_square_sf(stat, df)? })
}

/// `d_free log n - 2ℓ̂` from raw inputs.
pub fn bic_value(loglik: f64, n: usize, d_free: usize) -> f64 {
    if d_free == 0 {
        return -2.0 * loglik;
    }
    d_free as f64 * (n as f64).ln() - 2.0 * loglik
}

pub fn bic(fit: &FitResult, n: usize, d_free: usize) -> Result<f64> {
    refuse_penalized(fit)?;
    Ok(bic_value(fit.loglik(), n, d_free))
}

/// Category probabilities at predictor row `x`; the categories tile the support.
pub fn predict_probs(model: &ModelData, theta: &[f64], x: &[f64], grid: &CategoryGrid) -> Result<Vec<f64>> {
    if theta.len() != model.dim() {
        return Err(Error::Dimension("θ does not match the model".into()));
    }
    if let Some(j) = model.roles().iter().position(|r| matches!(r, CoordRole::InverseScale)) {
        if !(theta[j] > 0.0) {
            return Err(Error::Infeasible("inverse scale must be positive".into()));
        }
    }
    let blocks = category_blocks(model, x, grid)?;
    let mut probs = Vec::with_capacity(blocks.len());
    for blk in &blocks {
        let e = blk.endpoints(theta);
        let lp = log_interval_prob(model.family(), e);
        if lp.is_nan() || (lp == f64::NEG_INFINITY && !e.lower.lt(e.upper)) {
            return Err(Error::Infeasible("θ gives an empty category".into()));
        }
        probs.push(lp.exp());
    }
    Ok(probs)
}
