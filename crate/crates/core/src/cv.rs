//! Regularization paths and K-fold cross-validation.

use crate::design::{BasisKind, CategoryGrid, CoordRole, ModelData, ModelKind, PenaltySpec, Response, Scale};
use crate::error::{Error, Result};
use crate::family::ExtReal;
use crate::inference::predict_probs;
use crate::objective::neg_loglik_grad;
use crate::prox_newton::{fit, fit_restricted, FitResult, SolverOptions};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Head of the regularization path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaMax {
    pub value: f64,
    /// Fit with every penalized coordinate held at 0.
    pub theta_restricted: Vec<f64>,
}

/// `max_j |∇_j G_n(θ_r)| / w_j` over penalized coordinates, with `θ_r` the
/// fit that holds those coordinates at 0.
pub fn lambda_max(model: &ModelData, pen: &PenaltySpec, opts: &SolverOptions) -> Result<LambdaMax> {
    pen.validate(model.dim())?;
    let penalized: Vec<bool> = pen.l1_weight.iter().map(|&w| w > 0.0).collect();
    if !penalized.iter().any(|&p| p) {
        return Err(Error::InvalidInput("no penalized coordinates".into()));
    }
    let mut start = model.start().to_vec();
    for (s, &p) in start.iter_mut().zip(&penalized) {
        if p {
            *s = 0.0;
        }
    }
    let restricted_pen = pen.clone().with_lambdas(0.0, pen.lambda2);
    let restricted = fit_restricted(model, &restricted_pen, opts, Some(&start), &penalized)?;
    let grad = neg_loglik_grad(model, &restricted.theta_hat)?;
    let value = (0..model.dim())
        .filter(|&j| penalized[j])
        .map(|j| grad[j].abs() / pen.l1_weight[j])
        .fold(0.0, f64::max);
    Ok(LambdaMax { value, theta_restricted: restricted.theta_hat })
}

/// `n_lambda` log-spaced values from `lambda_max` down to `lambda_max · ratio`.
pub fn log_grid(lambda_max: f64, n_lambda: usize, ratio: f64) -> Result<Vec<f64>> {
    if n_lambda == 0 {
        return Err(Error::InvalidInput("n_lambda must be at least 1".into()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidInput(format!("lambda ratio {ratio} must lie in (0, 1)")));
    }
    if !(lambda_max >= 0.0 && lambda_max.is_finite()) {
        return Err(Error::InvalidInput("lambda_max must be finite and nonnegative".into()));
    }
    if n_lambda == 1 {
        return Ok(vec![lambda_max]);
    }
    let hi = lambda_max.ln();
    let step = ratio.ln() / (n_lambda - 1) as f64;
    Ok((0..n_lambda)
        .map(|k| if k == 0 { lambda_max } else { (hi + step * k as f64).exp() })
        .collect())
}

pub fn lambda_path(
    model: &ModelData,
    pen: &PenaltySpec,
    n_lambda: usize,
    ratio: f64,
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    log_grid(lambda_max(model, pen, opts)?.value, n_lambda, ratio)
}

/// Fits along `grid` (values of λ1; λ2 from `pen`), optionally warm-starting
/// each fit at the previous solution.
pub fn fit_path(
    model: &ModelData,
    pen: &PenaltySpec,
    grid: &[f64],
    opts: &SolverOptions,
    warm_start: bool,
    theta0: Option<&[f64]>,
) -> Vec<Result<FitResult>> {
    let mut out = Vec::with_capacity(grid.len());
    let mut prev: Option<Vec<f64>> = theta0.map(|t| t.to_vec());
    for &lambda in grid {
        let p = pen.clone().with_lambdas(lambda, pen.lambda2);
        let start = if warm_start { prev.as_deref() } else { theta0 };
        let r = fit(model, &p, opts, start);
        if let Ok(f) = &r {
            prev = Some(f.theta_hat.clone());
        }
        out.push(r);
    }
    out
}

fn linear_predictor(model: &ModelData, theta: &[f64], row: usize) -> f64 {
    let x = model.predictors();
    model
        .roles()
        .iter()
        .enumerate()
        .filter_map(|(j, r)| match r {
            CoordRole::Predictor { column } | CoordRole::Intercept { column } => Some(x[(row, *column)] * theta[j]),
            _ => None,
        })
        .sum()
}

fn inside(loc: f64, lower: ExtReal, upper: ExtReal) -> bool {
    let above = match lower {
        ExtReal::NegInf => true,
        ExtReal::Finite(a) => loc >= a,
        ExtReal::PosInf => false,
    };
    let below = match upper {
        ExtReal::PosInf => true,
        ExtReal::Finite(b) => loc < b,
        ExtReal::NegInf => false,
    };
    above && below
}

fn positive_coordinate(model: &ModelData, theta: &[f64], role: CoordRole, what: &str) -> Result<f64> {
    let j = model.roles().iter().position(|&r| r == role).expect("role present");
    if !(theta[j] > 0.0) {
        return Err(Error::Domain(format!("{what} estimate {} is not positive", theta[j])));
    }
    Ok(theta[j])
}

/// Fraction of `rows` whose predicted latent location lies outside the
/// observed interval. For the unknown-scale model the location is
/// `xᵀθ_{2:}/θ_1`; for survival models it is on the log-time scale.
pub fn misclassification_rate(model: &ModelData, theta: &[f64], rows: &[usize]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("no held-out observations".into()));
    }
    if theta.len() != model.dim() {
        return Err(Error::Dimension("θ does not match the model".into()));
    }
    let misses = match (model.kind(), model.response()) {
        (ModelKind::Interval { scale, .. }, Response::Interval { lower, upper }) => {
            let div = match scale {
                Scale::KnownOne => 1.0,
                Scale::Unknown => positive_coordinate(model, theta, CoordRole::InverseScale, "inverse scale")?,
            };
            rows.iter()
                .filter(|&&i| !inside(linear_predictor(model, theta, i) / div, lower[i], upper[i]))
                .count()
        }
        (ModelKind::Survival { basis, .. }, Response::Survival { lower, upper }) => {
            let div = match basis {
                BasisKind::Exponential => 1.0,
                BasisKind::Weibull => positive_coordinate(model, theta, CoordRole::Basis { index: 0 }, "shape")?,
                BasisKind::Custom { .. } => {
                    return Err(Error::Unsupported("held-out loss for a custom survival basis".into()))
                }
            };
            rows.iter()
                .filter(|&&i| {
                    let lo = if lower[i] == 0.0 { ExtReal::NegInf } else { ExtReal::Finite(lower[i].ln()) };
                    let hi = match upper[i] {
                        ExtReal::Finite(h) => ExtReal::Finite(h.ln()),
                        other => other,
                    };
                    !inside(linear_predictor(model, theta, i) / div, lo, hi)
                })
                .count()
        }
        (ModelKind::Cumulative { .. }, Response::Categorical { y }) => {
            let x = model.predictors();
            let mut misses = 0;
            for &i in rows {
                let row: Vec<f64> = x.row(i).iter().copied().collect();
                let probs = predict_probs(model, theta, &row, &CategoryGrid::Ordinal)?;
                let mode = probs
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (k, &p)| if p > best.1 { (k, p) } else { best })
                    .0;
                misses += usize::from(mode + 1 != y[i]);
            }
            misses
        }
        _ => return Err(Error::Unsupported(format!("held-out loss for model class {}", model.kind()))),
    };
    Ok(misses as f64 / rows.len() as f64)
}

/// Seeded partition of `0..n` into `k` folds whose sizes differ by at most one.
pub fn fold_assignments(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 || k > n {
        return Err(Error::InvalidInput(format!("need 2 <= K <= n, got K={k}, n={n}")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        folds[i] = pos % k;
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub k_folds: usize,
    pub seed: u64,
    pub warm_start: bool,
    /// Select the largest λ within one standard error of the minimum.
    pub one_se: bool,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions { k_folds: 5, seed: 1, warm_start: true, one_se: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub lambdas: Vec<f64>,
    /// `NaN` where every fold failed.
    pub mean_loss: Vec<f64>,
    pub se_loss: Vec<f64>,
    /// Valid folds per λ.
    pub n_valid: Vec<usize>,
    pub fold_assignments: Vec<usize>,
    pub selected_index: usize,
    pub selected_lambda: f64,
    /// Minimizing λ, also when the one-standard-error rule picked another.
    pub min_lambda: f64,
    /// `(λ, fold)` cells whose fit failed and were excluded.
    pub invalid_cells: usize,
    /// Cells whose fit stopped without meeting the tolerance.
    pub unconverged_cells: usize,
}

fn fold_losses(
    model: &ModelData,
    pen: &PenaltySpec,
    grid: &[f64],
    folds: &[usize],
    fold: usize,
    opts: &SolverOptions,
    warm_start: bool,
) -> Vec<(Option<f64>, bool)> {
    let (test, train): (Vec<usize>, Vec<usize>) = (0..folds.len()).partition(|&i| folds[i] == fold);
    let train_model = match model.subset(&train) {
        Ok(m) => m,
        Err(_) => return vec![(None, false); grid.len()],
    };
    fit_path(&train_model, pen, grid, opts, warm_start, None)
        .into_iter()
        .map(|r| match r {
            Ok(f) => (misclassification_rate(model, &f.theta_hat, &test).ok(), f.converged),
            Err(_) => (None, false),
        })
        .collect()
}

/// K-fold cross-validation over `grid` (values of λ1). Folds run in parallel
/// and merge in fold order, so results do not depend on the thread count.
pub fn kfold_cv(
    model: &ModelData,
    pen: &PenaltySpec,
    grid: &[f64],
    cv: &CvOptions,
    opts: &SolverOptions,
) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty λ grid".into()));
    }
    if grid.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(Error::InvalidInput("λ grid values must be finite and nonnegative".into()));
    }
    opts.validate()?;
    pen.validate(model.dim())?;
    let folds = fold_assignments(model.n_obs(), cv.k_folds, cv.seed)?;
    let per_fold: Vec<Vec<(Option<f64>, bool)>> = (0..cv.k_folds)
        .into_par_iter()
        .map(|k| fold_losses(model, pen, grid, &folds, k, opts, cv.warm_start))
        .collect();
    let mut mean_loss = Vec::with_capacity(grid.len());
    let mut se_loss = Vec::with_capacity(grid.len());
    let mut n_valid = Vec::with_capacity(grid.len());
    let mut invalid_cells = 0;
    let mut unconverged_cells = 0;
    for l in 0..grid.len() {
        let vals: Vec<f64> = per_fold.iter().filter_map(|f| f[l].0).collect();
        invalid_cells += cv.k_folds - vals.len();
        unconverged_cells += per_fold.iter().filter(|f| f[l].0.is_some() && !f[l].1).count();
        let m = vals.len();
        n_valid.push(m);
        if m == 0 {
            mean_loss.push(f64::NAN);
            se_loss.push(f64::NAN);
            continue;
        }
        let mean = vals.iter().sum::<f64>() / m as f64;
        let se = if m > 1 {
            (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64 / m as f64).sqrt()
        } else {
            0.0
        };
        mean_loss.push(mean);
        se_loss.push(se);
    }
    let best = select_min(grid, &mean_loss)
        .ok_or_else(|| Error::Domain("every cross-validation fit failed".into()))?;
    let selected_index = if cv.one_se {
        let limit = mean_loss[best] + se_loss[best];
        (0..grid.len())
            .filter(|&l| mean_loss[l] <= limit)
            .fold(best, |acc, l| if grid[l] > grid[acc] { l } else { acc })
    } else {
        best
    };
    Ok(CvResult {
        lambdas: grid.to_vec(),
        mean_loss,
        se_loss,
        n_valid,
        fold_assignments: folds,
        selected_index,
        selected_lambda: grid[selected_index],
        min_lambda: grid[best],
        invalid_cells,
        unconverged_cells,
    })
}

/// Index of the minimal loss; ties go to the larger λ.
fn select_min(grid: &[f64], loss: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for l in 0..grid.len() {
        if loss[l].is_nan() {
            continue;
        }
        best = match best {
            None => Some(l),
            Some(b) if loss[l] < loss[b] || (loss[l] == loss[b] && grid[l] > grid[b]) => Some(l),
            keep => keep,
        };
    }
    best
}
