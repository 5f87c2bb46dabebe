//! Comparators that ignore the interval structure: a log-link gamma GLM on
//! surrogate responses and a squared-error lasso on interval representatives.

use crate::cv::{fold_assignments, log_grid};
use crate::error::{Error, Result};
use crate::prox_newton::soft_threshold;
use nalgebra::{DMatrix, DVector};

/// Log-link gamma GLM fitted by iteratively reweighted least squares. With the
/// log link and gamma variance the working weights are all one, so each step
/// is an ordinary least-squares fit of the working response.
pub fn gamma_glm(x: &DMatrix<f64>, y: &[f64], max_iter: usize, tol: f64) -> Result<Vec<f64>> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::Dimension(format!("{} responses for {n} rows", y.len())));
    }
    if y.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput("gamma responses must be positive".into()));
    }
    let qr = x.clone().qr();
    let solve = |z: &DVector<f64>| -> Result<DVector<f64>> {
        let qtz = qr.q().transpose() * z;
        qr.r()
            .solve_upper_triangular(&qtz)
            .ok_or_else(|| Error::Domain("rank-deficient design in GLM fit".into()))
    };
    let mut beta = solve(&DVector::from_iterator(n, y.iter().map(|v| v.ln())))?;
    for _ in 0..max_iter {
        let eta = x * &beta;
        let z = DVector::from_fn(n, |i, _| {
            let mu = eta[i].exp();
            eta[i] + (y[i] - mu) / mu
        });
        let next = solve(&z)?;
        let change = (&next - &beta).amax();
        beta = next;
        if !beta.iter().all(|b| b.is_finite()) {
            return Err(Error::Domain("GLM iterations diverged".into()));
        }
        if change <= tol * (1.0 + beta.amax()) {
            return Ok(beta.iter().copied().collect());
        }
    }
    Err(Error::Domain("GLM iterations did not converge".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub intercept: f64,
    pub beta: Vec<f64>,
}

impl LassoFit {
    pub fn predict(&self, x: &DMatrix<f64>, row: usize) -> f64 {
        self.intercept + (0..self.beta.len()).map(|j| x[(row, j)] * self.beta[j]).sum::<f64>()
    }
}

/// Coordinate descent for `(1/2n)‖y - b0 - Xβ‖² + λ‖β‖₁` with an unpenalized intercept.
pub fn lasso_cd(x: &DMatrix<f64>, y: &[f64], lambda: f64, start: Option<&LassoFit>, tol: f64, max_sweeps: usize) -> LassoFit {
    let (n, p) = x.shape();
    let nf = n as f64;
    let col_ss: Vec<f64> = (0..p).map(|j| x.column(j).norm_squared() / nf).collect();
    let mut fit = start.cloned().unwrap_or(LassoFit { intercept: 0.0, beta: vec![0.0; p] });
    let mut resid: Vec<f64> = (0..n).map(|i| y[i] - fit.predict(x, i)).collect();
    for _ in 0..max_sweeps {
        let mut biggest = 0.0_f64;
        let shift = resid.iter().sum::<f64>() / nf;
        fit.intercept += shift;
        resid.iter_mut().for_each(|r| *r -= shift);
        biggest = biggest.max(shift.abs());
        for (j, &ss) in col_ss.iter().enumerate() {
            if ss == 0.0 {
                continue;
            }
            let col = x.column(j);
            let rho = col.iter().zip(&resid).map(|(a, r)| a * r).sum::<f64>() / nf + ss * fit.beta[j];
            let new = soft_threshold(rho, lambda) / ss;
            let delta = new - fit.beta[j];
            if delta != 0.0 {
                for (r, a) in resid.iter_mut().zip(col.iter()) {
                    *r -= a * delta;
                }
                fit.beta[j] = new;
                biggest = biggest.max(delta.abs() * ss.sqrt());
            }
        }
        if biggest < tol {
            break;
        }
    }
    fit
}

/// Smallest λ giving an all-zero β.
pub fn lasso_lambda_max(x: &DMatrix<f64>, y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let ybar = y.iter().sum::<f64>() / n;
    (0..x.ncols())
        .map(|j| x.column(j).iter().zip(y).map(|(a, v)| a * (v - ybar)).sum::<f64>().abs() / n)
        .fold(0.0, f64::max)
}

fn lasso_path(x: &DMatrix<f64>, y: &[f64], grid: &[f64]) -> Vec<LassoFit> {
    let mut out: Vec<LassoFit> = Vec::with_capacity(grid.len());
    for &l in grid {
        let f = lasso_cd(x, y, l, out.last(), 1e-9, 100_000);
        out.push(f);
    }
    out
}

/// Lasso with λ chosen by K-fold cross-validation on squared error, refitted on all rows.
pub fn lasso_cv(x: &DMatrix<f64>, y: &[f64], n_lambda: usize, ratio: f64, k: usize, seed: u64) -> Result<(LassoFit, f64)> {
    let n = y.len();
    let grid = log_grid(lasso_lambda_max(x, y), n_lambda, ratio)?;
    let folds = fold_assignments(n, k, seed)?;
    let mut sse = vec![0.0; grid.len()];
    for fold in 0..k {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| folds[i] == fold);
        let xt = x.select_rows(&train);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        for (l, f) in lasso_path(&xt, &yt, &grid).iter().enumerate() {
            sse[l] += test.iter().map(|&i| (y[i] - f.predict(x, i)).powi(2)).sum::<f64>();
        }
    }
    let best = (0..grid.len()).fold(0, |b, l| if sse[l] < sse[b] { l } else { b });
    let path = lasso_path(x, y, &grid[..=best]);
    Ok((path.last().cloned().expect("nonempty path"), grid[best]))
}
