#![allow(dead_code)]

use finreg::design::{build_cumulative, build_interval_regression, build_survival, ModelData, PenaltySpec, Scale, SurvivalBasis};
use finreg::family::{ExtReal, LinkFamily};
use finreg::objective::neg_loglik_grad;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(rng))
}

pub fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().insert_column(0, 1.0)
}

/// Draw from the latent distribution of `family` by inversion.
pub fn latent_draw(rng: &mut ChaCha8Rng, family: LinkFamily) -> f64 {
    let u: f64 = rng.random_range(1e-12..1.0 - 1e-12);
    match family {
        LinkFamily::Gaussian => StandardNormal.sample(rng),
        LinkFamily::Logistic => (u / (1.0 - u)).ln(),
        LinkFamily::ExtremeValue => (-(1.0 - u).ln()).ln(),
    }
}

/// Interval regression data: latent `xᵀβ + σW`, binned on unit cells with
/// open ends below `-cap` and above `cap`.
pub fn interval_data(
    seed: u64,
    n: usize,
    p: usize,
    family: LinkFamily,
    scale: Scale,
    beta_scale: f64,
) -> ModelData {
    let mut r = rng(seed);
    let x = normal_matrix(&mut r, n, p);
    let beta: Vec<f64> = (0..p).map(|j| if j < 3 { beta_scale * (1.0 - j as f64 * 0.7) } else { 0.0 }).collect();
    let sigma = if scale == Scale::Unknown { 1.3 } else { 1.0 };
    let cap = 3.0;
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    for i in 0..n {
        let y: f64 = (0..p).map(|j| x[(i, j)] * beta[j]).sum::<f64>() + sigma * latent_draw(&mut r, family);
        let cell = y.floor();
        if cell < -cap {
            lower.push(ExtReal::NegInf);
            upper.push(ExtReal::Finite(-cap));
        } else if cell >= cap {
            lower.push(ExtReal::Finite(cap));
            upper.push(ExtReal::PosInf);
        } else {
            lower.push(ExtReal::Finite(cell));
            upper.push(ExtReal::Finite(cell + 1.0));
        }
    }
    build_interval_regression(&x, &lower, &upper, scale, family).unwrap()
}

/// Ordinal data with `m` categories and `p` predictors.
pub fn cumulative_data(seed: u64, n: usize, p: usize, m: usize, family: LinkFamily) -> ModelData {
    let mut r = rng(seed);
    let x = normal_matrix(&mut r, n, p);
    let y: Vec<usize> = (0..n)
        .map(|i| {
            let latent: f64 = (0..p).map(|j| 0.5 * x[(i, j)]).sum::<f64>() + latent_draw(&mut r, family);
            let k = (latent + m as f64 / 2.0).floor();
            (k.clamp(0.0, (m - 1) as f64) as usize) + 1
        })
        .collect();
    build_cumulative(&y, m, if p > 0 { Some(&x) } else { None }, family).unwrap()
}

/// Independent subgradient check of the elastic-net optimality conditions.
/// Returns the largest violation.
pub fn kkt_violation(model: &ModelData, pen: &PenaltySpec, theta: &[f64]) -> f64 {
    let g = neg_loglik_grad(model, theta).unwrap();
    let mut worst = 0.0_f64;
    for j in 0..theta.len() {
        let u = g[j] + pen.lambda2 * theta[j];
        let radius = pen.lambda1 * pen.l1_weight[j];
        let bounded = matches!(pen.lower_bound[j], finreg::Bound::NonNegative);
        let v = if theta[j] == 0.0 {
            if bounded {
                // Only an upward push is admissible: need u >= -radius.
                (-u - radius).max(0.0)
            } else {
                (u.abs() - radius).max(0.0)
            }
        } else {
            (u + radius * theta[j].signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// Newton-Raphson logistic regression on `y ∈ {0,1}` with design `x`.
pub fn irls_logistic(x: &DMatrix<f64>, y: &[f64]) -> DVector<f64> {
    let (n, p) = x.shape();
    let mut beta = DVector::zeros(p);
    for _ in 0..100 {
        let eta = x * &beta;
        let mu: Vec<f64> = eta.iter().map(|e| 1.0 / (1.0 + (-e).exp())).collect();
        let w: Vec<f64> = mu.iter().map(|m| m * (1.0 - m)).collect();
        let mut xtwx = DMatrix::zeros(p, p);
        let mut score = DVector::zeros(p);
        for i in 0..n {
            let xi = x.row(i).transpose();
            xtwx += &xi * xi.transpose() * w[i];
            score += &xi * (y[i] - mu[i]);
        }
        let step = xtwx.cholesky().unwrap().solve(&score);
        beta += &step;
        if step.amax() < 1e-14 {
            break;
        }
    }
    beta
}

pub const FAMILIES: [LinkFamily; 3] = [LinkFamily::Gaussian, LinkFamily::Logistic, LinkFamily::ExtremeValue];

/// Density of each family, written independently of the library.
pub fn density(family: LinkFamily, w: f64) -> f64 {
    match family {
        LinkFamily::Gaussian => (-0.5 * w * w).exp() / (2.0 * std::f64::consts::PI).sqrt(),
        LinkFamily::Logistic => {
            let e = (-w.abs()).exp();
            e / ((1.0 + e) * (1.0 + e))
        }
        LinkFamily::ExtremeValue => (w - w.exp()).exp(),
    }
}

/// Slope of the log density.
fn log_density_slope(family: LinkFamily, w: f64) -> f64 {
    match family {
        LinkFamily::Gaussian => -w,
        LinkFamily::Logistic => -w.signum() * (1.0 - (-w.abs()).exp()) / (1.0 + (-w.abs()).exp()),
        LinkFamily::ExtremeValue => 1.0 - w.exp(),
    }
}

/// `R(t2) - R(t1)` by composite Gauss-Legendre quadrature of the density,
/// with pieces short enough that the density changes by at most a few e-folds.
pub fn interval_mass(family: LinkFamily, t1: f64, t2: f64) -> f64 {
    let rule = gauss_quad::GaussLegendre::new(std::num::NonZeroUsize::new(20).unwrap());
    let mut total = 0.0;
    let mut a = t1;
    while a < t2 {
        let ahead = (a + 0.25).min(t2);
        let slope = log_density_slope(family, a).abs().max(log_density_slope(family, ahead).abs());
        let b = (a + 0.25_f64.min(1.0 / slope)).min(t2);
        total += rule.integrate(a, b, |w| density(family, w));
        a = b;
    }
    total
}

/// A random model of one of the built-in classes with a feasible θ.
pub fn random_instance(seed: u64) -> (ModelData, Vec<f64>) {
    let mut r = rng(seed);
    let family = FAMILIES[r.random_range(0..3)];
    let n = r.random_range(8..30);
    let p = r.random_range(1..4);
    let x = normal_matrix(&mut r, n, p);
    match r.random_range(0..4) {
        0 | 1 => {
            let scale = if r.random_bool(0.5) { Scale::Unknown } else { Scale::KnownOne };
            let mut lower = Vec::with_capacity(n);
            let mut upper = Vec::with_capacity(n);
            for _ in 0..n {
                let cell: i32 = r.random_range(-3..3);
                lower.push(if cell == -3 { ExtReal::NegInf } else { ExtReal::Finite(cell as f64) });
                upper.push(if cell == 2 { ExtReal::PosInf } else { ExtReal::Finite(cell as f64 + 1.0) });
            }
            let m = build_interval_regression(&x, &lower, &upper, scale, family).unwrap();
            let mut theta: Vec<f64> = (0..m.dim()).map(|_| r.random_range(-1.0..1.0)).collect();
            if scale == Scale::Unknown {
                theta[0] = r.random_range(0.3..2.0);
            }
            (m, theta)
        }
        2 => {
            let cats = r.random_range(2..6);
            let y: Vec<usize> = (0..n).map(|_| r.random_range(1..=cats)).collect();
            let m = build_cumulative(&y, cats, Some(&x), family).unwrap();
            let mut theta = Vec::with_capacity(m.dim());
            let mut cut = r.random_range(-2.0..-0.5);
            for _ in 0..cats - 1 {
                theta.push(cut);
                cut += r.random_range(0.2..1.5);
            }
            theta.extend((0..p).map(|_| r.random_range(-1.0..1.0)));
            (m, theta)
        }
        _ => {
            let cuts = [0.5, 1.0, 2.0, 4.0];
            let mut lo = Vec::with_capacity(n);
            let mut hi = Vec::with_capacity(n);
            for _ in 0..n {
                let k = r.random_range(0..=cuts.len());
                lo.push(if k == 0 { 0.0 } else { cuts[k - 1] });
                hi.push(if k == cuts.len() { ExtReal::PosInf } else { ExtReal::Finite(cuts[k]) });
            }
            let m = build_survival(&lo, &hi, &x, &SurvivalBasis::Weibull).unwrap();
            let mut theta = vec![r.random_range(0.3..2.0)];
            theta.extend((0..p).map(|_| r.random_range(-1.0..1.0)));
            (m, theta)
        }
    }
}

/// Central differences of a scalar function.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, theta: &[f64], h: f64) -> Vec<f64> {
    (0..theta.len())
        .map(|j| {
            let mut up = theta.to_vec();
            let mut dn = theta.to_vec();
            up[j] += h;
            dn[j] -= h;
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect()
}

/// `‖a - b‖∞ / max(‖b‖∞, 1)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    let size = b.iter().fold(1.0_f64, |m, y| m.max(y.abs()));
    diff / size
}
