mod common;

use common::*;
use finreg::design::CategoryGrid;
use finreg::inference::{bic, lrt, natural_scale_table, observed_information, predict_probs, wald_table};
use finreg::*;
use nalgebra::DMatrix;
use rand::Rng;

fn unpenalized(m: &ModelData) -> FitResult {
    let r = fit(m, &m.penalty(0.0, 0.0), &SolverOptions::default(), None).unwrap();
    assert!(r.converged, "{:?}", r.status);
    r
}

#[test]
fn bernoulli_information_and_standard_error() {
    let y: Vec<usize> = (0..100).map(|i| 1 + i % 2).collect();
    let m = build_cumulative(&y, 2, None, LinkFamily::Logistic).unwrap();
    let r = unpenalized(&m);
    assert!(r.theta_hat[0].abs() < 1e-10);
    let info = observed_information(&m, &r.theta_hat).unwrap();
    assert!((info[(0, 0)] - 25.0).abs() < 1e-9);
    let t = wald_table(&m, &r, None).unwrap();
    assert!((t.std_errors[0].unwrap() - 0.2).abs() < 1e-10);
    assert_eq!(t.p_values[0], Some(1.0));
}

#[test]
fn information_is_n_times_the_hessian() {
    let m = interval_data(21, 70, 3, LinkFamily::ExtremeValue, Scale::Unknown, 1.0);
    let r = unpenalized(&m);
    let info = observed_information(&m, &r.theta_hat).unwrap();
    let h = neg_loglik_hess(&m, &r.theta_hat).unwrap() * 70.0;
    assert_eq!(info, h);
}

/// Category counts that hit every category at least once.
fn category_sample(m: usize, seed: u64) -> Vec<usize> {
    let mut r = rng(seed);
    let mut y: Vec<usize> = (1..=m).collect();
    y.extend((0..6 * m).map(|_| r.random_range(1..=m)));
    y
}

#[test]
fn saturated_cumulative_model_reproduces_sample_proportions() {
    for m in [2usize, 5, 13] {
        for family in FAMILIES {
            let y = category_sample(m, m as u64);
            let model = build_cumulative(&y, m, None, family).unwrap();
            let r = unpenalized(&model);
            let probs = predict_probs(&model, &r.theta_hat, &[], &CategoryGrid::Ordinal).unwrap();
            for (k, p) in probs.iter().enumerate() {
                let share = y.iter().filter(|&&v| v == k + 1).count() as f64 / y.len() as f64;
                assert!((p - share).abs() < 1e-6, "m={m} {family}: category {k}: {p} vs {share}");
            }
        }
    }
}

#[test]
fn binary_cumulative_at_zero_is_a_fair_coin() {
    let m = build_cumulative(&[1, 2], 2, None, LinkFamily::Logistic).unwrap();
    let p = predict_probs(&m, &[0.0], &[], &CategoryGrid::Ordinal).unwrap();
    assert_eq!(p, vec![0.5, 0.5]);
}

#[test]
fn wald_table_is_permutation_equivariant() {
    let base = interval_data(33, 150, 4, LinkFamily::Gaussian, Scale::Unknown, 1.0);
    let x = base.predictors().clone();
    let (lower, upper) = match base.response() {
        finreg::design::Response::Interval { lower, upper } => (lower.clone(), upper.clone()),
        _ => unreachable!(),
    };
    let perm = [2usize, 0, 3, 1];
    let xp = DMatrix::from_fn(x.nrows(), 4, |i, j| x[(i, perm[j])]);
    let permuted = build_interval_regression(&xp, &lower, &upper, Scale::Unknown, LinkFamily::Gaussian).unwrap();
    let a = wald_table(&base, &unpenalized(&base), None).unwrap();
    let b = wald_table(&permuted, &unpenalized(&permuted), None).unwrap();
    let close = |u: f64, v: f64| (u - v).abs() < 1e-7 * (1.0 + u.abs());
    assert!(close(a.estimates[0], b.estimates[0]));
    assert!(close(a.std_errors[0].unwrap(), b.std_errors[0].unwrap()));
    for (j, &col) in perm.iter().enumerate() {
        // Coordinate 1 + j of the permuted model is column perm[j] of the base model.
        let k = 1 + col;
        assert!(close(a.estimates[k], b.estimates[1 + j]));
        assert!(close(a.std_errors[k].unwrap(), b.std_errors[1 + j].unwrap()));
        assert!(close(a.p_values[k].unwrap(), b.p_values[1 + j].unwrap()));
    }
    assert!(close(a.loglik, b.loglik));
}

#[test]
fn scale_coordinate_null_defaults_to_one() {
    let m = interval_data(8, 120, 2, LinkFamily::Logistic, Scale::Unknown, 1.0);
    let r = unpenalized(&m);
    let t = wald_table(&m, &r, None).unwrap();
    assert_eq!(t.null_values, vec![1.0, 0.0, 0.0]);
    let z = (r.theta_hat[0] - 1.0) / t.std_errors[0].unwrap();
    assert_eq!(t.z_values[0], Some(z));
    assert!(t.p_values.iter().all(|p| (0.0..=1.0).contains(&p.unwrap())));
}

#[test]
fn natural_scale_delta_method() {
    let m = interval_data(12, 300, 2, LinkFamily::Gaussian, Scale::Unknown, 1.0);
    let r = unpenalized(&m);
    let t = natural_scale_table(&m, &r).unwrap();
    let th = &r.theta_hat;
    assert!((t.estimates[0] - 1.0 / th[0]).abs() < 1e-14);
    assert!((t.estimates[1] - th[1] / th[0]).abs() < 1e-14);
    // SE of σ = 1/θ1 is SE(θ1)/θ1².
    let w = wald_table(&m, &r, None).unwrap();
    let se_sigma = w.std_errors[0].unwrap() / (th[0] * th[0]);
    assert!((t.std_errors[0].unwrap() - se_sigma).abs() < 1e-12);
}

#[test]
fn penalized_fits_refuse_inference() {
    let m = interval_data(4, 50, 3, LinkFamily::Gaussian, Scale::KnownOne, 1.0);
    let r = fit(&m, &m.penalty(0.1, 0.0), &SolverOptions::default(), None).unwrap();
    assert!(matches!(wald_table(&m, &r, None), Err(Error::PenalizedInference { .. })));
    assert!(bic(&r, 50, 3).is_err());
    assert!(lrt(&r, &r, 1).is_err());
}

#[test]
fn lrt_of_identical_fits() {
    let m = interval_data(4, 50, 3, LinkFamily::Gaussian, Scale::KnownOne, 1.0);
    let r = unpenalized(&m);
    let t = lrt(&r, &r, 2).unwrap();
    assert_eq!((t.stat, t.p), (0.0, 1.0));
}

#[test]
fn censored_lognormal_versus_saturated_categorical() {
    // Latent log-values binned into 13 categories; both descriptions fit end to end.
    let mut r = rng(77);
    let edges: Vec<f64> = (1..13).map(|k| (k as f64 * 0.5).ln()).collect();
    let n = 400;
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    let mut cats = Vec::with_capacity(n);
    for _ in 0..n {
        let z = 0.8 + 0.6 * latent_draw(&mut r, LinkFamily::Gaussian);
        let k = edges.iter().filter(|&&e| z >= e).count();
        lower.push(if k == 0 { ExtReal::NegInf } else { ExtReal::Finite(edges[k - 1]) });
        upper.push(if k == edges.len() { ExtReal::PosInf } else { ExtReal::Finite(edges[k]) });
        cats.push(k + 1);
    }
    let ones = DMatrix::from_element(n, 1, 1.0);
    let small = build_interval_regression(&ones, &lower, &upper, Scale::Unknown, LinkFamily::Gaussian).unwrap();
    let large = build_cumulative(&cats, 13, None, LinkFamily::Gaussian).unwrap();
    let (fs, fl) = (unpenalized(&small), unpenalized(&large));
    let (bs, bl) = (bic(&fs, n, 2).unwrap(), bic(&fl, n, 12).unwrap());
    assert!(bs.is_finite() && bl.is_finite());
    // The two-parameter model is the true one, so it wins on BIC.
    assert!(bs < bl, "{bs} vs {bl}");
    let t = lrt(&fs, &fl, 10).unwrap();
    assert!(t.p > 0.001, "{t:?}");
    // Natural-scale estimates near the truth.
    let nat = natural_scale_table(&small, &fs).unwrap();
    assert!((nat.estimates[0] - 0.6).abs() < 0.1 && (nat.estimates[1] - 0.8).abs() < 0.1, "{nat:?}");
}
