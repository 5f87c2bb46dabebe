mod common;

use common::*;
use finreg::cv::{fit_path, kfold_cv, lambda_max, lambda_path, log_grid, misclassification_rate, CvOptions};
use finreg::*;

fn tight() -> SolverOptions {
    SolverOptions::default().with_tol(1e-12)
}

#[test]
fn leave_one_out_matches_a_direct_loop() {
    let m = interval_data(5, 10, 2, LinkFamily::Gaussian, Scale::KnownOne, 1.5);
    let pen = m.penalty(0.0, 0.01);
    let grid = lambda_path(&m, &pen, 6, 0.05, &tight()).unwrap();
    let cv = CvOptions { k_folds: 10, seed: 3, warm_start: false, one_se: false };
    let res = kfold_cv(&m, &pen, &grid, &cv, &tight()).unwrap();
    for (l, &lambda) in grid.iter().enumerate() {
        let mut losses = Vec::new();
        for i in 0..10 {
            let train: Vec<usize> = (0..10).filter(|&r| r != i).collect();
            let sub = m.subset(&train).unwrap();
            let f = fit(&sub, &pen.clone().with_lambdas(lambda, 0.01), &tight(), None).unwrap();
            losses.push(misclassification_rate(&m, &f.theta_hat, &[i]).unwrap());
        }
        let mean = losses.iter().sum::<f64>() / 10.0;
        assert_eq!(res.mean_loss[l], mean, "λ index {l}");
    }
}

#[test]
fn same_seed_same_result() {
    let m = interval_data(6, 80, 10, LinkFamily::Logistic, Scale::KnownOne, 1.0);
    let pen = m.penalty(0.0, 0.0);
    let grid = lambda_path(&m, &pen, 8, 0.05, &SolverOptions::default()).unwrap();
    let cv = CvOptions { k_folds: 5, seed: 11, ..CvOptions::default() };
    let a = kfold_cv(&m, &pen, &grid, &cv, &SolverOptions::default()).unwrap();
    let b = kfold_cv(&m, &pen, &grid, &cv, &SolverOptions::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn warm_and_cold_starts_agree() {
    let m = interval_data(7, 80, 12, LinkFamily::Gaussian, Scale::Unknown, 1.0);
    let pen = m.penalty(0.0, 0.0);
    let grid = lambda_path(&m, &pen, 10, 0.05, &tight()).unwrap();
    let warm = fit_path(&m, &pen, &grid, &tight(), true, None);
    let cold = fit_path(&m, &pen, &grid, &tight(), false, None);
    for (w, c) in warm.iter().zip(&cold) {
        let (w, c) = (w.as_ref().unwrap(), c.as_ref().unwrap());
        for (a, b) in w.theta_hat.iter().zip(&c.theta_hat) {
            assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }
    let mk = |warm_start| CvOptions { k_folds: 4, seed: 2, warm_start, one_se: false };
    let a = kfold_cv(&m, &pen, &grid, &mk(true), &tight()).unwrap();
    let b = kfold_cv(&m, &pen, &grid, &mk(false), &tight()).unwrap();
    assert_eq!(a.selected_lambda, b.selected_lambda);
}

#[test]
fn path_head_zeroes_every_penalized_coordinate() {
    for seed in 0..6u64 {
        let (m, _) = random_instance(seed);
        for lambda2 in [0.0, 0.3] {
            let pen = m.penalty(0.0, lambda2);
            let head = lambda_max(&m, &pen, &tight()).unwrap();
            let at = fit(&m, &pen.clone().with_lambdas(head.value, lambda2), &tight(), Some(&head.theta_restricted)).unwrap();
            let penalized: Vec<usize> = (0..m.dim()).filter(|&j| pen.l1_weight[j] > 0.0).collect();
            assert!(penalized.iter().all(|&j| at.theta_hat[j] == 0.0), "{:?}", at.theta_hat);
            let below = fit(&m, &pen.clone().with_lambdas(0.99 * head.value, lambda2), &tight(), Some(&head.theta_restricted)).unwrap();
            assert!(penalized.iter().any(|&j| below.theta_hat[j] != 0.0), "{:?}", below.theta_hat);
        }
    }
}

#[test]
fn grid_is_log_uniform() {
    let g = log_grid(3.0, 7, 0.01).unwrap();
    let ratios: Vec<f64> = g.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    for r in &ratios {
        assert!((r - ratios[0]).abs() < 1e-12);
    }
    assert_eq!(log_grid(3.0, 1, 0.5).unwrap(), vec![3.0]);
}

#[test]
fn one_standard_error_rule_picks_a_larger_lambda() {
    let m = interval_data(8, 100, 20, LinkFamily::Gaussian, Scale::KnownOne, 1.0);
    let pen = m.penalty(0.0, 0.0);
    let grid = lambda_path(&m, &pen, 12, 0.02, &SolverOptions::default()).unwrap();
    let base = CvOptions { k_folds: 5, seed: 4, ..CvOptions::default() };
    let plain = kfold_cv(&m, &pen, &grid, &base, &SolverOptions::default()).unwrap();
    let one_se = kfold_cv(&m, &pen, &grid, &CvOptions { one_se: true, ..base }, &SolverOptions::default()).unwrap();
    assert_eq!(plain.min_lambda, one_se.min_lambda);
    assert!(one_se.selected_lambda >= plain.selected_lambda);
    let l = one_se.selected_index;
    let b = plain.selected_index;
    assert!(one_se.mean_loss[l] <= plain.mean_loss[b] + plain.se_loss[b]);
}

#[test]
fn selected_lambda_beats_the_null_model_in_high_dimensions() {
    let train = interval_data(10, 100, 200, LinkFamily::Gaussian, Scale::KnownOne, 1.5);
    let test = interval_data(11, 500, 200, LinkFamily::Gaussian, Scale::KnownOne, 1.5);
    let pen = train.penalty(0.0, 0.0);
    let opts = SolverOptions::default();
    let head = lambda_max(&train, &pen, &opts).unwrap();
    let grid = log_grid(head.value, 20, 0.05).unwrap();
    let cv = kfold_cv(&train, &pen, &grid, &CvOptions { k_folds: 5, seed: 1, ..CvOptions::default() }, &opts).unwrap();
    let path = fit_path(&train, &pen, &grid[..=cv.selected_index], &opts, true, Some(&head.theta_restricted));
    let chosen = path.last().unwrap().as_ref().unwrap();
    let rows: Vec<usize> = (0..500).collect();
    let null = misclassification_rate(&test, &head.theta_restricted, &rows).unwrap();
    let tuned = misclassification_rate(&test, &chosen.theta_hat, &rows).unwrap();
    assert!(tuned < null, "{tuned} vs {null}");
}

#[test]
fn ordinal_cross_validation_uses_the_modal_category() {
    let m = cumulative_data(3, 120, 3, 4, LinkFamily::Logistic);
    let pen = m.penalty(0.0, 0.0);
    let grid = lambda_path(&m, &pen, 6, 0.05, &SolverOptions::default()).unwrap();
    let res = kfold_cv(&m, &pen, &grid, &CvOptions::default(), &SolverOptions::default()).unwrap();
    assert_eq!(res.invalid_cells, 0);
    assert!(res.mean_loss.iter().all(|v| (0.0..=1.0).contains(v)));
    // The null model predicts one category for everyone, so predictors help.
    assert!(res.mean_loss[res.selected_index] < res.mean_loss[0]);
}
