use finreg::sim::{gen_intervals, gen_predictors, replication_rng, theta_star, Setting};
use finreg::ExtReal;
use finreg_cli::args::{Cli, Command, FitArgs};
use finreg_cli::commands::finish;
use finreg_cli::data::Table;
use finreg_cli::model::{FitFile, Prepared};
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::Output;

const BIN: &str = env!("CARGO_BIN_EXE_finreg");

fn run(args: &[&str]) -> Output {
    std::process::Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn cell(v: ExtReal) -> String {
    match v {
        ExtReal::NegInf => String::new(),
        ExtReal::PosInf => "inf".into(),
        ExtReal::Finite(x) => x.to_string(),
    }
}

/// Binned Gaussian responses (unit noise) with an intercept of 0.5 and
/// slopes 1.5, 0.75, -0.75.
fn interval_csv(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let x = gen_predictors(n, 3, false, seed);
    let mut theta = theta_star(3);
    theta.iter_mut().for_each(|t| *t *= 1.5);
    let mut rng = replication_rng(seed, 0);
    let binned = gen_intervals(Setting::GaussianHighdim, &x, &theta, 1.0, &mut rng);
    let mut s = String::from("lower,upper,x1,x2,x3\n");
    for i in 0..n {
        // Shift by the intercept after binning keeps the bins exact.
        let shift = |v: ExtReal| match v {
            ExtReal::Finite(t) => ExtReal::Finite(t + 0.5),
            o => o,
        };
        s += &format!(
            "{},{},{},{},{}\n",
            cell(shift(binned.lower[i])),
            cell(shift(binned.upper[i])),
            x[(i, 0)],
            x[(i, 1)],
            x[(i, 2)]
        );
    }
    let path = dir.join("interval.csv");
    std::fs::write(&path, s).unwrap();
    path
}

/// Ordinal responses: the bin index of the same kind of latent draw.
fn ordinal_csv(dir: &Path, n: usize) -> PathBuf {
    let x = gen_predictors(n, 3, false, 5);
    let mut rng = replication_rng(5, 0);
    let binned = gen_intervals(Setting::GaussianHighdim, &x, &theta_star(3), 2.0, &mut rng);
    let mut s = String::from("category,a,b,c\n");
    for i in 0..n {
        let k = match binned.upper[i] {
            ExtReal::Finite(u) if u <= -2.0 => 1,
            ExtReal::Finite(u) if u <= 0.0 => 2,
            ExtReal::Finite(u) if u <= 2.0 => 3,
            _ => 4,
        };
        s += &format!("{k},{},{},{}\n", x[(i, 0)], x[(i, 1)], x[(i, 2)]);
    }
    let path = dir.join("ordinal.csv");
    std::fs::write(&path, s).unwrap();
    path
}

/// Grouped event times from the extreme-value setting.
fn survival_csv(dir: &Path, n: usize) -> PathBuf {
    let x = gen_predictors(n, 3, true, 9);
    let mut rng = replication_rng(9, 0);
    let binned = gen_intervals(Setting::ExtremeValueLowdim, &x, &theta_star(3), 1.0, &mut rng);
    let mut s = String::from("lower,upper,z1,z2\n");
    for i in 0..n {
        s += &format!("{},{},{},{}\n", cell(binned.lower[i]), cell(binned.upper[i]), x[(i, 1)], x[(i, 2)]);
    }
    let path = dir.join("survival.csv");
    std::fs::write(&path, s).unwrap();
    path
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn error_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

fn parse_fit(args: &[&str]) -> FitArgs {
    let mut argv = vec!["finreg", "fit"];
    argv.extend_from_slice(args);
    match <Cli as clap::Parser>::try_parse_from(argv).unwrap().command {
        Command::Fit(a) => a,
        _ => unreachable!(),
    }
}

#[test]
fn endpoint_tokens_become_half_lines() {
    let t = Table::from_reader("lower,upper,x1\n0,inf,1.5\n,0,2\n-INF,1,0\n".as_bytes()).unwrap();
    let args = parse_fit(&["--data", "unused.csv"]);
    let prep = Prepared::new(&args.model, &t, false).unwrap();
    let blocks = prep.original.blocks();
    assert!(blocks[0].b_infinite() && !blocks[0].a_infinite());
    assert!(blocks[1].a_infinite() && !blocks[1].b_infinite());
    assert!(blocks[2].a_infinite());
}

#[test]
fn bad_rows_exit_with_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "lower,upper,x1\n0,1,1\n3,2,1\n").unwrap();
    let o = run(&["fit", "--data", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e = error_json(&o);
    assert_eq!(e["schema_version"], 1);
    assert_eq!(e["error"]["kind"], "data");
    assert_eq!(e["error"]["row"], 2);

    std::fs::write(&path, "lower,upper,x1\n0,1,1\n0,1,1\n0,2,oops\n").unwrap();
    let e = error_json(&run(&["fit", "--data", path.to_str().unwrap()]));
    assert_eq!((e["error"]["row"].as_u64(), e["error"]["column"].as_str()), (Some(3), Some("x1")));
}

#[test]
fn exit_codes_by_failure_class() {
    let dir = tempfile::tempdir().unwrap();
    let data = interval_csv(dir.path(), 200, 1);
    let d = data.to_str().unwrap();
    assert_eq!(run(&["fit", "--data", d]).status.code(), Some(0));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&[]).status.code(), Some(1));
    let o = run(&["fit", "--data", d, "--family", "probit"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_json(&o)["error"]["kind"], "usage");
    assert_eq!(run(&["fit", "--data", d, "--lambda1", "-1"]).status.code(), Some(1));
    assert_eq!(run(&["fit", "--data", d, "--model", "survival", "--family", "logistic"]).status.code(), Some(1));
    assert_eq!(run(&["fit", "--data", "/nonexistent.csv"]).status.code(), Some(2));
    // A fit that runs out of iterations still prints its result.
    let o = run(&["fit", "--data", d, "--scale", "unknown", "--max-outer", "1", "--format", "json"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(json(&o)["diagnostics"]["converged"], false);
    assert_eq!(error_json(&o)["error"]["kind"], "numerical");
}

#[test]
fn unknown_scale_fit_reports_scale_and_intercept_with_wald_tests() {
    let dir = tempfile::tempdir().unwrap();
    let data = interval_csv(dir.path(), 500, 2);
    let o = run(&["fit", "--data", data.to_str().unwrap(), "--family", "gaussian", "--model", "interval", "--scale", "unknown"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for needle in ["Parameter", "Estimate", "Std. Error", "p-value", "inv_scale", "(Intercept)", "Natural scale", "sigma"] {
        assert!(text.contains(needle), "missing {needle} in\n{text}");
    }
    let o = run(&["fit", "--data", data.to_str().unwrap(), "--scale", "unknown", "--format", "json"]);
    let v = json(&o);
    let inf = &v["inference"];
    assert_eq!(inf["labels"][0], "inv_scale");
    assert_eq!(inf["labels"][1], "(Intercept)");
    assert_eq!(inf["null_values"][0], 1.0);
    let sigma = v["natural_scale"]["estimates"][0].as_f64().unwrap();
    let intercept = v["natural_scale"]["estimates"][1].as_f64().unwrap();
    assert!((sigma - 1.0).abs() < 0.15, "{sigma}");
    assert!((intercept - 0.5).abs() < 0.25, "{intercept}");
}

#[test]
fn tiny_p_values_print_as_zero_but_json_keeps_them() {
    let dir = tempfile::tempdir().unwrap();
    let data = interval_csv(dir.path(), 500, 3);
    let d = data.to_str().unwrap();
    let v = json(&run(&["fit", "--data", d, "--format", "json"]));
    let p_x1 = v["inference"]["p_values"][1].as_f64().unwrap();
    assert!(p_x1 > 0.0 && p_x1 < 1e-4, "{p_x1}");
    let text = stdout(&run(&["fit", "--data", d]));
    let row = text.lines().find(|l| l.starts_with("x1 ")).unwrap();
    assert_eq!(row.split_whitespace().last(), Some("0"), "{row}");
}

#[test]
fn penalized_fit_reports_coefficients_only() {
    let dir = tempfile::tempdir().unwrap();
    let data = interval_csv(dir.path(), 200, 4);
    let v = json(&run(&["fit", "--data", data.to_str().unwrap(), "--lambda1", "0.05", "--format", "json"]));
    assert!(v.get("inference").is_none());
    assert_eq!(v["standardized"], true);
    assert_eq!(v["theta"].as_array().unwrap().len(), 4);
}

#[test]
fn cv_is_deterministic_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let data = interval_csv(dir.path(), 150, 5);
    let args = ["cv", "--data", data.to_str().unwrap(), "--k-folds", "5", "--seed", "7", "--format", "json"];
    let (a, b) = (run(&args), run(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["lambda1"], v["cv"]["selected_lambda"]);
}

#[test]
fn explicit_grid_is_used_largest_first() {
    let dir = tempfile::tempdir().unwrap();
    let data = ordinal_csv(dir.path(), 150);
    let v = json(&run(&["cv", "--data", data.to_str().unwrap(), "--lambda-grid", "0.01,0.2,0.05", "--format", "json"]));
    assert_eq!(v["cv"]["lambdas"], serde_json::json!([0.2, 0.05, 0.01]));
    assert_eq!(v["model"]["class"], "cumulative");
}

fn probability_rows(v: &Value) -> Vec<Vec<f64>> {
    v["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["probs"].as_array().unwrap().iter().map(|p| p.as_f64().unwrap()).collect())
        .collect()
}

#[test]
fn predictions_sum_to_one_for_every_model_class() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (interval_csv(dir.path(), 200, 6), vec!["--scale", "unknown"]),
        (ordinal_csv(dir.path(), 200), vec![]),
        (survival_csv(dir.path(), 200), vec!["--model", "survival", "--basis", "weibull"]),
        (survival_csv(dir.path(), 200), vec!["--model", "survival", "--basis", "exponential", "--lambda1", "0.01"]),
    ];
    for (k, (data, extra)) in cases.iter().enumerate() {
        let fit_file = dir.path().join(format!("fit{k}.json"));
        let mut args = vec!["fit", "--data", data.to_str().unwrap(), "--out", fit_file.to_str().unwrap()];
        args.extend(extra);
        assert!(run(&args).status.success(), "{args:?}");
        let o = run(&["predict", "--fit-file", fit_file.to_str().unwrap(), "--data", data.to_str().unwrap(), "--format", "json"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let rows = probability_rows(&json(&o));
        assert_eq!(rows.len(), 200);
        for p in rows {
            assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-10, "{p:?}");
        }
    }
}

#[test]
fn predictions_accept_custom_cuts() {
    let dir = tempfile::tempdir().unwrap();
    let data = interval_csv(dir.path(), 100, 7);
    let fit_file = dir.path().join("f.json");
    run(&["fit", "--data", data.to_str().unwrap(), "--out", fit_file.to_str().unwrap()]);
    let v = json(&run(&["predict", "--fit-file", fit_file.to_str().unwrap(), "--data", data.to_str().unwrap(), "--cuts", "-1,0,1", "--format", "json"]));
    assert_eq!(v["categories"].as_array().unwrap().len(), 4);
    // Cut points out of order are refused.
    let o = run(&["predict", "--fit-file", fit_file.to_str().unwrap(), "--data", data.to_str().unwrap(), "--cuts", "1,0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn saved_fit_reproduces_predictions_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    for (data, extra) in [
        (interval_csv(dir.path(), 200, 8), vec!["--scale", "unknown", "--lambda1", "0.02"]),
        (ordinal_csv(dir.path(), 200), vec![]),
        (survival_csv(dir.path(), 200), vec!["--model", "survival"]),
    ] {
        let mut args = vec!["--data", data.to_str().unwrap()];
        args.extend(extra);
        let a = parse_fit(&args);
        let table = Table::read(&data).unwrap();
        let prep = Prepared::new(&a.model, &table, a.model.standardize_choice().unwrap_or(a.lambda1 > 0.0)).unwrap();
        let pen = prep.working.penalty(a.lambda1, a.model.lambda2);
        let res = finreg::fit(&prep.working, &pen, &finreg::SolverOptions::default(), None).unwrap();
        let file = finish(&prep, &res, None).unwrap();
        let before = file.predict(&table, None).unwrap();
        let reloaded: FitFile = serde_json::from_str(&serde_json::to_string(&file).unwrap()).unwrap();
        assert_eq!(reloaded, file);
        assert_eq!(reloaded.predict(&table, None).unwrap(), before);
        // Same answer as asking the fitted model itself.
        let grid = file.model.default_grid(None, &file.default_cuts);
        for r in [0usize, 17, 199] {
            let row: Vec<f64> = prep.original.predictors().row(r).iter().copied().collect();
            let direct = finreg::inference::predict_probs(&prep.original, &file.theta, &row, &grid).unwrap();
            assert_eq!(direct, before.rows[r].probs);
        }
        // Through the binary as well.
        let path = dir.path().join("rt.json");
        file.write(&path).unwrap();
        let o = run(&["predict", "--fit-file", path.to_str().unwrap(), "--data", data.to_str().unwrap(), "--format", "json"]);
        assert_eq!(probability_rows(&json(&o)), before.rows.iter().map(|r| r.probs.clone()).collect::<Vec<_>>());
    }
}

#[test]
fn standardizing_does_not_change_unpenalized_predictions() {
    let dir = tempfile::tempdir().unwrap();
    for (data, extra) in [
        (interval_csv(dir.path(), 300, 9), vec!["--scale", "unknown"]),
        (ordinal_csv(dir.path(), 300), vec![]),
        (survival_csv(dir.path(), 300), vec!["--model", "survival"]),
    ] {
        let mut out = Vec::new();
        for flag in ["--standardize", "--no-standardize"] {
            let fit_file = dir.path().join(format!("s{flag}.json"));
            let mut args = vec!["fit", "--data", data.to_str().unwrap(), flag, "--tol", "1e-10", "--out", fit_file.to_str().unwrap()];
            args.extend(&extra);
            assert!(run(&args).status.success());
            let o = run(&["predict", "--fit-file", fit_file.to_str().unwrap(), "--data", data.to_str().unwrap(), "--format", "json"]);
            out.push((FitFile::read(&fit_file).unwrap(), probability_rows(&json(&o))));
        }
        let ((fa, pa), (fb, pb)) = (&out[0], &out[1]);
        assert!(fa.standardized && !fb.standardized);
        for (a, b) in fa.theta.iter().zip(&fb.theta) {
            assert!((a - b).abs() < 1e-6 * (1.0 + b.abs()), "{a} vs {b}");
        }
        for (ra, rb) in pa.iter().zip(pb) {
            for (a, b) in ra.iter().zip(rb) {
                assert!((a - b).abs() < 1e-8, "{a} vs {b}");
            }
        }
    }
}

#[test]
fn simulate_writes_tidy_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.toml");
    std::fs::write(
        &cfg,
        "setting = \"extreme_value_lowdim\"\nn = 60\np = 3\ninterval_sizes = [1.0, 2.0]\nreplications = 4\nseed = 3\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["reports"].as_array().unwrap().len(), 2);
    let plot = std::fs::read_to_string(out.join("plot.csv")).unwrap();
    assert_eq!(plot.lines().next(), Some("setting,interval_size,method,metric,value,mc_se"));
    assert_eq!(plot.lines().count(), 1 + 2 * 2 * 2);
    assert_eq!(std::fs::read_to_string(out.join("summary.csv")).unwrap().lines().count(), 1 + 2 * 2);

    std::fs::write(&cfg, "setting = \"extreme_value_lowdim\"\nn = 60\np = 4\ninterval_sizes = [1.0]\nreplications = 1\nseed = 3\n").unwrap();
    assert_eq!(run(&["simulate", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
}
