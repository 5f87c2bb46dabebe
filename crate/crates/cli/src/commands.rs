use crate::args::{CvArgs, FitArgs, Format, ModelArgs, PredictArgs, SimulateArgs};
use crate::data::Table;
use crate::error::{CliError, CliResult, ErrorKind};
use crate::model::{Diagnostics, FitFile, ModelClass, Prepared};
use crate::render;
use finreg::cv::{fit_path, kfold_cv, lambda_max, log_grid, CvOptions, CvResult};
use finreg::inference::{natural_scale_table, wald_table};
use finreg::sim::{plot_rows, run_experiment, write_plot_csv, write_summary_csv, SimConfig, SimReport, Setting};
use finreg::{fit, neg_loglik, FitResult, Scale, SolverOptions};
use serde::{Deserialize, Serialize};
use std::path::Path;

fn solver_options(args: &ModelArgs) -> CliResult<SolverOptions> {
    let mut opts = SolverOptions::default().with_tol(args.tol);
    if let Some(m) = args.max_outer {
        opts.max_outer = m;
    }
    opts.validate()?;
    Ok(opts)
}

fn check_lambda(name: &str, v: f64) -> CliResult<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::usage(format!("--{name} must be finite and nonnegative, got {v}")))
    }
}

fn emit<T: Serialize>(format: Format, value: &T, text: impl FnOnce() -> String) {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(value).expect("output serializes")),
        Format::Text => print!("{}", text()),
    }
}

/// Exit status of a finished fit: 3 when the solver stopped short.
fn fit_status(f: &FitFile) -> i32 {
    if f.diagnostics.converged {
        0
    } else {
        eprintln!(
            "{}",
            CliError::numerical(format!(
                "solver stopped without converging ({:?}, |J| = {:e})",
                f.diagnostics.status, f.diagnostics.j_norm
            ))
            .to_json()
        );
        ErrorKind::Numerical.exit_code()
    }
}

/// Packages a working-scale fit as a fit file on the original scale, with
/// inference when the fit is unpenalized.
pub fn finish(prep: &Prepared, res: &FitResult, cv: Option<CvResult>) -> CliResult<FitFile> {
    let theta = prep.to_original(&res.theta_hat);
    let (inference, natural_scale) = if res.is_penalized() {
        (None, None)
    } else {
        let on_original = FitResult {
            theta_hat: theta.clone(),
            neg_loglik_at_solution: neg_loglik(&prep.original, &theta),
            ..res.clone()
        };
        let table = wald_table(&prep.original, &on_original, None)?;
        let natural = match prep.spec.scale {
            Some(Scale::Unknown) => Some(natural_scale_table(&prep.original, &on_original)?),
            _ => None,
        };
        (Some(table), natural)
    };
    Ok(FitFile {
        schema_version: crate::SCHEMA_VERSION,
        model: prep.spec.clone(),
        predictors: prep.predictors.clone(),
        intercept: prep.intercept,
        labels: prep.original.labels().to_vec(),
        theta,
        lambda1: res.lambda1,
        lambda2: res.lambda2,
        standardized: prep.standardizer.is_some(),
        n_obs: res.n_obs,
        diagnostics: Diagnostics::from(res),
        inference,
        natural_scale,
        cv,
        default_cuts: prep.default_cuts.clone(),
    })
}

pub fn fit_cmd(args: &FitArgs) -> CliResult<i32> {
    let m = &args.model;
    check_lambda("lambda1", args.lambda1)?;
    check_lambda("lambda2", m.lambda2)?;
    let opts = solver_options(m)?;
    let penalized = args.lambda1 > 0.0 || m.lambda2 > 0.0;
    let table = Table::read(&m.data)?;
    let prep = Prepared::new(m, &table, m.standardize_choice().unwrap_or(penalized))?;
    let pen = prep.working.penalty(args.lambda1, m.lambda2);
    let res = fit(&prep.working, &pen, &opts, None)?;
    let file = finish(&prep, &res, None)?;
    if let Some(out) = &m.out {
        file.write(out)?;
    }
    emit(m.format, &file, || render::fit(&file));
    Ok(fit_status(&file))
}

/// Explicit grid, sorted from the largest value down.
fn explicit_grid(values: &[f64]) -> CliResult<Vec<f64>> {
    if values.is_empty() {
        return Err(CliError::usage("--lambda-grid is empty"));
    }
    for &v in values {
        check_lambda("lambda-grid", v)?;
    }
    let mut g = values.to_vec();
    g.sort_by(|a, b| b.total_cmp(a));
    g.dedup();
    Ok(g)
}

pub fn cv_cmd(args: &CvArgs) -> CliResult<i32> {
    let m = &args.model;
    check_lambda("lambda2", m.lambda2)?;
    let opts = solver_options(m)?;
    let table = Table::read(&m.data)?;
    let prep = Prepared::new(m, &table, m.standardize_choice().unwrap_or(true))?;
    let pen = prep.working.penalty(0.0, m.lambda2);
    let head = lambda_max(&prep.working, &pen, &opts)?;
    let grid = match &args.lambda_grid {
        Some(g) => explicit_grid(g)?,
        None => log_grid(head.value, args.n_lambda, args.lambda_ratio)?,
    };
    let cv_opts = CvOptions { k_folds: args.k_folds, seed: args.seed, warm_start: true, one_se: args.one_se };
    let res = kfold_cv(&prep.working, &pen, &grid, &cv_opts, &opts)?;
    let path = fit_path(&prep.working, &pen, &grid[..=res.selected_index], &opts, true, Some(&head.theta_restricted));
    let chosen = path.into_iter().last().expect("nonempty path")?;
    let file = finish(&prep, &chosen, Some(res))?;
    if let Some(out) = &m.out {
        file.write(out)?;
    }
    emit(m.format, &file, || render::cv(file.cv.as_ref().expect("cv result"), &file));
    Ok(fit_status(&file))
}

pub fn predict_cmd(args: &PredictArgs) -> CliResult<i32> {
    let file = FitFile::read(&args.fit_file)?;
    if args.cuts.is_some() && file.model.class == ModelClass::Cumulative {
        return Err(CliError::usage("--cuts does not apply to cumulative models"));
    }
    let table = Table::read(&args.data)?;
    let preds = file.predict(&table, args.cuts.clone())?;
    emit(args.format, &preds, || render::predictions(&preds));
    Ok(0)
}

/// Experiment file: one run of the simulation per interval size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimFile {
    pub setting: Setting,
    pub n: usize,
    pub p: usize,
    pub interval_sizes: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
    #[serde(default)]
    pub n_test: Option<usize>,
    #[serde(default)]
    pub k_folds: Option<usize>,
    #[serde(default)]
    pub n_lambda: Option<usize>,
    #[serde(default)]
    pub lambda_ratio: Option<f64>,
}

impl SimFile {
    pub fn configs(&self) -> CliResult<Vec<SimConfig>> {
        if self.interval_sizes.is_empty() {
            return Err(CliError::usage("interval_sizes is empty"));
        }
        self.interval_sizes
            .iter()
            .map(|&size| {
                let mut c = SimConfig::new(self.setting, self.n, self.p, size, self.replications, self.seed);
                c.n_test = self.n_test;
                c.k_folds = self.k_folds.unwrap_or(c.k_folds);
                c.n_lambda = self.n_lambda.unwrap_or(c.n_lambda);
                c.lambda_ratio = self.lambda_ratio.unwrap_or(c.lambda_ratio);
                c.validate().map_err(|e| CliError::usage(e.to_string()))?;
                Ok(c)
            })
            .collect()
    }
}

#[derive(Serialize)]
struct SimOutput<'a> {
    schema_version: u32,
    reports: &'a [SimReport],
}

fn create(path: &Path) -> CliResult<std::fs::File> {
    std::fs::File::create(path).map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

pub fn simulate_cmd(args: &SimulateArgs) -> CliResult<i32> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", args.config.display())))?;
    let sim: SimFile = toml::from_str(&text).map_err(|e| CliError::usage(format!("bad config: {e}")))?;
    let reports = sim.configs()?.iter().map(run_experiment).collect::<finreg::Result<Vec<_>>>()?;
    let output = SimOutput { schema_version: crate::SCHEMA_VERSION, reports: &reports };
    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::usage(format!("cannot create {}: {e}", dir.display())))?;
        let json = serde_json::to_string_pretty(&output).expect("report serializes");
        std::fs::write(dir.join("report.json"), json)
            .map_err(|e| CliError::usage(format!("cannot write report.json: {e}")))?;
        write_summary_csv(&reports, create(&dir.join("summary.csv"))?)?;
        write_plot_csv(&plot_rows(&reports), create(&dir.join("plot.csv"))?)?;
    }
    emit(args.format, &output, || render::simulation(&reports));
    Ok(0)
}
