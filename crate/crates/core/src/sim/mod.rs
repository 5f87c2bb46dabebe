//! Simulation designs comparing the interval likelihood with naive fits that
//! treat interval representatives as exact responses.

pub mod naive;

use crate::cv::{fit_path, kfold_cv, lambda_max, log_grid, misclassification_rate, CvOptions};
use crate::design::{build_interval_regression, ModelData, Scale};
use crate::error::{Error, Result};
use crate::family::{ExtReal, LinkFamily};
use crate::prox_newton::{fit, SolverOptions};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Upper finite cut of every grid.
pub const GRID_LIMIT: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    /// Extreme-value errors, intercept plus two predictors, exponential-scale bins.
    ExtremeValueLowdim,
    /// Normal errors, `p` may exceed `n`, symmetric bins on the latent scale.
    GaussianHighdim,
}

impl Setting {
    pub fn family(self) -> LinkFamily {
        match self {
            Setting::ExtremeValueLowdim => LinkFamily::ExtremeValue,
            Setting::GaussianHighdim => LinkFamily::Gaussian,
        }
    }

    pub fn has_intercept(self) -> bool {
        self == Setting::ExtremeValueLowdim
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub setting: Setting,
    pub n: usize,
    /// Number of coefficients, intercept included.
    pub p: usize,
    pub interval_size: f64,
    pub replications: usize,
    pub seed: u64,
    /// Size of the fresh test set used for misclassification rates.
    #[serde(default)]
    pub n_test: Option<usize>,
    #[serde(default = "default_k_folds")]
    pub k_folds: usize,
    #[serde(default = "default_n_lambda")]
    pub n_lambda: usize,
    #[serde(default = "default_lambda_ratio")]
    pub lambda_ratio: f64,
}

fn default_k_folds() -> usize {
    5
}

fn default_n_lambda() -> usize {
    30
}

fn default_lambda_ratio() -> f64 {
    0.05
}

impl SimConfig {
    pub fn new(setting: Setting, n: usize, p: usize, interval_size: f64, replications: usize, seed: u64) -> Self {
        SimConfig {
            setting,
            n,
            p,
            interval_size,
            replications,
            seed,
            n_test: None,
            k_folds: default_k_folds(),
            n_lambda: default_n_lambda(),
            lambda_ratio: default_lambda_ratio(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.setting == Setting::ExtremeValueLowdim && self.p != 3 {
            return bad(format!("the low-dimensional setting has p = 3, got {}", self.p));
        }
        if self.p < 3 {
            return bad(format!("p must be at least 3, got {}", self.p));
        }
        if !(self.interval_size > 0.0 && self.interval_size.is_finite()) {
            return bad(format!("interval size {} must be positive", self.interval_size));
        }
        if self.n < 2 || self.replications == 0 {
            return bad("need n >= 2 and at least one replication".into());
        }
        if self.setting == Setting::GaussianHighdim && (self.k_folds < 2 || self.k_folds > self.n) {
            return bad(format!("k_folds {} out of range", self.k_folds));
        }
        Ok(())
    }

    pub fn n_test(&self) -> usize {
        self.n_test.unwrap_or(self.n)
    }
}

/// `[1, 1/2, -1/2, 0, …, 0]` of length `p`.
pub fn theta_star(p: usize) -> Vec<f64> {
    let mut t = vec![0.0; p];
    t[0] = 1.0;
    t[1] = 0.5;
    t[2] = -0.5;
    t
}

/// Rows drawn from `N(0, Σ)`, `Σ_ij = 0.5^|i-j|`, via the AR(1) recursion.
pub fn raw_predictors<R: Rng>(rng: &mut R, n: usize, p: usize) -> DMatrix<f64> {
    let innov = 0.75_f64.sqrt();
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let mut prev = 0.0;
        for j in 0..p {
            let e: f64 = StandardNormal.sample(rng);
            prev = if j == 0 { e } else { 0.5 * prev + innov * e };
            x[(i, j)] = prev;
        }
    }
    x
}

/// Column means and standard deviations (`n - 1` denominator).
pub fn column_moments(x: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = x.nrows() as f64;
    (0..x.ncols())
        .map(|j| {
            let col = x.column(j);
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (mean, var.sqrt())
        })
        .unzip()
}

fn apply_moments(x: &DMatrix<f64>, means: &[f64], sds: &[f64], intercept: bool) -> DMatrix<f64> {
    let scaled = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - means[j]) / sds[j]);
    if intercept {
        scaled.insert_column(0, 1.0)
    } else {
        scaled
    }
}

/// Centered and scaled predictors; with `intercept` the first of the `p`
/// columns is ones and the remaining `p - 1` are random.
pub fn gen_predictors(n: usize, p: usize, intercept: bool, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = raw_predictors(&mut rng, n, p - usize::from(intercept));
    let (m, s) = column_moments(&raw);
    apply_moments(&raw, &m, &s, intercept)
}

/// Finite bin edges: `d, 2d, …, kd, 5` for the extreme-value setting (which
/// bins `exp(Y*)` from 0), and `-5, -kd, …, -d, 0, d, …, kd, 5` for the
/// Gaussian setting, with `k` the largest integer such that `kd < 5`.
pub fn bin_edges(setting: Setting, d: f64) -> Vec<f64> {
    let mut k = (GRID_LIMIT / d).floor() as usize;
    while k > 0 && k as f64 * d >= GRID_LIMIT {
        k -= 1;
    }
    let up: Vec<f64> = (1..=k).map(|j| j as f64 * d).collect();
    match setting {
        Setting::ExtremeValueLowdim => {
            let mut e = up;
            e.push(GRID_LIMIT);
            e
        }
        Setting::GaussianHighdim => {
            let mut e = vec![-GRID_LIMIT];
            e.extend(up.iter().rev().map(|v| -v));
            e.push(0.0);
            e.extend(up);
            e.push(GRID_LIMIT);
            e
        }
    }
}

/// Observed intervals on the scale of the binned quantity, plus the latent draws.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedResponse {
    pub lower: Vec<ExtReal>,
    pub upper: Vec<ExtReal>,
    /// `Y*` (the Gaussian setting bins `Y*`, the extreme-value one `exp(Y*)`).
    pub latent: Vec<f64>,
}

impl BinnedResponse {
    /// Intervals for `Y*`: log endpoints in the extreme-value setting.
    pub fn latent_intervals(&self, setting: Setting) -> (Vec<ExtReal>, Vec<ExtReal>) {
        match setting {
            Setting::GaussianHighdim => (self.lower.clone(), self.upper.clone()),
            Setting::ExtremeValueLowdim => {
                let log = |e: &ExtReal| match *e {
                    ExtReal::Finite(0.0) => ExtReal::NegInf,
                    ExtReal::Finite(v) => ExtReal::Finite(v.ln()),
                    other => other,
                };
                (self.lower.iter().map(log).collect(), self.upper.iter().map(log).collect())
            }
        }
    }
}

pub fn gen_intervals<R: Rng>(setting: Setting, x: &DMatrix<f64>, theta: &[f64], d: f64, rng: &mut R) -> BinnedResponse {
    let edges = bin_edges(setting, d);
    let n = x.nrows();
    let mut out = BinnedResponse {
        lower: Vec::with_capacity(n),
        upper: Vec::with_capacity(n),
        latent: Vec::with_capacity(n),
    };
    let bottom = match setting {
        Setting::ExtremeValueLowdim => ExtReal::Finite(0.0),
        Setting::GaussianHighdim => ExtReal::NegInf,
    };
    for i in 0..n {
        let mean: f64 = (0..x.ncols()).map(|j| x[(i, j)] * theta[j]).sum();
        let w: f64 = match setting {
            Setting::ExtremeValueLowdim => {
                let e: f64 = Exp1.sample(rng);
                e.ln()
            }
            Setting::GaussianHighdim => StandardNormal.sample(rng),
        };
        let y = mean + w;
        let observed = match setting {
            Setting::ExtremeValueLowdim => y.exp(),
            Setting::GaussianHighdim => y,
        };
        let idx = edges.partition_point(|&e| e <= observed);
        out.lower.push(if idx == 0 { bottom } else { ExtReal::Finite(edges[idx - 1]) });
        out.upper.push(if idx == edges.len() { ExtReal::PosInf } else { ExtReal::Finite(edges[idx]) });
        out.latent.push(y);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// The interval likelihood fitted by proximal Newton.
    IntervalLikelihood,
    /// Log-link gamma GLM on upper endpoints.
    GammaGlm,
    /// Squared-error lasso on interval midpoints.
    MidpointLasso,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::IntervalLikelihood => "interval-likelihood",
            Method::GammaGlm => "gamma-glm",
            Method::MidpointLasso => "midpoint-lasso",
        }
    }

    pub fn for_setting(setting: Setting) -> [Method; 2] {
        match setting {
            Setting::ExtremeValueLowdim => [Method::IntervalLikelihood, Method::GammaGlm],
            Setting::GaussianHighdim => [Method::IntervalLikelihood, Method::MidpointLasso],
        }
    }
}

/// One method in one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepOutcome {
    pub replication: usize,
    pub method: Method,
    /// Squared error over the three nonzero coordinates; `None` when the fit failed.
    pub sse: Option<f64>,
    pub misclass: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    /// `Σ_i Σ_{j≤3} (θ̂_j^i - θ*_j)²` over successful replications.
    pub sse_nonzero: f64,
    pub sse_mc_se: f64,
    pub mean_misclass: f64,
    pub misclass_mc_se: f64,
    pub n_ok: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config: SimConfig,
    pub methods: Vec<MethodSummary>,
    pub replications: Vec<RepOutcome>,
}

impl SimReport {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }
}

/// Random stream of replication `rep`.
pub fn replication_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

fn sse3(theta: &[f64], truth: &[f64]) -> f64 {
    (0..3).map(|j| (theta[j] - truth[j]).powi(2)).sum()
}

struct RepData {
    x: DMatrix<f64>,
    y: BinnedResponse,
    x_test: DMatrix<f64>,
    y_test: BinnedResponse,
}

fn gen_replication(cfg: &SimConfig, rep: usize, truth: &[f64]) -> RepData {
    let mut rng = replication_rng(cfg.seed, rep);
    let intercept = cfg.setting.has_intercept();
    let q = cfg.p - usize::from(intercept);
    let raw = raw_predictors(&mut rng, cfg.n, q);
    let raw_test = raw_predictors(&mut rng, cfg.n_test(), q);
    let (m, s) = column_moments(&raw);
    let x = apply_moments(&raw, &m, &s, intercept);
    let x_test = apply_moments(&raw_test, &m, &s, intercept);
    let y = gen_intervals(cfg.setting, &x, truth, cfg.interval_size, &mut rng);
    let y_test = gen_intervals(cfg.setting, &x_test, truth, cfg.interval_size, &mut rng);
    RepData { x, y, x_test, y_test }
}

fn latent_model(cfg: &SimConfig, x: &DMatrix<f64>, y: &BinnedResponse) -> Result<ModelData> {
    let (lo, hi) = y.latent_intervals(cfg.setting);
    build_interval_regression(x, &lo, &hi, Scale::KnownOne, cfg.setting.family())
}

/// Fraction of rows whose prediction lies outside its latent interval.
fn miss_rate(pred: impl Fn(usize) -> f64, lo: &[ExtReal], hi: &[ExtReal]) -> f64 {
    let n = lo.len();
    let misses = (0..n)
        .filter(|&i| {
            let v = pred(i);
            let above = match lo[i] {
                ExtReal::Finite(a) => v >= a,
                ExtReal::NegInf => true,
                ExtReal::PosInf => false,
            };
            let below = match hi[i] {
                ExtReal::Finite(b) => v < b,
                ExtReal::PosInf => true,
                ExtReal::NegInf => false,
            };
            !(above && below)
        })
        .count();
    misses as f64 / n as f64
}

/// Both methods of a replication share one fold partition.
fn fold_seed(cfg: &SimConfig, rep: usize) -> u64 {
    cfg.seed.wrapping_add(rep as u64)
}

fn likelihood_fit(cfg: &SimConfig, data: &RepData, rep: usize, opts: &SolverOptions) -> Result<Vec<f64>> {
    let model = latent_model(cfg, &data.x, &data.y)?;
    match cfg.setting {
        Setting::ExtremeValueLowdim => {
            let r = fit(&model, &model.penalty(0.0, 0.0), opts, None)?;
            if !r.converged {
                return Err(Error::Domain(format!("fit stopped: {:?}", r.status)));
            }
            Ok(r.theta_hat)
        }
        Setting::GaussianHighdim => {
            let pen = model.penalty(0.0, 0.0);
            let head = lambda_max(&model, &pen, opts)?;
            let grid = log_grid(head.value, cfg.n_lambda, cfg.lambda_ratio)?;
            let cv = CvOptions { k_folds: cfg.k_folds, seed: fold_seed(cfg, rep), ..CvOptions::default() };
            let res = kfold_cv(&model, &pen, &grid, &cv, opts)?;
            let path = fit_path(&model, &pen, &grid[..=res.selected_index], opts, true, Some(&head.theta_restricted));
            let last = path.into_iter().last().expect("nonempty path")?;
            Ok(last.theta_hat)
        }
    }
}

fn run_method(cfg: &SimConfig, data: &RepData, rep: usize, method: Method, truth: &[f64], opts: &SolverOptions) -> RepOutcome {
    let (lo_test, hi_test) = data.y_test.latent_intervals(cfg.setting);
    let result: Result<(f64, f64)> = (|| match method {
        Method::IntervalLikelihood => {
            let theta = likelihood_fit(cfg, data, rep, opts)?;
            let test_model = latent_model(cfg, &data.x_test, &data.y_test)?;
            let rows: Vec<usize> = (0..test_model.n_obs()).collect();
            Ok((sse3(&theta, truth), misclassification_rate(&test_model, &theta, &rows)?))
        }
        Method::GammaGlm => {
            let d = cfg.interval_size;
            let y: Vec<f64> = data.y.upper.iter().map(|u| u.finite().unwrap_or(GRID_LIMIT + d)).collect();
            let beta = naive::gamma_glm(&data.x, &y, 200, 1e-12)?;
            let xt = &data.x_test;
            let pred = |i: usize| (0..xt.ncols()).map(|j| xt[(i, j)] * beta[j]).sum::<f64>();
            Ok((sse3(&beta, truth), miss_rate(pred, &lo_test, &hi_test)))
        }
        Method::MidpointLasso => {
            let half = 0.5 * cfg.interval_size;
            let y: Vec<f64> = data
                .y
                .lower
                .iter()
                .zip(&data.y.upper)
                .map(|(l, u)| match (l, u) {
                    (ExtReal::Finite(a), ExtReal::Finite(b)) => 0.5 * (a + b),
                    (ExtReal::NegInf, ExtReal::Finite(b)) => b - half,
                    (ExtReal::Finite(a), _) => a + half,
                    _ => 0.0,
                })
                .collect();
            let (lasso, _) = naive::lasso_cv(&data.x, &y, cfg.n_lambda, cfg.lambda_ratio, cfg.k_folds, fold_seed(cfg, rep))?;
            let pred = |i: usize| lasso.predict(&data.x_test, i);
            Ok((sse3(&lasso.beta, truth), miss_rate(pred, &lo_test, &hi_test)))
        }
    })();
    match result {
        Ok((sse, mis)) => RepOutcome { replication: rep, method, sse: Some(sse), misclass: Some(mis), error: None },
        Err(e) => RepOutcome { replication: rep, method, sse: None, misclass: None, error: Some(e.to_string()) },
    }
}

fn run_replication(cfg: &SimConfig, rep: usize, opts: &SolverOptions) -> Vec<RepOutcome> {
    let truth = theta_star(cfg.p);
    let data = gen_replication(cfg, rep, &truth);
    Method::for_setting(cfg.setting)
        .iter()
        .map(|&m| run_method(cfg, &data, rep, m, &truth, opts))
        .collect()
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (mean, sd)
}

fn summarize(method: Method, outcomes: &[RepOutcome]) -> MethodSummary {
    let mine: Vec<&RepOutcome> = outcomes.iter().filter(|o| o.method == method).collect();
    let sse: Vec<f64> = mine.iter().filter_map(|o| o.sse).collect();
    let mis: Vec<f64> = mine.iter().filter_map(|o| o.misclass).collect();
    let m = sse.len() as f64;
    let (_, sse_sd) = mean_sd(&sse);
    let (mis_mean, mis_sd) = mean_sd(&mis);
    MethodSummary {
        method,
        sse_nonzero: sse.iter().sum(),
        sse_mc_se: sse_sd * m.sqrt(),
        mean_misclass: mis_mean,
        misclass_mc_se: mis_sd / m.sqrt(),
        n_ok: sse.len(),
        n_failed: mine.len() - sse.len(),
    }
}

/// Runs every replication (in parallel, merged in replication order).
pub fn run_experiment(cfg: &SimConfig) -> Result<SimReport> {
    run_experiment_with(cfg, &SolverOptions::default())
}

pub fn run_experiment_with(cfg: &SimConfig, opts: &SolverOptions) -> Result<SimReport> {
    cfg.validate()?;
    opts.validate()?;
    let replications: Vec<RepOutcome> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| run_replication(cfg, rep, opts))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let methods = Method::for_setting(cfg.setting)
        .iter()
        .map(|&m| summarize(m, &replications))
        .collect();
    Ok(SimReport { config: cfg.clone(), methods, replications })
}

/// Same report, one replication after another on the calling thread.
pub fn run_experiment_serial(cfg: &SimConfig, opts: &SolverOptions) -> Result<SimReport> {
    cfg.validate()?;
    let replications: Vec<RepOutcome> = (0..cfg.replications).flat_map(|rep| run_replication(cfg, rep, opts)).collect();
    let methods = Method::for_setting(cfg.setting)
        .iter()
        .map(|&m| summarize(m, &replications))
        .collect();
    Ok(SimReport { config: cfg.clone(), methods, replications })
}

/// Long-format row for plotting metric against interval size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub setting: Setting,
    pub interval_size: f64,
    pub method: String,
    pub metric: String,
    pub value: f64,
    pub mc_se: f64,
}

pub fn plot_rows(reports: &[SimReport]) -> Vec<PlotRow> {
    let mut rows = Vec::new();
    for r in reports {
        for m in &r.methods {
            let mut push = |metric: &str, value: f64, mc_se: f64| {
                rows.push(PlotRow {
                    setting: r.config.setting,
                    interval_size: r.config.interval_size,
                    method: m.method.name().to_string(),
                    metric: metric.to_string(),
                    value,
                    mc_se,
                })
            };
            push("sse_nonzero", m.sse_nonzero, m.sse_mc_se);
            push("mean_misclass", m.mean_misclass, m.misclass_mc_se);
        }
    }
    rows
}

#[derive(Serialize)]
struct SummaryCsvRow<'a> {
    setting: Setting,
    n: usize,
    p: usize,
    interval_size: f64,
    replications: usize,
    method: &'a str,
    sse_nonzero: f64,
    sse_mc_se: f64,
    mean_misclass: f64,
    misclass_mc_se: f64,
    n_ok: usize,
    n_failed: usize,
}

/// One CSV row per (report, method).
pub fn write_summary_csv<W: Write>(reports: &[SimReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        for m in &r.methods {
            w.serialize(SummaryCsvRow {
                setting: r.config.setting,
                n: r.config.n,
                p: r.config.p,
                interval_size: r.config.interval_size,
                replications: r.config.replications,
                method: m.method.name(),
                sse_nonzero: m.sse_nonzero,
                sse_mc_se: m.sse_mc_se,
                mean_misclass: m.mean_misclass,
                misclass_mc_se: m.misclass_mc_se,
                n_ok: m.n_ok,
                n_failed: m.n_failed,
            })
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        }
    }
    w.flush().map_err(|e| Error::InvalidInput(e.to_string()))
}

pub fn write_plot_csv<W: Write>(rows: &[PlotRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::InvalidInput(e.to_string()))
}
