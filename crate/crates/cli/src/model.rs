//! Model assembly from a parsed table, and the JSON fit file.

use crate::args::{BasisArg, ModelArgs, ModelArg, ScaleArg};
use crate::data::{Table, CATEGORY};
use crate::error::{CliError, CliResult};
use finreg::cv::CvResult;
use finreg::design::{CategoryGrid, Standardizer};
use finreg::inference::{predict_probs, InferenceTable, ScaleTable};
use finreg::{
    build_cumulative, build_interval_regression, build_survival, CoordRole, ExtReal, FitResult, FitStatus,
    LinkFamily, ModelData, Scale, SurvivalBasis,
};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub const INTERCEPT: &str = "(Intercept)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelClass {
    Interval,
    Cumulative,
    Survival,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    Exponential,
    Weibull,
}

impl Basis {
    fn survival(self) -> SurvivalBasis {
        match self {
            Basis::Exponential => SurvivalBasis::Exponential,
            Basis::Weibull => SurvivalBasis::Weibull,
        }
    }
}

/// Everything needed to rebuild a model of the same shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub class: ModelClass,
    pub family: LinkFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<Scale>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Basis>,
}

/// Observed responses in the shape the builders want.
#[derive(Debug, Clone)]
pub enum Responses {
    Interval { lower: Vec<ExtReal>, upper: Vec<ExtReal> },
    Categories(Vec<usize>),
    Survival { lower: Vec<f64>, upper: Vec<ExtReal> },
}

impl ModelSpec {
    /// Resolves defaults and checks flag combinations against the table.
    pub fn from_args(args: &ModelArgs, table: &Table) -> CliResult<ModelSpec> {
        let class = match args.model {
            Some(ModelArg::Interval) => ModelClass::Interval,
            Some(ModelArg::Cumulative) => ModelClass::Cumulative,
            Some(ModelArg::Survival) => ModelClass::Survival,
            None if table.column(CATEGORY).is_some() => ModelClass::Cumulative,
            None => ModelClass::Interval,
        };
        let family = match (class, args.family) {
            (ModelClass::Survival, Some(f)) if LinkFamily::from(f) != LinkFamily::ExtremeValue => {
                return Err(CliError::usage("survival models use the extreme-value family"))
            }
            (_, Some(f)) => f.into(),
            (ModelClass::Interval, None) => LinkFamily::Gaussian,
            (ModelClass::Cumulative, None) => LinkFamily::Logistic,
            (ModelClass::Survival, None) => LinkFamily::ExtremeValue,
        };
        let scale = (class == ModelClass::Interval).then_some(match args.scale {
            ScaleArg::Known => Scale::KnownOne,
            ScaleArg::Unknown => Scale::Unknown,
        });
        let basis = (class == ModelClass::Survival).then_some(match args.basis {
            BasisArg::Exponential => Basis::Exponential,
            BasisArg::Weibull => Basis::Weibull,
        });
        Ok(ModelSpec { class, family, scale, categories: None, basis })
    }

    pub fn has_intercept_slot(&self) -> bool {
        self.class != ModelClass::Cumulative
    }

    /// Reads the response columns; fixes the category count for ordinal models.
    pub fn responses(&mut self, table: &Table, categories: Option<usize>) -> CliResult<Responses> {
        match self.class {
            ModelClass::Interval => {
                let (lower, upper) = table.endpoints()?;
                Ok(Responses::Interval { lower, upper })
            }
            ModelClass::Cumulative => {
                let y = table.categories()?;
                let observed = y.iter().copied().max().unwrap_or(0);
                let m = categories.unwrap_or(observed);
                if observed > m {
                    return Err(CliError::data(format!("category {observed} exceeds --categories {m}")));
                }
                self.categories = Some(m);
                Ok(Responses::Categories(y))
            }
            ModelClass::Survival => {
                let (lower, upper) = table.endpoints()?;
                let lower = lower
                    .iter()
                    .enumerate()
                    .map(|(r, v)| match v {
                        ExtReal::NegInf => Ok(0.0),
                        ExtReal::Finite(t) if *t >= 0.0 => Ok(*t),
                        _ => Err(CliError::data(format!("survival time {v} must be nonnegative")).at(r + 1, Some("lower"))),
                    })
                    .collect::<CliResult<Vec<f64>>>()?;
                Ok(Responses::Survival { lower, upper })
            }
        }
    }

    /// Builds the model on predictor matrix `x` (intercept column included).
    pub fn build(&self, resp: &Responses, x: &DMatrix<f64>, names: &[String]) -> CliResult<ModelData> {
        let model = match (self.class, resp) {
            (ModelClass::Interval, Responses::Interval { lower, upper }) => {
                build_interval_regression(x, lower, upper, self.scale.unwrap_or(Scale::KnownOne), self.family)?
            }
            (ModelClass::Cumulative, Responses::Categories(y)) => {
                build_cumulative(y, self.categories.unwrap_or(2), Some(x), self.family)?
            }
            (ModelClass::Survival, Responses::Survival { lower, upper }) => {
                build_survival(lower, upper, x, &self.basis.unwrap_or(Basis::Weibull).survival())?
            }
            _ => return Err(CliError::usage("response does not match the model class")),
        };
        Ok(model.with_predictor_names(names)?)
    }

    /// A one-row model with the right shape, for predictions from stored θ.
    pub fn shell(&self, p: usize) -> CliResult<ModelData> {
        let x = DMatrix::zeros(1, p);
        let resp = match self.class {
            ModelClass::Interval => Responses::Interval { lower: vec![ExtReal::NegInf], upper: vec![ExtReal::PosInf] },
            ModelClass::Cumulative => Responses::Categories(vec![1]),
            ModelClass::Survival => Responses::Survival { lower: vec![0.0], upper: vec![ExtReal::PosInf] },
        };
        let names: Vec<String> = (0..p).map(|c| format!("x{c}")).collect();
        self.build(&resp, &x, &names)
    }

    pub fn default_grid(&self, cuts: Option<Vec<f64>>, stored: &[f64]) -> CategoryGrid {
        match self.class {
            ModelClass::Cumulative => CategoryGrid::Ordinal,
            _ => CategoryGrid::Cuts { cuts: cuts.unwrap_or_else(|| stored.to_vec()) },
        }
    }
}

/// Distinct finite response endpoints, used as default prediction cuts.
pub fn endpoint_cuts(resp: &Responses) -> Vec<f64> {
    let mut cuts: Vec<f64> = match resp {
        Responses::Interval { lower, upper } => lower.iter().chain(upper).filter_map(|v| v.finite()).collect(),
        Responses::Survival { lower, upper } => lower
            .iter()
            .copied()
            .chain(upper.iter().filter_map(|v| v.finite()))
            .filter(|&t| t > 0.0)
            .collect(),
        Responses::Categories(_) => Vec::new(),
    };
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts
}

/// Predictor matrix for the named data columns, with a leading column of ones
/// when `intercept` is set.
pub fn design_matrix(table: &Table, names: &[String], intercept: bool) -> CliResult<DMatrix<f64>> {
    let raw = table.predictors(names)?;
    if !intercept {
        return Ok(raw);
    }
    let mut x = DMatrix::from_element(raw.nrows(), raw.ncols() + 1, 1.0);
    x.columns_mut(1, raw.ncols()).copy_from(&raw);
    Ok(x)
}

pub fn coefficient_names(predictors: &[String], intercept: bool) -> Vec<String> {
    let mut names = Vec::with_capacity(predictors.len() + 1);
    if intercept {
        names.push(INTERCEPT.to_string());
    }
    names.extend(predictors.iter().cloned());
    names
}

/// Model on the original predictors, plus the model actually handed to the
/// solver (standardized columns when requested).
pub struct Prepared {
    pub spec: ModelSpec,
    pub predictors: Vec<String>,
    pub intercept: bool,
    pub original: ModelData,
    pub working: ModelData,
    pub standardizer: Option<Standardizer>,
    pub default_cuts: Vec<f64>,
}

impl Prepared {
    pub fn new(args: &ModelArgs, table: &Table, standardize: bool) -> CliResult<Prepared> {
        let mut spec = ModelSpec::from_args(args, table)?;
        let resp = spec.responses(table, args.categories)?;
        let predictors = table.predictor_names();
        let intercept = spec.has_intercept_slot() && !args.no_intercept;
        let x = design_matrix(table, &predictors, intercept)?;
        let names = coefficient_names(&predictors, intercept);
        let original = spec.build(&resp, &x, &names)?;
        let (working, standardizer) = if standardize {
            let s = Standardizer::fit(&x, spec.class == ModelClass::Cumulative);
            (spec.build(&resp, &s.apply(&x), &names)?, Some(s))
        } else {
            (original.clone(), None)
        };
        let default_cuts = endpoint_cuts(&resp);
        Ok(Prepared { spec, predictors, intercept, original, working, standardizer, default_cuts })
    }

    /// θ on the original predictor scale.
    pub fn to_original(&self, theta: &[f64]) -> Vec<f64> {
        match &self.standardizer {
            Some(s) => s.to_original(self.working.roles(), theta),
            None => theta.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub converged: bool,
    pub status: FitStatus,
    pub j_norm: f64,
    pub outer_iters: usize,
    pub inner_iters: usize,
    /// Penalized objective of the working (possibly standardized) problem.
    pub objective: f64,
    pub neg_loglik: f64,
}

impl From<&FitResult> for Diagnostics {
    fn from(f: &FitResult) -> Self {
        Diagnostics {
            converged: f.converged,
            status: f.status,
            j_norm: f.j_norm,
            outer_iters: f.outer_iters,
            inner_iters: f.total_inner_iters,
            objective: f.objective,
            neg_loglik: f.neg_loglik_at_solution,
        }
    }
}

/// Saved fit: enough to reproduce predictions exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFile {
    pub schema_version: u32,
    pub model: ModelSpec,
    /// Data columns used as predictors, in order.
    pub predictors: Vec<String>,
    pub intercept: bool,
    pub labels: Vec<String>,
    /// Estimates on the original predictor scale.
    pub theta: Vec<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub standardized: bool,
    pub n_obs: usize,
    pub diagnostics: Diagnostics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inference: Option<InferenceTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub natural_scale: Option<ScaleTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv: Option<CvResult>,
    pub default_cuts: Vec<f64>,
}

impl FitFile {
    pub fn read(path: &std::path::Path) -> CliResult<FitFile> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read fit file {}: {e}", path.display())))?;
        let file: FitFile =
            serde_json::from_str(&text).map_err(|e| CliError::usage(format!("malformed fit file: {e}")))?;
        if file.schema_version != crate::SCHEMA_VERSION {
            return Err(CliError::usage(format!(
                "fit file schema version {} is not {}",
                file.schema_version,
                crate::SCHEMA_VERSION
            )));
        }
        Ok(file)
    }

    pub fn write(&self, path: &std::path::Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).expect("fit file serializes");
        std::fs::write(path, text).map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
    }

    /// Per-row predictions on `table`.
    pub fn predict(&self, table: &Table, cuts: Option<Vec<f64>>) -> CliResult<Predictions> {
        let x = design_matrix(table, &self.predictors, self.intercept)?;
        let shell = self.model.shell(x.ncols())?;
        if shell.dim() != self.theta.len() {
            return Err(CliError::usage(format!(
                "fit file has {} coefficients but the model needs {}",
                self.theta.len(),
                shell.dim()
            )));
        }
        let grid = self.model.default_grid(cuts, &self.default_cuts);
        let categories = grid.labels(shell.kind());
        let mut rows = Vec::with_capacity(x.nrows());
        for r in 0..x.nrows() {
            let row: Vec<f64> = x.row(r).iter().copied().collect();
            let probs = predict_probs(&shell, &self.theta, &row, &grid).map_err(|e| CliError::from(e).at(r + 1, None))?;
            let mode = probs
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (k, &p)| if p > best.1 { (k, p) } else { best })
                .0;
            rows.push(PredictedRow { row: r + 1, location: location(&shell, &self.theta, &row), mode: mode + 1, probs });
        }
        Ok(Predictions { schema_version: crate::SCHEMA_VERSION, categories, rows })
    }
}

/// Predicted latent location: `xᵀβ`, divided by the scale coordinate when
/// the model has one (log-time scale for survival models).
fn location(model: &ModelData, theta: &[f64], x: &[f64]) -> f64 {
    let mut lin = 0.0;
    let mut div = 1.0;
    for (j, role) in model.roles().iter().enumerate() {
        match role {
            CoordRole::Predictor { column } | CoordRole::Intercept { column } => lin += x[*column] * theta[j],
            CoordRole::InverseScale | CoordRole::Basis { index: 0 } => div = theta[j],
            _ => {}
        }
    }
    lin / div
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedRow {
    pub row: usize,
    pub location: f64,
    /// 1-based index of the most probable category.
    pub mode: usize,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    pub schema_version: u32,
    pub categories: Vec<String>,
    pub rows: Vec<PredictedRow>,
}
