//! Observation blocks `(Z_i, m_i)` and the builders for interval-censored
//! regression, cumulative (ordinal) models and interval-censored survival
//! models.
//!
//! Each observation maps the parameter vector to its latent interval through
//! `[a_i, b_i] = Z_i θ + m_i`. An endpoint that is infinite for the observed
//! response is flagged explicitly and carries a zero row.

use crate::error::{Error, Result};
use crate::family::{ExtReal, IntervalEndpoints, LinkFamily};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVec {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseVec {
    pub fn zeros() -> Self {
        SparseVec::default()
    }

    /// Drops exact zeros.
    pub fn from_dense(dense: &[f64]) -> Self {
        let mut v = SparseVec::zeros();
        for (j, &x) in dense.iter().enumerate() {
            if x != 0.0 {
                v.indices.push(j);
                v.values.push(x);
            }
        }
        v
    }

    pub fn dot(&self, theta: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&j, &v)| v * theta[j])
            .sum()
    }

    pub fn to_dense(&self, d: usize) -> Vec<f64> {
        let mut out = vec![0.0; d];
        for (&j, &v) in self.indices.iter().zip(&self.values) {
            out[j] = v;
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    fn max_index(&self) -> Option<usize> {
        self.indices.last().copied()
    }
}

/// One affine endpoint `z · θ + m`, or an infinite endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineEndpoint {
    pub z: SparseVec,
    pub m: f64,
    pub infinite: bool,
}

impl AffineEndpoint {
    pub fn finite(z: SparseVec, m: f64) -> Self {
        AffineEndpoint { z, m, infinite: false }
    }

    /// Lower endpoint at −∞.
    pub fn neg_inf() -> Self {
        AffineEndpoint { z: SparseVec::zeros(), m: f64::NEG_INFINITY, infinite: true }
    }

    /// Upper endpoint at +∞.
    pub fn pos_inf() -> Self {
        AffineEndpoint { z: SparseVec::zeros(), m: f64::INFINITY, infinite: true }
    }
}

/// `(Z_i, m_i)` for one observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationBlock {
    pub a: AffineEndpoint,
    pub b: AffineEndpoint,
}

impl ObservationBlock {
    pub fn new(a: AffineEndpoint, b: AffineEndpoint) -> Self {
        ObservationBlock { a, b }
    }

    pub fn z_a(&self, d: usize) -> Vec<f64> {
        self.a.z.to_dense(d)
    }

    pub fn z_b(&self, d: usize) -> Vec<f64> {
        self.b.z.to_dense(d)
    }

    pub fn a_infinite(&self) -> bool {
        self.a.infinite
    }

    pub fn b_infinite(&self) -> bool {
        self.b.infinite
    }

    /// `η_i = Z_i θ + m_i` with explicit infinity flags.
    pub fn endpoints(&self, theta: &[f64]) -> IntervalEndpoints {
        let lower = if self.a.infinite {
            ExtReal::NegInf
        } else {
            ExtReal::Finite(self.a.z.dot(theta) + self.a.m)
        };
        let upper = if self.b.infinite {
            ExtReal::PosInf
        } else {
            ExtReal::Finite(self.b.z.dot(theta) + self.b.m)
        };
        IntervalEndpoints { lower, upper }
    }

    fn check(&self, d: usize, row: usize) -> Result<()> {
        for (side, e) in [("lower", &self.a), ("upper", &self.b)] {
            if e.infinite && !e.z.indices.is_empty() {
                return Err(Error::Observation {
                    row,
                    message: format!("infinite {side} endpoint with a nonzero row"),
                });
            }
            if !e.infinite && !e.m.is_finite() {
                return Err(Error::Observation {
                    row,
                    message: format!("finite {side} endpoint with offset {}", e.m),
                });
            }
            if e.z.max_index().is_some_and(|j| j >= d) {
                return Err(Error::Dimension(format!(
                    "observation {row}: {side} row exceeds dimension {d}"
                )));
            }
        }
        Ok(())
    }
}

/// Lower bound of one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    Free,
    NonNegative,
}

impl Bound {
    pub fn admits(self, v: f64) -> bool {
        match self {
            Bound::Free => v.is_finite(),
            Bound::NonNegative => v >= 0.0 && v.is_finite(),
        }
    }

    pub fn clamp(self, v: f64) -> f64 {
        match self {
            Bound::Free => v,
            Bound::NonNegative => v.max(0.0),
        }
    }

    pub fn lower_value(self) -> f64 {
        match self {
            Bound::Free => f64::NEG_INFINITY,
            Bound::NonNegative => 0.0,
        }
    }
}

/// Elastic-net penalty with per-coordinate L1 weights and lower bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Multiplies `lambda1` per coordinate; 0 leaves the coordinate unpenalized.
    pub l1_weight: Vec<f64>,
    pub lower_bound: Vec<Bound>,
}

impl PenaltySpec {
    /// No penalty, no bounds.
    pub fn none(d: usize) -> Self {
        PenaltySpec {
            lambda1: 0.0,
            lambda2: 0.0,
            l1_weight: vec![1.0; d],
            lower_bound: vec![Bound::Free; d],
        }
    }

    pub fn with_lambdas(mut self, lambda1: f64, lambda2: f64) -> Self {
        self.lambda1 = lambda1;
        self.lambda2 = lambda2;
        self
    }

    pub fn dim(&self) -> usize {
        self.l1_weight.len()
    }

    pub fn is_penalized(&self) -> bool {
        self.lambda2 > 0.0 || (self.lambda1 > 0.0 && self.l1_weight.iter().any(|&w| w > 0.0))
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.l1_weight.len() != d || self.lower_bound.len() != d {
            return Err(Error::Dimension(format!(
                "penalty has {} weights and {} bounds, model dimension is {d}",
                self.l1_weight.len(),
                self.lower_bound.len()
            )));
        }
        if !(self.lambda1 >= 0.0 && self.lambda1.is_finite())
            || !(self.lambda2 >= 0.0 && self.lambda2.is_finite())
        {
            return Err(Error::InvalidInput(format!(
                "penalties must be finite and nonnegative (lambda1={}, lambda2={})",
                self.lambda1, self.lambda2
            )));
        }
        if self.l1_weight.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidInput("L1 weights must be finite and nonnegative".into()));
        }
        Ok(())
    }

    /// `λ1 Σ w_j |θ_j| + (λ2/2) ‖θ‖²`
    pub fn value(&self, theta: &[f64]) -> f64 {
        let l1: f64 = theta
            .iter()
            .zip(&self.l1_weight)
            .map(|(t, w)| w * t.abs())
            .sum();
        let l2: f64 = theta.iter().map(|t| t * t).sum();
        self.lambda1 * l1 + 0.5 * self.lambda2 * l2
    }

    pub fn weighted_l1(&self, theta: &[f64]) -> f64 {
        theta.iter().zip(&self.l1_weight).map(|(t, w)| w * t.abs()).sum()
    }

    pub fn is_feasible(&self, theta: &[f64]) -> bool {
        theta.iter().zip(&self.lower_bound).all(|(&t, b)| b.admits(t))
    }
}

/// Role of one parameter coordinate; drives labels, default Wald nulls and
/// back-transformation after standardization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "kebab-case")]
pub enum CoordRole {
    /// Coefficient of predictor column `column`, entering as `-x`.
    Predictor { column: usize },
    /// Coefficient of a constant predictor column.
    Intercept { column: usize },
    /// `1/σ` in the unknown-scale interval regression.
    InverseScale,
    /// Cutpoint `θ_j` of a cumulative model.
    Cutpoint { index: usize },
    /// Coefficient of a monotone survival basis function.
    Basis { index: usize },
    Other,
}

impl CoordRole {
    /// Null value of the default Wald test.
    pub fn default_null(self) -> f64 {
        match self {
            CoordRole::InverseScale => 1.0,
            _ => 0.0,
        }
    }
}

/// Whether the latent scale is fixed at one or estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    KnownOne,
    Unknown,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "known" | "known-one" | "known_one" => Ok(Scale::KnownOne),
            "unknown" => Ok(Scale::Unknown),
            other => Err(Error::InvalidInput(format!("unknown scale mode `{other}`"))),
        }
    }
}

/// Monotone transform `sp(log t; γ)` of a survival model.
#[derive(Debug, Clone, PartialEq)]
pub enum SurvivalBasis {
    /// `sp(log t) = log t`.
    Exponential,
    /// `sp(log t; γ) = γ log t`, `γ ≥ 0`.
    Weibull,
    /// `sp(log t; γ) = B(log t) γ` with basis values supplied per observation
    /// at the lower and upper cut (rows at zero or infinite cuts are ignored).
    Custom { lower: DMatrix<f64>, upper: DMatrix<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    Exponential,
    Weibull,
    Custom { q: usize },
}

impl BasisKind {
    pub fn dim(self) -> usize {
        match self {
            BasisKind::Exponential => 0,
            BasisKind::Weibull => 1,
            BasisKind::Custom { q } => q,
        }
    }
}

impl SurvivalBasis {
    pub fn kind(&self) -> BasisKind {
        match self {
            SurvivalBasis::Exponential => BasisKind::Exponential,
            SurvivalBasis::Weibull => BasisKind::Weibull,
            SurvivalBasis::Custom { lower, .. } => BasisKind::Custom { q: lower.ncols() },
        }
    }
}

/// Which builder produced a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum ModelKind {
    Interval { scale: Scale, p: usize },
    Cumulative { categories: usize, p: usize },
    Survival { basis: BasisKind, p: usize },
    Custom,
}

impl ModelKind {
    pub fn n_predictors(self) -> usize {
        match self {
            ModelKind::Interval { p, .. }
            | ModelKind::Cumulative { p, .. }
            | ModelKind::Survival { p, .. } => p,
            ModelKind::Custom => 0,
        }
    }

    /// Index of the first predictor coefficient in θ.
    pub fn predictor_offset(self) -> usize {
        match self {
            ModelKind::Interval { scale: Scale::KnownOne, .. } => 0,
            ModelKind::Interval { scale: Scale::Unknown, .. } => 1,
            ModelKind::Cumulative { categories, .. } => categories - 1,
            ModelKind::Survival { basis, .. } => basis.dim(),
            ModelKind::Custom => 0,
        }
    }
}

/// Observed responses, kept alongside the blocks for losses and predictions.
#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    Interval { lower: Vec<ExtReal>, upper: Vec<ExtReal> },
    Categorical { y: Vec<usize> },
    Survival { lower: Vec<f64>, upper: Vec<ExtReal> },
    Unknown,
}

/// Immutable model: blocks, dimension, family and metadata.
#[derive(Debug, Clone)]
pub struct ModelData {
    blocks: Vec<ObservationBlock>,
    d: usize,
    family: LinkFamily,
    kind: ModelKind,
    penalty_default: PenaltySpec,
    labels: Vec<String>,
    roles: Vec<CoordRole>,
    start: Vec<f64>,
    predictors: DMatrix<f64>,
    response: Response,
    columns: Vec<Vec<ColumnEntry>>,
}

/// Nonzero entry of column `j` of the stacked `Z_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ColumnEntry {
    pub obs: usize,
    pub za: f64,
    pub zb: f64,
}

impl ModelData {
    /// Generic model from user-supplied blocks.
    pub fn from_blocks(blocks: Vec<ObservationBlock>, d: usize, family: LinkFamily) -> Result<Self> {
        let n = blocks.len();
        ModelData::assemble(
            blocks,
            d,
            family,
            ModelKind::Custom,
            PenaltySpec::none(d),
            vec![CoordRole::Other; d],
            vec![0.0; d],
            DMatrix::zeros(n, 0),
            Response::Unknown,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        blocks: Vec<ObservationBlock>,
        d: usize,
        family: LinkFamily,
        kind: ModelKind,
        penalty_default: PenaltySpec,
        roles: Vec<CoordRole>,
        start: Vec<f64>,
        predictors: DMatrix<f64>,
        response: Response,
    ) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidInput("model has no observations".into()));
        }
        for (i, blk) in blocks.iter().enumerate() {
            blk.check(d, i)?;
        }
        penalty_default.validate(d)?;
        let labels = default_labels(&roles);
        let columns = column_index(&blocks, d);
        Ok(ModelData {
            blocks,
            d,
            family,
            kind,
            penalty_default,
            labels,
            roles,
            start,
            predictors,
            response,
            columns,
        })
    }

    pub fn blocks(&self) -> &[ObservationBlock] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n_obs(&self) -> usize {
        self.blocks.len()
    }

    pub fn family(&self) -> LinkFamily {
        self.family
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn penalty_default(&self) -> &PenaltySpec {
        &self.penalty_default
    }

    /// Default penalty with the given λ's.
    pub fn penalty(&self, lambda1: f64, lambda2: f64) -> PenaltySpec {
        self.penalty_default.clone().with_lambdas(lambda1, lambda2)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn roles(&self) -> &[CoordRole] {
        &self.roles
    }

    /// Feasible starting point supplied by the builder.
    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn predictors(&self) -> &DMatrix<f64> {
        &self.predictors
    }

    pub fn response(&self) -> &Response {
        &self.response
    }

    pub(crate) fn columns(&self) -> &[Vec<ColumnEntry>] {
        &self.columns
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.d {
            return Err(Error::Dimension(format!(
                "{} labels for dimension {}",
                labels.len(),
                self.d
            )));
        }
        self.labels = labels;
        Ok(self)
    }

    /// Names the predictor coordinates after the given column names.
    pub fn with_predictor_names(mut self, names: &[String]) -> Result<Self> {
        let p = self.kind.n_predictors();
        if names.len() != p {
            return Err(Error::Dimension(format!("{} names for {p} predictors", names.len())));
        }
        for (j, role) in self.roles.iter().enumerate() {
            if let CoordRole::Predictor { column } | CoordRole::Intercept { column } = role {
                self.labels[j] = names[*column].clone();
            }
        }
        Ok(self)
    }

    pub fn with_penalty_default(mut self, pen: PenaltySpec) -> Result<Self> {
        pen.validate(self.d)?;
        self.penalty_default = pen;
        Ok(self)
    }

    pub fn with_start(mut self, start: Vec<f64>) -> Result<Self> {
        if start.len() != self.d {
            return Err(Error::Dimension(format!("start has length {}", start.len())));
        }
        self.start = start;
        Ok(self)
    }

    /// Model restricted to the given observations (in the given order).
    pub fn subset(&self, rows: &[usize]) -> Result<ModelData> {
        let blocks = rows.iter().map(|&i| self.blocks[i].clone()).collect();
        let predictors = if self.predictors.ncols() == 0 {
            DMatrix::zeros(rows.len(), 0)
        } else {
            self.predictors.select_rows(rows)
        };
        let pick = |v: &[ExtReal]| rows.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let response = match &self.response {
            Response::Interval { lower, upper } => Response::Interval {
                lower: pick(lower),
                upper: pick(upper),
            },
            Response::Categorical { y } => Response::Categorical {
                y: rows.iter().map(|&i| y[i]).collect(),
            },
            Response::Survival { lower, upper } => Response::Survival {
                lower: rows.iter().map(|&i| lower[i]).collect(),
                upper: pick(upper),
            },
            Response::Unknown => Response::Unknown,
        };
        let mut out = ModelData::assemble(
            blocks,
            self.d,
            self.family,
            self.kind,
            self.penalty_default.clone(),
            self.roles.clone(),
            self.start.clone(),
            predictors,
            response,
        )?;
        out.labels = self.labels.clone();
        Ok(out)
    }
}

fn default_labels(roles: &[CoordRole]) -> Vec<String> {
    roles
        .iter()
        .enumerate()
        .map(|(j, r)| match r {
            CoordRole::Predictor { column } => format!("x{}", column + 1),
            CoordRole::Intercept { .. } => "(Intercept)".to_string(),
            CoordRole::InverseScale => "inv_scale".to_string(),
            CoordRole::Cutpoint { index } => format!("cut{}", index + 1),
            CoordRole::Basis { index } => format!("gamma{}", index + 1),
            CoordRole::Other => format!("theta{}", j + 1),
        })
        .collect()
}

fn column_index(blocks: &[ObservationBlock], d: usize) -> Vec<Vec<ColumnEntry>> {
    let mut cols: Vec<Vec<ColumnEntry>> = vec![Vec::new(); d];
    for (i, blk) in blocks.iter().enumerate() {
        let mut merged: Vec<(usize, f64, f64)> = Vec::new();
        for (j, v) in blk.a.z.iter() {
            merged.push((j, v, 0.0));
        }
        for (j, v) in blk.b.z.iter() {
            match merged.iter_mut().find(|e| e.0 == j) {
                Some(e) => e.2 = v,
                None => merged.push((j, 0.0, v)),
            }
        }
        merged.sort_by_key(|e| e.0);
        for (j, za, zb) in merged {
            cols[j].push(ColumnEntry { obs: i, za, zb });
        }
    }
    cols
}

fn check_rows(x: &DMatrix<f64>, n: usize, what: &str) -> Result<()> {
    if x.nrows() != n {
        return Err(Error::Dimension(format!(
            "{what} has {} rows but there are {n} responses",
            x.nrows()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{what} contains non-finite values")));
    }
    Ok(())
}

/// Columns of `x` that are identically one.
pub fn constant_columns(x: &DMatrix<f64>) -> Vec<bool> {
    (0..x.ncols())
        .map(|c| x.nrows() > 0 && x.column(c).iter().all(|&v| v == 1.0))
        .collect()
}

fn predictor_roles(x: &DMatrix<f64>) -> Vec<CoordRole> {
    constant_columns(x)
        .into_iter()
        .enumerate()
        .map(|(column, constant)| {
            if constant {
                CoordRole::Intercept { column }
            } else {
                CoordRole::Predictor { column }
            }
        })
        .collect()
}

/// Penalty template: predictors weight 1, everything else (intercepts,
/// scale, cutpoints, basis coefficients) unpenalized.
fn default_penalty(roles: &[CoordRole]) -> PenaltySpec {
    let mut pen = PenaltySpec::none(roles.len());
    for (j, r) in roles.iter().enumerate() {
        pen.l1_weight[j] = match r {
            CoordRole::Predictor { .. } | CoordRole::Other => 1.0,
            _ => 0.0,
        };
        pen.lower_bound[j] = match r {
            CoordRole::InverseScale | CoordRole::Basis { .. } => Bound::NonNegative,
            _ => Bound::Free,
        };
    }
    pen
}

fn neg_row(x: &DMatrix<f64>, i: usize, offset: usize, d: usize) -> Vec<f64> {
    let mut z = vec![0.0; d];
    for c in 0..x.ncols() {
        z[offset + c] = -x[(i, c)];
    }
    z
}

/// Interval-censored regression `Y* = xᵀβ + σW` observed through `[lower, upper)`.
///
/// With a known unit scale `θ = β`; otherwise `θ = [1/σ, β/σ]`.
pub fn build_interval_regression(
    x: &DMatrix<f64>,
    lower: &[ExtReal],
    upper: &[ExtReal],
    scale: Scale,
    family: LinkFamily,
) -> Result<ModelData> {
    let n = lower.len();
    if upper.len() != n {
        return Err(Error::Dimension(format!(
            "{n} lower endpoints but {} upper endpoints",
            upper.len()
        )));
    }
    check_rows(x, n, "predictor matrix")?;
    let p = x.ncols();
    let offset = usize::from(scale == Scale::Unknown);
    let d = p + offset;
    let mut blocks = Vec::with_capacity(n);
    for i in 0..n {
        let (lo, hi) = (lower[i], upper[i]);
        if matches!(lo, ExtReal::PosInf) || matches!(hi, ExtReal::NegInf) || !lo.lt(hi) {
            return Err(Error::Observation {
                row: i,
                message: format!("lower endpoint {lo} is not below upper endpoint {hi}"),
            });
        }
        let endpoint = |t: ExtReal, upper_side: bool| match t.finite() {
            None if upper_side => AffineEndpoint::pos_inf(),
            None => AffineEndpoint::neg_inf(),
            Some(t) => {
                let mut z = neg_row(x, i, offset, d);
                match scale {
                    Scale::KnownOne => AffineEndpoint::finite(SparseVec::from_dense(&z), t),
                    Scale::Unknown => {
                        z[0] = t;
                        AffineEndpoint::finite(SparseVec::from_dense(&z), 0.0)
                    }
                }
            }
        };
        blocks.push(ObservationBlock::new(endpoint(lo, false), endpoint(hi, true)));
    }
    let mut roles = Vec::with_capacity(d);
    if scale == Scale::Unknown {
        roles.push(CoordRole::InverseScale);
    }
    roles.extend(predictor_roles(x));
    let mut start = vec![0.0; d];
    if scale == Scale::Unknown {
        start[0] = 1.0;
    }
    ModelData::assemble(
        blocks,
        d,
        family,
        ModelKind::Interval { scale, p },
        default_penalty(&roles),
        roles,
        start,
        x.clone(),
        Response::Interval { lower: lower.to_vec(), upper: upper.to_vec() },
    )
}

/// Cumulative probability model `P(Y ≤ j | x) = R(θ_j - xᵀβ)`, `y ∈ {1..categories}`.
pub fn build_cumulative(
    y: &[usize],
    categories: usize,
    x: Option<&DMatrix<f64>>,
    family: LinkFamily,
) -> Result<ModelData> {
    if categories < 2 {
        return Err(Error::InvalidInput(format!(
            "a cumulative model needs at least 2 categories, got {categories}"
        )));
    }
    let n = y.len();
    let x = match x {
        Some(x) => {
            check_rows(x, n, "predictor matrix")?;
            x.clone()
        }
        None => DMatrix::zeros(n, 0),
    };
    let cuts = categories - 1;
    let p = x.ncols();
    let d = cuts + p;
    let mut blocks = Vec::with_capacity(n);
    for (i, &yi) in y.iter().enumerate() {
        if yi < 1 || yi > categories {
            return Err(Error::Observation {
                row: i,
                message: format!("category {yi} outside 1..={categories}"),
            });
        }
        let side = |cut: usize| {
            let mut z = neg_row(&x, i, cuts, d);
            z[cut] = 1.0;
            AffineEndpoint::finite(SparseVec::from_dense(&z), 0.0)
        };
        let a = if yi == 1 { AffineEndpoint::neg_inf() } else { side(yi - 2) };
        let b = if yi == categories { AffineEndpoint::pos_inf() } else { side(yi - 1) };
        blocks.push(ObservationBlock::new(a, b));
    }
    let mut roles: Vec<CoordRole> = (0..cuts).map(|index| CoordRole::Cutpoint { index }).collect();
    roles.extend(predictor_roles(&x));
    let mut start = vec![0.0; d];
    for (j, s) in start.iter_mut().take(cuts).enumerate() {
        *s = (j + 1) as f64 - 0.5 * categories as f64;
    }
    ModelData::assemble(
        blocks,
        d,
        family,
        ModelKind::Cumulative { categories, p },
        default_penalty(&roles),
        roles,
        start,
        x,
        Response::Categorical { y: y.to_vec() },
    )
}

/// Interval-censored survival model
/// `F(t | x) = 1 - exp[-exp{sp(log t; γ) - xᵀβ}]`, `θ = [γ, β]`,
/// observed through `T ∈ [cut_lower, cut_upper)`. The family is always
/// the extreme-value distribution.
pub fn build_survival(
    cut_lower: &[f64],
    cut_upper: &[ExtReal],
    x: &DMatrix<f64>,
    basis: &SurvivalBasis,
) -> Result<ModelData> {
    let n = cut_lower.len();
    if cut_upper.len() != n {
        return Err(Error::Dimension(format!(
            "{n} lower cuts but {} upper cuts",
            cut_upper.len()
        )));
    }
    check_rows(x, n, "predictor matrix")?;
    let q = basis.kind().dim();
    if let SurvivalBasis::Custom { lower, upper } = basis {
        if q == 0 || upper.ncols() != q {
            return Err(Error::Dimension("custom basis matrices must share q >= 1 columns".into()));
        }
        check_rows(lower, n, "lower basis matrix")?;
        check_rows(upper, n, "upper basis matrix")?;
    }
    let p = x.ncols();
    let d = q + p;
    let mut blocks = Vec::with_capacity(n);
    for i in 0..n {
        let lo = cut_lower[i];
        let hi = cut_upper[i];
        if !(lo >= 0.0 && lo.is_finite()) {
            return Err(Error::Observation {
                row: i,
                message: format!("lower cut {lo} must be finite and nonnegative"),
            });
        }
        match hi {
            ExtReal::Finite(h) if !(h > lo) => {
                return Err(Error::Observation {
                    row: i,
                    message: format!("upper cut {h} must exceed lower cut {lo}"),
                })
            }
            ExtReal::NegInf => {
                return Err(Error::Observation { row: i, message: "upper cut is -inf".into() })
            }
            _ => {}
        }
        let endpoint = |t: f64, basis_row: Option<&DMatrix<f64>>| {
            let mut z = neg_row(x, i, q, d);
            let m = match basis {
                SurvivalBasis::Exponential => t.ln(),
                SurvivalBasis::Weibull => {
                    z[0] = t.ln();
                    0.0
                }
                SurvivalBasis::Custom { .. } => {
                    let b = basis_row.expect("custom basis row");
                    for k in 0..q {
                        z[k] = b[(i, k)];
                    }
                    0.0
                }
            };
            AffineEndpoint::finite(SparseVec::from_dense(&z), m)
        };
        let (bl, bu) = match basis {
            SurvivalBasis::Custom { lower, upper } => (Some(lower), Some(upper)),
            _ => (None, None),
        };
        let a = if lo == 0.0 { AffineEndpoint::neg_inf() } else { endpoint(lo, bl) };
        let b = match hi {
            ExtReal::Finite(h) => endpoint(h, bu),
            _ => AffineEndpoint::pos_inf(),
        };
        blocks.push(ObservationBlock::new(a, b));
    }
    let mut roles: Vec<CoordRole> = (0..q).map(|index| CoordRole::Basis { index }).collect();
    roles.extend(predictor_roles(x));
    let mut start = vec![0.0; d];
    for s in start.iter_mut().take(q) {
        *s = 1.0;
    }
    ModelData::assemble(
        blocks,
        d,
        LinkFamily::ExtremeValue,
        ModelKind::Survival { basis: basis.kind(), p },
        default_penalty(&roles),
        roles,
        start,
        x.clone(),
        Response::Survival { lower: cut_lower.to_vec(), upper: cut_upper.to_vec() },
    )
}

/// Category layout used by predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "grid", rename_all = "kebab-case")]
pub enum CategoryGrid {
    /// The categories `1..m` of a cumulative model.
    Ordinal,
    /// Increasing finite cut points `c_1 < … < c_k`, giving the bins
    /// `(-∞, c_1), [c_1, c_2), …, [c_k, ∞)`; survival grids start at time 0.
    Cuts { cuts: Vec<f64> },
    /// Custom survival basis: cut times and `B(log c_j)` for each cut.
    Basis { cuts: Vec<f64>, values: Vec<Vec<f64>> },
}

impl CategoryGrid {
    /// Human-readable category labels.
    pub fn labels(&self, kind: ModelKind) -> Vec<String> {
        match (self, kind) {
            (CategoryGrid::Ordinal, ModelKind::Cumulative { categories, .. }) => {
                (1..=categories).map(|c| c.to_string()).collect()
            }
            (CategoryGrid::Cuts { cuts } | CategoryGrid::Basis { cuts, .. }, _) => {
                let first = if matches!(kind, ModelKind::Survival { .. }) { "0" } else { "-inf" };
                let mut out = Vec::with_capacity(cuts.len() + 1);
                let mut prev = first.to_string();
                for c in cuts {
                    out.push(format!("[{prev}, {c})"));
                    prev = c.to_string();
                }
                out.push(format!("[{prev}, inf)"));
                out
            }
            _ => Vec::new(),
        }
    }
}

/// One block per category for a new predictor row `x`; the blocks tile the latent line.
pub fn category_blocks(
    model: &ModelData,
    x: &[f64],
    grid: &CategoryGrid,
) -> Result<Vec<ObservationBlock>> {
    let kind = model.kind();
    let p = kind.n_predictors();
    if x.len() != p {
        return Err(Error::Dimension(format!("predictor row has length {} but the model uses {p}", x.len())));
    }
    let replicate = |k: usize| DMatrix::from_fn(k, p, |_, c| x[c]);
    let check_cuts = |cuts: &[f64]| -> Result<()> {
        if cuts.windows(2).any(|w| !(w[0] < w[1])) || cuts.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("grid cuts must be finite and strictly increasing".into()));
        }
        Ok(())
    };
    let built = match (kind, grid) {
        (ModelKind::Cumulative { categories, .. }, CategoryGrid::Ordinal) => {
            let y: Vec<usize> = (1..=categories).collect();
            build_cumulative(&y, categories, Some(&replicate(categories)), model.family())?
        }
        (ModelKind::Interval { scale, .. }, CategoryGrid::Cuts { cuts }) => {
            check_cuts(cuts)?;
            let mut lower = vec![ExtReal::NegInf];
            lower.extend(cuts.iter().map(|&c| ExtReal::Finite(c)));
            let mut upper: Vec<ExtReal> = cuts.iter().map(|&c| ExtReal::Finite(c)).collect();
            upper.push(ExtReal::PosInf);
            build_interval_regression(&replicate(lower.len()), &lower, &upper, scale, model.family())?
        }
        (ModelKind::Survival { basis, .. }, CategoryGrid::Cuts { cuts })
            if !matches!(basis, BasisKind::Custom { .. }) =>
        {
            check_cuts(cuts)?;
            if cuts.first().is_some_and(|&c| c <= 0.0) {
                return Err(Error::InvalidInput("survival cuts must be positive".into()));
            }
            let mut lower = vec![0.0];
            lower.extend_from_slice(cuts);
            let mut upper: Vec<ExtReal> = cuts.iter().map(|&c| ExtReal::Finite(c)).collect();
            upper.push(ExtReal::PosInf);
            let b = match basis {
                BasisKind::Exponential => SurvivalBasis::Exponential,
                _ => SurvivalBasis::Weibull,
            };
            build_survival(&lower, &upper, &replicate(lower.len()), &b)?
        }
        (ModelKind::Survival { basis: BasisKind::Custom { q }, .. }, CategoryGrid::Basis { cuts, values }) => {
            check_cuts(cuts)?;
            if values.len() != cuts.len() || values.iter().any(|v| v.len() != q) {
                return Err(Error::Dimension(format!("basis grid needs {} rows of length {q}", cuts.len())));
            }
            let k = cuts.len() + 1;
            let mut lower_t = vec![0.0];
            lower_t.extend_from_slice(cuts);
            let mut upper_t: Vec<ExtReal> = cuts.iter().map(|&c| ExtReal::Finite(c)).collect();
            upper_t.push(ExtReal::PosInf);
            let bl = DMatrix::from_fn(k, q, |r, c| if r == 0 { 0.0 } else { values[r - 1][c] });
            let bu = DMatrix::from_fn(k, q, |r, c| if r + 1 == k { 0.0 } else { values[r][c] });
            build_survival(&lower_t, &upper_t, &replicate(k), &SurvivalBasis::Custom { lower: bl, upper: bu })?
        }
        _ => {
            return Err(Error::Unsupported(format!("category grid {grid:?} for model {kind:?}")))
        }
    };
    Ok(built.blocks)
}

/// Column standardization with back-transformation of fitted coefficients.
///
/// Constant columns are left alone. Columns are centered only when the model
/// has a coordinate that absorbs the shift (an intercept column or cutpoints).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub centered: bool,
}

impl Standardizer {
    pub fn fit(x: &DMatrix<f64>, has_absorber: bool) -> Standardizer {
        let n = x.nrows();
        let constant = constant_columns(x);
        let has_intercept = constant.iter().any(|&c| c);
        let centered = has_absorber || has_intercept;
        let mut means = vec![0.0; x.ncols()];
        let mut scales = vec![1.0; x.ncols()];
        for c in 0..x.ncols() {
            if constant[c] || n < 2 {
                continue;
            }
            let col = x.column(c);
            let mean = col.iter().sum::<f64>() / n as f64;
            let center = if centered { mean } else { 0.0 };
            let ss: f64 = col.iter().map(|v| (v - center) * (v - center)).sum();
            let sd = (ss / (n - 1) as f64).sqrt();
            if sd > 0.0 {
                means[c] = center;
                scales[c] = sd;
            }
        }
        Standardizer { means, scales, centered }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| (x[(r, c)] - self.means[c]) / self.scales[c])
    }

    /// Maps θ fitted on standardized predictors back to the original scale.
    pub fn to_original(&self, roles: &[CoordRole], theta: &[f64]) -> Vec<f64> {
        let mut out = theta.to_vec();
        let mut shift = 0.0;
        for (j, role) in roles.iter().enumerate() {
            if let CoordRole::Predictor { column } = role {
                out[j] = theta[j] / self.scales[*column];
                shift += self.means[*column] * out[j];
            }
        }
        if shift != 0.0 {
            if let Some(j) = roles.iter().position(|r| matches!(r, CoordRole::Intercept { .. })) {
                out[j] -= shift;
            } else {
                for (j, role) in roles.iter().enumerate() {
                    if matches!(role, CoordRole::Cutpoint { .. }) {
                        out[j] += shift;
                    }
                }
            }
        }
        out
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Interval { .. } => f.write_str("interval"),
            ModelKind::Cumulative { .. } => f.write_str("cumulative"),
            ModelKind::Survival { .. } => f.write_str("survival"),
            ModelKind::Custom => f.write_str("custom"),
        }
    }
}
