use clap::{Args, Parser, Subcommand, ValueEnum};
use finreg::LinkFamily;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "finreg", version, about = "Penalized likelihood regression for interval, ordinal and survival responses")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one model at fixed penalties.
    Fit(FitArgs),
    /// Cross-validate λ1 over a grid and refit at the selected value.
    Cv(CvArgs),
    /// Category probabilities for new rows from a saved fit.
    Predict(PredictArgs),
    /// Run a Monte Carlo experiment described by a TOML file.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Gaussian,
    Logistic,
    ExtremeValue,
}

impl From<FamilyArg> for LinkFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Gaussian => LinkFamily::Gaussian,
            FamilyArg::Logistic => LinkFamily::Logistic,
            FamilyArg::ExtremeValue => LinkFamily::ExtremeValue,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Interval,
    Cumulative,
    Survival,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScaleArg {
    Known,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BasisArg {
    Exponential,
    Weibull,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Json,
}

/// Data and model flags shared by `fit` and `cv`.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Latent error distribution. Defaults to gaussian for interval data,
    /// logistic for ordinal data and extreme-value for survival data.
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    /// Model class. Defaults to cumulative when the data has a `category`
    /// column and to interval otherwise.
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Interval models only: fix the latent scale at one or estimate it.
    #[arg(long, value_enum, default_value = "known")]
    pub scale: ScaleArg,
    /// Survival models only: monotone transform of log time.
    #[arg(long, value_enum, default_value = "weibull")]
    pub basis: BasisArg,
    /// Number of ordinal categories; defaults to the largest observed.
    #[arg(long)]
    pub categories: Option<usize>,
    /// Do not add an intercept column to interval and survival models.
    #[arg(long)]
    pub no_intercept: bool,
    /// Fit on standardized predictors (coefficients are still reported on
    /// the original scale). On by default for penalized fits.
    #[arg(long, overrides_with = "no_standardize")]
    pub standardize: bool,
    #[arg(long, overrides_with = "standardize")]
    pub no_standardize: bool,
    /// Ridge penalty λ2.
    #[arg(long, default_value_t = 0.0)]
    pub lambda2: f64,
    /// Stopping tolerance on the stationarity residual.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long)]
    pub max_outer: Option<usize>,
    /// Write the fit as JSON to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

impl ModelArgs {
    pub fn standardize_choice(&self) -> Option<bool> {
        if self.standardize {
            Some(true)
        } else if self.no_standardize {
            Some(false)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Lasso penalty λ1.
    #[arg(long, default_value_t = 0.0)]
    pub lambda1: f64,
}

#[derive(Debug, Clone, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 5)]
    pub k_folds: usize,
    /// Grid length when the grid is derived from λ_max.
    #[arg(long, default_value_t = 30)]
    pub n_lambda: usize,
    /// Smallest grid value as a fraction of λ_max.
    #[arg(long, default_value_t = 0.05)]
    pub lambda_ratio: f64,
    /// Explicit comma-separated λ1 values; overrides the derived grid.
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Pick the largest λ within one standard error of the minimum.
    #[arg(long)]
    pub one_se: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    /// JSON written by `fit --out` or `cv --out`.
    #[arg(long)]
    pub fit_file: PathBuf,
    /// CSV holding the predictor columns named in the fit file.
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated cut points for interval and survival models;
    /// defaults to the distinct finite training endpoints.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub cuts: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// TOML experiment description.
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for report.json, summary.csv and plot.csv.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}
