use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cse_core::dataset::{CsvSchema, MissingPolicy};
use cse_core::embedding::{EpsilonRule, ObservationalMode, RidgeSolveConfig, SolverPath};
use cse_core::simulate::SimConfig;

pub const SUBCOMMANDS: [&str; 6] = ["validate", "km", "embed", "decompose", "simulate", "rate"];

#[derive(Debug, Parser)]
#[command(
    name = "cse",
    version,
    about = "Counterfactual survival mean embeddings under right-censoring",
    args_override_self = true
)]
pub struct Cli {
    /// Worker threads for simulate/rate (results do not depend on it)
    #[arg(long, global = true, env = "CSE_THREADS")]
    pub threads: Option<usize>,

    /// Flat JSON object of flag values applied before the command line (flags win)
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and check a dataset, print a summary
    Validate(ValidateArgs),
    /// Per-arm Kaplan–Meier curves
    Km(KmArgs),
    /// One mean embedding curve (counterfactual or factual)
    Embed(EmbedArgs),
    /// Split the arm difference into covariate and treatment terms
    Decompose(DecomposeArgs),
    /// Repeated simulation of the log-normal design at one sample size
    Simulate(SimulateArgs),
    /// Fit the decay rate of the estimator's variability across sample sizes
    Rate(RateArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Input CSV with a header row
    #[arg(long)]
    pub input: String,
    #[arg(long, default_value = "time")]
    pub time_col: String,
    #[arg(long, default_value = "event")]
    pub event_col: String,
    #[arg(long, default_value = "arm")]
    pub arm_col: String,
    /// Comma-separated covariate columns [default: every x1..xp column]
    #[arg(long, value_delimiter = ',')]
    pub covariate_cols: Option<Vec<String>>,
    /// Drop rows with missing values instead of failing
    #[arg(long)]
    pub lenient: bool,
    /// Center and scale covariates using both arms
    #[arg(long)]
    pub standardize: bool,
}

impl DataArgs {
    pub fn schema(&self) -> CsvSchema {
        CsvSchema {
            time_col: self.time_col.clone(),
            event_col: self.event_col.clone(),
            arm_col: self.arm_col.clone(),
            covariate_cols: self.covariate_cols.clone(),
        }
    }

    pub fn policy(&self) -> MissingPolicy {
        if self.lenient {
            MissingPolicy::Lenient
        } else {
            MissingPolicy::Strict
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverArg {
    General,
    Symmetrized,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationalArg {
    Ipcw,
    ConditionalAverage,
}

impl From<ObservationalArg> for ObservationalMode {
    fn from(v: ObservationalArg) -> Self {
        match v {
            ObservationalArg::Ipcw => ObservationalMode::Ipcw,
            ObservationalArg::ConditionalAverage => ObservationalMode::ConditionalAverage,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RidgeArgs {
    /// Fixed ridge parameter; overrides the n-power rule
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Constant c in epsilon = c * n^(-q)
    #[arg(long, default_value_t = 0.1)]
    pub eps_constant: f64,
    /// Exponent q in epsilon = c * n^(-q), 0 < q < 1/2
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub eps_exponent: f64,
    #[arg(long, value_enum, default_value_t = SolverArg::General)]
    pub solver: SolverArg,
}

impl RidgeArgs {
    pub fn config(&self) -> RidgeSolveConfig {
        let rule = match self.epsilon {
            Some(epsilon) => EpsilonRule::Fixed { epsilon },
            None => EpsilonRule::NPower {
                constant: self.eps_constant,
                exponent: self.eps_exponent,
            },
        };
        let solver = match self.solver {
            SolverArg::General => SolverPath::General,
            SolverArg::Symmetrized => SolverPath::Symmetrized,
        };
        RidgeSolveConfig { rule, solver }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub ridge: RidgeArgs,
    /// Number of equally spaced grid points between the smallest and largest time
    #[arg(long, default_value_t = 100)]
    pub grid_size: usize,
    /// Estimator for the factual mu<j|j> embeddings
    #[arg(long, value_enum, default_value_t = ObservationalArg::Ipcw)]
    pub observational: ObservationalArg,
    /// JSON report path
    #[arg(long)]
    pub report: Option<String>,
    /// SVG line chart path
    #[arg(long)]
    pub svg: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ValidateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// Summary JSON destination, `-` for stdout
    #[arg(long, default_value = "-")]
    pub out: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct KmArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// CSV destination (t,survival,arm), `-` for stdout
    #[arg(long, default_value = "-")]
    pub out: String,
    #[arg(long)]
    pub svg: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
pub enum CurveArg {
    /// Control outcome law under treated covariates
    #[value(name = "mu01")]
    Mu01,
    /// Treated outcome law under control covariates
    #[value(name = "mu10")]
    Mu10,
    #[value(name = "mu00")]
    Mu00,
    #[value(name = "mu11")]
    Mu11,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EmbedArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub estimate: EstimateArgs,
    #[arg(long, value_enum, default_value_t = CurveArg::Mu01)]
    pub curve: CurveArg,
    /// CSV destination (t,value,curve_label), `-` for stdout
    #[arg(long, default_value = "-")]
    pub out: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DecomposeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub estimate: EstimateArgs,
    /// Also emit the mu<0|0>, mu<0|1> and mu<1|1> curves
    #[arg(long)]
    pub with_components: bool,
    /// CSV destination (t,value,curve_label), `-` for stdout
    #[arg(long, default_value = "-")]
    pub out: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 0.2)]
    pub c0: f64,
    #[arg(long, default_value_t = 0.1)]
    pub c1: f64,
    #[arg(long, default_value_t = 0.5)]
    pub treated_mean_shift: f64,
    #[arg(long, default_value_t = 2.0)]
    pub intercept_treated: f64,
    #[arg(long, default_value_t = 1.0)]
    pub event_noise_sd: f64,
    #[arg(long, default_value_t = 1.0)]
    pub censor_noise_sd: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of simulation runs
    #[arg(long = "B", default_value_t = 100)]
    pub runs: usize,
    #[arg(long, default_value_t = 100)]
    pub grid_size: usize,
    /// Monte-Carlo draws for the population embedding
    #[arg(long, default_value_t = 200_000)]
    pub n_mc: usize,
    /// Per-arm pilot size fixing bandwidths and grid
    #[arg(long, default_value_t = 2000)]
    pub pilot_size: usize,
    /// Grid upper end as a quantile of pilot control times
    #[arg(long, default_value_t = 0.95)]
    pub grid_quantile: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub ridge: RidgeArgs,
}

impl ModelArgs {
    pub fn sim_config(&self, n_control: usize, n_treated: usize) -> SimConfig {
        SimConfig {
            n_control,
            n_treated,
            c0: self.c0,
            c1: self.c1,
            treated_mean_shift: self.treated_mean_shift,
            intercept_treated: self.intercept_treated,
            event_noise_sd: self.event_noise_sd,
            censor_noise_sd: self.censor_noise_sd,
            seed: self.seed,
            runs: self.runs,
            grid_size: self.grid_size,
            n_mc: self.n_mc,
            pilot_size: self.pilot_size,
            grid_upper_quantile: self.grid_quantile,
            ridge: self.ridge.config(),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Units per arm
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Control arm size [default: --n]
    #[arg(long)]
    pub n_control: Option<usize>,
    /// Treated arm size [default: --n]
    #[arg(long)]
    pub n_treated: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Report JSON destination, `-` for stdout
    #[arg(long, default_value = "-")]
    pub out: String,
    /// CSV of curves (t,series,value)
    #[arg(long)]
    pub curves: Option<String>,
    #[arg(long)]
    pub svg: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RateArgs {
    /// Comma-separated per-arm sample sizes
    #[arg(long, value_delimiter = ',', default_value = "100,200,300,400,500,600")]
    pub sizes: Vec<usize>,
    /// Use the log-linear outcome model (the only one available)
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub linear_truth: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Report JSON destination, `-` for stdout
    #[arg(long, default_value = "-")]
    pub out: String,
    /// CSV of per-size sd curves (n,t,series,value)
    #[arg(long)]
    pub curves: Option<String>,
}
