use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Selective inference for inverse-probability-weighted Lasso effect models.
#[derive(Debug, Clone, Parser)]
#[command(name = "siprop", version, about)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,

    /// Worker threads for simulation (0 = one per core).
    #[arg(long, global = true, env = "SIPROP_THREADS", default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Select effect modifiers in a dataset and report selective intervals.
    Analyze(AnalyzeArgs),
    /// Run a Monte Carlo scenario and report false coverage and detection rates.
    Simulate(SimulateArgs),
    /// Check uniformity of oracle pivots for a scenario.
    PivotCheck(PivotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Tsv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Report file (standard output if omitted).
    #[arg(long, short)]
    pub output: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PropensitySource {
    /// The file's e1..eH columns.
    Columns,
    /// Logistic regression of the arm on the covariates (two arms).
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConditioningArg {
    SignUnion,
    ObservedSign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NaiveArg {
    Raw,
    Corrected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SurrogateArg {
    Pooled,
    Plain,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// CSV with columns y, t, covariates and optionally e1..eH.
    #[arg(long, short)]
    pub input: PathBuf,

    #[command(flatten)]
    pub out: OutputArgs,

    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// Explicit Lasso penalty.
    #[arg(long, conflicts_with = "lambda_k")]
    pub lambda: Option<f64>,

    /// Penalty multiplier k in k * sigma * sqrt(n ln p).
    #[arg(long, default_value_t = 1.0)]
    pub lambda_k: f64,

    /// Neighborhood radius (default sqrt(p/2)).
    #[arg(long)]
    pub delta: Option<f64>,

    /// Error variance: a positive number or "estimate".
    #[arg(long, default_value = "estimate")]
    pub sigma2: String,

    /// Where propensities come from (default: columns if present, else logistic).
    #[arg(long, value_enum)]
    pub propensity: Option<PropensitySource>,

    /// Comma-separated contrast over arms; defaults to -1,1 for two arms.
    #[arg(long, allow_hyphen_values = true)]
    pub contrast: Option<String>,

    /// Largest model for which all sign patterns are enumerated.
    #[arg(long, default_value_t = siprop::geometry::DEFAULT_UNION_CAP)]
    pub union_cap: usize,

    #[arg(long, value_enum, default_value_t = ConditioningArg::SignUnion)]
    pub conditioning: ConditioningArg,

    #[arg(long, value_enum, default_value_t = NaiveArg::Raw)]
    pub naive: NaiveArg,

    #[arg(long, value_enum, default_value_t = SurrogateArg::Pooled)]
    pub surrogate: SurrogateArg,

    /// Fit the Lasso without an intercept.
    #[arg(long)]
    pub no_intercept: bool,

    /// Keep only rows with column=value (repeatable).
    #[arg(long = "filter")]
    pub filters: Vec<String>,

    /// Drop a covariate column (repeatable).
    #[arg(long)]
    pub exclude: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// JSON scenario file.
    #[arg(long, short)]
    pub scenario: PathBuf,

    /// Override the scenario's replication count.
    #[arg(long, short = 'R')]
    pub replications: Option<usize>,

    /// Override the scenario's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,

    #[command(flatten)]
    pub out: OutputArgs,

    /// Also write every replicate's record as JSON.
    #[arg(long)]
    pub raw: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PivotArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,

    #[command(flatten)]
    pub out: OutputArgs,

    /// Move the pivot's center by this many standard deviations.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub shift: f64,
}
