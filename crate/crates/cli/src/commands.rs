use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use siprop::simulation::{monte_carlo, pivot_check, run_replicates, aggregate, MetricsReport, PivotReport, ScenarioConfig, Summary};
use siprop::{
    analyze, AnalysisConfig, Conditioning, Contrast, Error as CoreError, LambdaChoice, NaiveMode,
    PropensityChoice, SelectiveReport, SurrogateKind, TruncationRegion, VarianceChoice,
};

use crate::config::{
    AnalyzeArgs, ConditioningArg, Format, NaiveArg, OutputArgs, PivotArgs, PropensitySource, ScenarioArgs,
    SimulateArgs, SurrogateArg,
};
use crate::error::{CliError, Result};
use crate::ingest::{ingest_csv, IngestOptions, Table};

/// A command's report plus the failure, if any, that should set the exit code
/// after the report has been written.
pub struct Outcome {
    pub report: String,
    pub failure: Option<CliError>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

/// Write `text` to `out.output`, or to `stdout` when no file was given.
pub fn deliver(out: &OutputArgs, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match &out.output {
        Some(path) => fs::write(path, text).map_err(io_err(path)),
        None => stdout.write_all(text.as_bytes()).map_err(io_err(Path::new("<stdout>"))),
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        v.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), num)
}

// ---------------------------------------------------------------------------
// analyze

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub stat: f64,
    pub tau: f64,
    pub zeta: f64,
    pub rho: f64,
    pub pivot: f64,
    /// Truncation region pieces; `null` marks an unbounded end.
    pub region: TruncationRegion,
    pub saturated: bool,
    pub observed_signs_only: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VariableRow {
    pub variable: String,
    pub index: usize,
    pub status: String,
    pub si_estimate: Option<f64>,
    pub si_lower: Option<f64>,
    pub si_upper: Option<f64>,
    pub naive_estimate: Option<f64>,
    pub naive_lower: Option<f64>,
    pub naive_upper: Option<f64>,
    pub si_significant: Option<bool>,
    pub naive_significant: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl VariableRow {
    fn ok(name: &str, r: &SelectiveReport) -> Self {
        VariableRow {
            variable: name.to_string(),
            index: r.index,
            status: "ok".into(),
            si_estimate: Some(r.estimate),
            si_lower: Some(r.selective_ci.lower),
            si_upper: Some(r.selective_ci.upper),
            naive_estimate: Some(r.naive_estimate),
            naive_lower: Some(r.naive_ci.lower),
            naive_upper: Some(r.naive_ci.upper),
            si_significant: Some(r.si_significant()),
            naive_significant: Some(r.naive_significant()),
            diagnostics: Some(Diagnostics {
                stat: r.stat,
                tau: r.tau,
                zeta: r.zeta,
                rho: r.rho,
                pivot: r.pivot,
                region: r.region.clone(),
                saturated: r.saturated,
                observed_signs_only: r.observed_signs_only,
            }),
            error: None,
        }
    }

    fn failed(name: &str, index: usize, e: &CoreError) -> Self {
        VariableRow {
            variable: name.to_string(),
            index,
            status: e.kind().into(),
            si_estimate: None,
            si_lower: None,
            si_upper: None,
            naive_estimate: None,
            naive_lower: None,
            naive_upper: None,
            si_significant: None,
            naive_significant: None,
            diagnostics: None,
            error: Some(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    pub n: usize,
    pub p: usize,
    pub arms: usize,
    pub covariates: Vec<String>,
    pub contrast: Vec<f64>,
    pub lambda: Option<f64>,
    pub sigma2: f64,
    pub delta: f64,
    pub alpha: f64,
    pub intercept: Option<f64>,
    pub selected: Vec<String>,
    pub variables: Vec<VariableRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub const ANALYZE_COLUMNS: [&str; 10] = [
    "variable",
    "si_estimate",
    "si_lower",
    "si_upper",
    "naive_estimate",
    "naive_lower",
    "naive_upper",
    "si_significant",
    "naive_significant",
    "status",
];

impl AnalyzeReport {
    pub fn to_tsv(&self) -> String {
        let mut s = ANALYZE_COLUMNS.join("\t");
        s.push('\n');
        let flag = |b: Option<bool>| b.map_or_else(|| "NA".to_string(), |b| b.to_string());
        for v in &self.variables {
            let cells = [
                v.variable.clone(),
                opt(v.si_estimate),
                opt(v.si_lower),
                opt(v.si_upper),
                opt(v.naive_estimate),
                opt(v.naive_lower),
                opt(v.naive_upper),
                flag(v.si_significant),
                flag(v.naive_significant),
                v.status.clone(),
            ];
            s.push_str(&cells.join("\t"));
            s.push('\n');
        }
        s
    }
}

fn parse_contrast(arg: Option<&str>, arms: usize) -> Result<Contrast> {
    let Some(text) = arg else {
        return if arms == 2 {
            Ok(Contrast::treated_minus_control())
        } else {
            Err(CliError::Usage(format!("the data has {arms} arms; pass --contrast with {arms} entries")))
        };
    };
    let values: Vec<f64> = text
        .split(',')
        .map(|v| v.trim().parse().map_err(|_| CliError::Usage(format!("bad contrast entry {v:?}"))))
        .collect::<Result<_>>()?;
    if values.len() != arms {
        return Err(CliError::Usage(format!("contrast has {} entries but the data has {arms} arms", values.len())));
    }
    Contrast::new(values).map_err(|e| CliError::Usage(e.to_string()))
}

/// Translate command-line choices into an analysis configuration for `table`.
pub fn analysis_config(args: &AnalyzeArgs, table: &Table) -> Result<AnalysisConfig> {
    let ds = &table.dataset;
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::Usage(format!("--alpha must lie in (0, 1), got {}", args.alpha)));
    }
    let sigma2 = match args.sigma2.trim() {
        "estimate" => VarianceChoice::Estimate,
        v => match v.parse::<f64>() {
            Ok(s) if s > 0.0 && s.is_finite() => VarianceChoice::Known(s),
            _ => return Err(CliError::Usage(format!("--sigma2 must be a positive number or \"estimate\", got {v:?}"))),
        },
    };
    let delta = args.delta.unwrap_or_else(|| (ds.p() as f64 / 2.0).sqrt());
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(CliError::Usage(format!("--delta must be nonnegative, got {delta}")));
    }
    let lambda = match args.lambda {
        Some(v) if v > 0.0 && v.is_finite() => LambdaChoice::Value(v),
        Some(v) => return Err(CliError::Usage(format!("--lambda must be positive, got {v}"))),
        None if args.lambda_k > 0.0 && args.lambda_k.is_finite() => LambdaChoice::Rule(args.lambda_k),
        None => return Err(CliError::Usage(format!("--lambda-k must be positive, got {}", args.lambda_k))),
    };
    let propensity = match (args.propensity, ds.e.is_some()) {
        (Some(PropensitySource::Columns), false) => {
            return Err(CliError::Usage("--propensity columns, but the file has no e1..eH columns".into()))
        }
        (Some(PropensitySource::Columns), true) | (None, true) => PropensityChoice::Known,
        (Some(PropensitySource::Logistic), _) | (None, false) => PropensityChoice::Logistic,
    };
    if propensity == PropensityChoice::Logistic && ds.arms() != 2 {
        return Err(CliError::Usage("logistic propensities need exactly two arms".into()));
    }
    if args.union_cap == 0 {
        return Err(CliError::Usage("--union-cap must be at least 1".into()));
    }
    Ok(AnalysisConfig {
        lambda,
        alpha: args.alpha,
        delta,
        sigma2,
        propensity,
        conditioning: match args.conditioning {
            ConditioningArg::SignUnion => Conditioning::SignUnion { cap: args.union_cap },
            ConditioningArg::ObservedSign => Conditioning::ObservedSign,
        },
        surrogate: match args.surrogate {
            SurrogateArg::Pooled => SurrogateKind::Pooled,
            SurrogateArg::Plain => SurrogateKind::Plain,
        },
        naive: match args.naive {
            NaiveArg::Raw => NaiveMode::Raw,
            NaiveArg::Corrected => NaiveMode::Corrected,
        },
        intercept: !args.no_intercept,
    })
}

/// Ingest, select and infer. An empty model is a successful run with an
/// empty table; per-variable numerical failures are reported in the table
/// and in the outcome's failure.
pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<(AnalyzeReport, Option<CliError>)> {
    let opts = IngestOptions { filters: IngestOptions::parse_filters(&args.filters)?, exclude: args.exclude.clone() };
    let table = ingest_csv(&args.input, &opts)?;
    let cfg = analysis_config(args, &table)?;
    let c = parse_contrast(args.contrast.as_deref(), table.dataset.arms())?;
    let ds = &table.dataset;
    let mut report = AnalyzeReport {
        n: ds.n(),
        p: ds.p(),
        arms: ds.arms(),
        covariates: table.covariates.clone(),
        contrast: c.coefficients().to_vec(),
        lambda: None,
        sigma2: f64::NAN,
        delta: cfg.delta,
        alpha: cfg.alpha,
        intercept: None,
        selected: vec![],
        variables: vec![],
        note: None,
    };
    let analysis = match analyze(ds, &c, &cfg) {
        Ok(a) => a,
        Err(CoreError::NoSelection) => {
            let (_, sigma2) = siprop::inference::resolve_nuisance(ds, &cfg)?;
            report.sigma2 = sigma2;
            report.lambda = Some(match cfg.lambda {
                LambdaChoice::Value(v) => v,
                LambdaChoice::Rule(k) => siprop::inference::lambda_rule(k, sigma2, ds.n(), ds.p())?,
            });
            report.note = Some("NoSelection: the Lasso selected no variables".into());
            return Ok((report, None));
        }
        Err(e) => return Err(e.into()),
    };
    report.lambda = Some(analysis.lambda);
    report.sigma2 = analysis.sigma2;
    report.intercept = analysis.intercept;
    report.selected = analysis.fit.active.iter().map(|&j| table.covariates[j].clone()).collect();
    let mut failure = None;
    for v in &analysis.variables {
        let name = &table.covariates[v.index];
        match &v.outcome {
            Ok(r) => report.variables.push(VariableRow::ok(name, r)),
            Err(e) => {
                report.variables.push(VariableRow::failed(name, v.index, e));
                failure.get_or_insert_with(|| CliError::Core(e.clone()));
            }
        }
    }
    Ok((report, failure))
}

pub fn run_analyze(args: &AnalyzeArgs) -> Result<Outcome> {
    let (report, failure) = cmd_analyze(args)?;
    let text = match args.out.format {
        Format::Tsv => report.to_tsv(),
        Format::Json => json(&report),
    };
    Ok(Outcome { report: text, failure })
}

// ---------------------------------------------------------------------------
// simulate and pivot-check

/// Read a scenario file and apply command-line overrides.
pub fn load_scenario(args: &ScenarioArgs) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(&args.scenario).map_err(io_err(&args.scenario))?;
    let mut cfg: ScenarioConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.scenario.display())))?;
    if let Some(r) = args.replications {
        cfg.replications = r;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn summary_row(s: &mut String, metric: &str, method: &str, v: &Summary) {
    s.push_str(&format!("{metric}\t{method}\t{}\t{}\t{}\n", opt(v.mean), opt(v.sd), v.count));
}

/// Long-format metrics table: one row per metric and method.
pub fn metrics_tsv(m: &MetricsReport) -> String {
    let mut s = String::from("metric\tmethod\tmean\tsd\tcount\n");
    summary_row(&mut s, "model_size", "-", &m.model_size);
    for (name, mm) in [("si", &m.si), ("naive", &m.naive)] {
        summary_row(&mut s, "fcr", name, &mm.fcr);
        summary_row(&mut s, "true_positives", name, &mm.true_positives);
        summary_row(&mut s, "false_positives", name, &mm.false_positives);
        for (j, sig) in mm.significance.iter().enumerate() {
            summary_row(&mut s, &format!("significant_x{}", j + 1), name, sig);
        }
    }
    s.push_str(&format!("replicates\t-\t{}\tNA\t{}\n", m.replicates, m.replicates));
    s.push_str(&format!("contributing\t-\t{}\tNA\t{}\n", m.contributing, m.replicates));
    s.push_str(&format!("failed\t-\t{}\tNA\t{}\n", m.failed, m.replicates));
    s
}

pub fn cmd_simulate(args: &SimulateArgs, threads: usize) -> Result<MetricsReport> {
    let cfg = load_scenario(&args.scenario)?;
    if let Some(raw) = &args.raw {
        let records = run_replicates(&cfg, threads)?;
        fs::write(raw, json(&records)).map_err(io_err(raw))?;
        return Ok(aggregate(&cfg, &records));
    }
    Ok(monte_carlo(&cfg, threads)?)
}

pub fn run_simulate(args: &SimulateArgs, threads: usize) -> Result<Outcome> {
    let report = cmd_simulate(args, threads)?;
    let text = match args.out.format {
        Format::Tsv => metrics_tsv(&report),
        Format::Json => json(&report),
    };
    Ok(Outcome { report: text, failure: None })
}

/// Summary lines as `#` comments followed by the histogram table.
pub fn pivot_tsv(r: &PivotReport) -> String {
    let mut s = format!(
        "# pivots\t{}\n# empty\t{}\n# failed\t{}\n# shift\t{}\n# ks_statistic\t{}\n# p_value\t{}\n",
        r.pivots.len(),
        r.empty,
        r.failed,
        num(r.shift),
        num(r.ks_statistic),
        num(r.p_value)
    );
    s.push_str("lower\tupper\tcount\n");
    for b in &r.histogram {
        s.push_str(&format!("{}\t{}\t{}\n", b.lower, b.upper, b.count));
    }
    s
}

pub fn cmd_pivot_check(args: &PivotArgs, threads: usize) -> Result<PivotReport> {
    let cfg = load_scenario(&args.scenario)?;
    if !args.shift.is_finite() {
        return Err(CliError::Usage(format!("--shift must be finite, got {}", args.shift)));
    }
    Ok(pivot_check(&cfg, args.shift, threads)?)
}

pub fn run_pivot_check(args: &PivotArgs, threads: usize) -> Result<Outcome> {
    let report = cmd_pivot_check(args, threads)?;
    let text = match args.out.format {
        Format::Tsv => pivot_tsv(&report),
        Format::Json => json(&report),
    };
    Ok(Outcome { report: text, failure: None })
}
