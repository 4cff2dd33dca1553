//! Synthetic designs with known truth, and Monte Carlo audits of coverage
//! and pivot uniformity.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{eta_vector, DEFAULT_UNION_CAP};
use crate::inference::{
    analyze, design_matrix, pivot, region_for, prepare, zeta_from_eta, AnalysisConfig, Conditioning,
    LambdaChoice, NaiveMode, PropensityChoice, VarianceChoice,
};
use crate::linalg::{gram_inverse, max_abs, select_columns};
use crate::model::{Contrast, Dataset};
use crate::nuisance::SurrogateKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateLaw {
    /// Independent U(0, 1) entries.
    Uniform,
    /// Independent Bernoulli(1/2) entries.
    Bernoulli,
}

/// Outcome component shared by both arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Nuisance {
    F1,
    F2,
    F3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PropensityLaw {
    E1,
    E2,
}

/// Treatment effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Effect {
    M1,
    M2,
}

impl Nuisance {
    pub fn eval(self, x: &[f64]) -> f64 {
        use std::f64::consts::PI;
        match self {
            Nuisance::F1 => 0.0,
            Nuisance::F2 => 3.0 * x[0] + x[1] + x[2] + x[3] + x[4] - 3.5,
            Nuisance::F3 => {
                x[0] + 0.5 * x[1] + 0.5 * x[2] + PI * (PI * x[3]).sin() / 32.0
                    + PI * (PI * x[4]).sin() / 32.0
                    - 1.125
            }
        }
    }
}

impl PropensityLaw {
    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            PropensityLaw::E1 => 0.5,
            PropensityLaw::E2 => {
                let v = x[0] + 0.5 * (x[1] + x[2] + x[3] + x[4]) - 1.5;
                1.0 / (1.0 + (-v).exp())
            }
        }
    }
}

impl Effect {
    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            Effect::M1 => 0.0,
            Effect::M2 => 3.0 * x[0] + x[1] + x[2] + x[3] + x[4] - 3.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaRule {
    /// 0 for Bernoulli covariates with p <= 5, sqrt(p/2) for larger
    /// Bernoulli designs, sqrt(p/6) for uniform covariates.
    Preset,
    Value(f64),
}

fn default_union_cap() -> usize {
    DEFAULT_UNION_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n: usize,
    pub p: usize,
    pub covariates: CovariateLaw,
    pub f: Nuisance,
    pub e: PropensityLaw,
    pub mu: Effect,
    pub sigma2: f64,
    /// `lambda = k * sigma * sqrt(n * ln p)`.
    pub lambda_k: f64,
    pub delta: DeltaRule,
    pub alpha: f64,
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "default_union_cap")]
    pub union_cap: usize,
    #[serde(default)]
    pub estimate_propensity: bool,
    #[serde(default)]
    pub surrogate: SurrogateKind,
    #[serde(default)]
    pub naive: NaiveMode,
    #[serde(default = "default_intercept")]
    pub intercept: bool,
}

fn default_intercept() -> bool {
    true
}

impl ScenarioConfig {
    /// A design with the usual defaults: n = 1000, sigma^2 = 0.0625,
    /// alpha = 0.05, preset delta, 1000 replications.
    pub fn new(
        p: usize,
        covariates: CovariateLaw,
        f: Nuisance,
        e: PropensityLaw,
        mu: Effect,
        lambda_k: f64,
    ) -> Self {
        ScenarioConfig {
            n: 1000,
            p,
            covariates,
            f,
            e,
            mu,
            sigma2: 0.0625,
            lambda_k,
            delta: DeltaRule::Preset,
            alpha: 0.05,
            replications: 1000,
            seed: 1,
            union_cap: DEFAULT_UNION_CAP,
            estimate_propensity: false,
            surrogate: SurrogateKind::Pooled,
            naive: NaiveMode::Raw,
            intercept: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 5 {
            return Err(Error::InvalidInput(format!("designs use x1..x5, need p >= 5, got {}", self.p)));
        }
        if self.n < 2 {
            return Err(Error::InvalidInput(format!("need n >= 2, got {}", self.n)));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidInput(format!("invalid sigma^2 {}", self.sigma2)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.lambda_k > 0.0) {
            return Err(Error::InvalidInput(format!("lambda multiplier must be positive, got {}", self.lambda_k)));
        }
        if self.replications == 0 {
            return Err(Error::InvalidInput("need at least one replication".into()));
        }
        if let DeltaRule::Value(d) = self.delta {
            if !(d >= 0.0) {
                return Err(Error::InvalidInput(format!("delta must be nonnegative, got {d}")));
            }
        }
        Ok(())
    }

    pub fn delta_value(&self) -> f64 {
        match self.delta {
            DeltaRule::Value(d) => d,
            DeltaRule::Preset => match self.covariates {
                CovariateLaw::Bernoulli if self.p <= 5 => 0.0,
                CovariateLaw::Bernoulli => (self.p as f64 / 2.0).sqrt(),
                CovariateLaw::Uniform => (self.p as f64 / 6.0).sqrt(),
            },
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda_k * self.sigma2.sqrt() * (self.n as f64 * (self.p as f64).ln()).sqrt()
    }

    pub fn analysis_config(&self) -> AnalysisConfig {
        AnalysisConfig {
            lambda: LambdaChoice::Value(self.lambda()),
            alpha: self.alpha,
            delta: self.delta_value(),
            sigma2: VarianceChoice::Known(self.sigma2),
            propensity: if self.estimate_propensity {
                PropensityChoice::Logistic
            } else {
                PropensityChoice::Known
            },
            conditioning: Conditioning::SignUnion { cap: self.union_cap },
            surrogate: self.surrogate,
            naive: self.naive,
            intercept: self.intercept,
        }
    }

    /// Generator for replicate `index`, independent of scheduling.
    pub fn replicate_rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }
}

/// Values of the design's closed forms at the sampled covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub mu: DVector<f64>,
    pub f: DVector<f64>,
    /// Probability of the treated arm.
    pub e: DVector<f64>,
}

impl Truth {
    /// Treated-minus-control effect vector `sum_h c_h mu^h(X)`.
    pub fn effect(&self) -> &DVector<f64> {
        &self.mu
    }

    /// Mean outcome of each unit's own arm.
    pub fn conditional_mean(&self, ds: &Dataset) -> DVector<f64> {
        DVector::from_fn(ds.n(), |i, _| ds.t[(i, 1)] * self.mu[i] + self.f[i])
    }
}

/// Draw a dataset from the design. Arm 1 is treated.
pub fn generate_dataset<R: Rng>(cfg: &ScenarioConfig, rng: &mut R) -> Result<(Dataset, Truth)> {
    cfg.validate()?;
    let (n, p) = (cfg.n, cfg.p);
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            x[(i, j)] = match cfg.covariates {
                CovariateLaw::Uniform => rng.random::<f64>(),
                CovariateLaw::Bernoulli => {
                    if rng.random_bool(0.5) {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
        }
    }
    let noise = Normal::new(0.0, cfg.sigma2.sqrt()).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut mu = DVector::zeros(n);
    let mut f = DVector::zeros(n);
    let mut e = DVector::zeros(n);
    let mut labels = vec![0usize; n];
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let row: Vec<f64> = x.row(i).iter().copied().collect();
        mu[i] = cfg.mu.eval(&row);
        f[i] = cfg.f.eval(&row);
        e[i] = cfg.e.eval(&row);
        let treated = rng.random::<f64>() < e[i];
        labels[i] = treated as usize;
        let eps: f64 = noise.sample(rng);
        y[i] = if treated { mu[i] } else { 0.0 } + f[i] + eps;
    }
    let emat = DMatrix::from_fn(n, 2, |i, h| if h == 1 { e[i] } else { 1.0 - e[i] });
    let ds = Dataset::from_labels(y, &labels, 2, x, Some(emat))?;
    Ok((ds, Truth { mu, f, e }))
}

/// `(X_M'X_M)^{-1} X_M' mu` for the Lasso design `x`: the coefficients the
/// selected model targets.
pub fn projected_true_coefficients(
    x: &DMatrix<f64>,
    active: &[usize],
    truth: &Truth,
) -> Result<DVector<f64>> {
    let xm = select_columns(x, active);
    Ok(gram_inverse(&xm)? * (xm.transpose() * truth.effect()))
}

/// Treat projected coefficients this small, relative to the largest, as zero.
const ZERO_COEF: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableRecord {
    pub index: usize,
    /// Projected true coefficient.
    pub beta: f64,
    pub beta_is_zero: bool,
    pub si_covers: bool,
    pub si_significant: bool,
    pub naive_covers: bool,
    pub naive_significant: bool,
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub model_size: usize,
    pub variables: Vec<VariableRecord>,
    /// Why the replicate (or one of its variables) could not be analysed.
    pub error: Option<String>,
}

impl ReplicateRecord {
    /// Analysed without error and selected at least one variable.
    pub fn contributes(&self) -> bool {
        self.error.is_none() && self.model_size > 0
    }

    /// Share of selected coefficients whose interval misses the target; zero
    /// for an empty model.
    pub fn false_coverage(&self, naive: bool) -> f64 {
        if self.model_size == 0 {
            return 0.0;
        }
        let missed = self
            .variables
            .iter()
            .filter(|v| if naive { !v.naive_covers } else { !v.si_covers })
            .count();
        missed as f64 / self.model_size as f64
    }

    pub fn true_positives(&self, naive: bool) -> usize {
        self.variables
            .iter()
            .filter(|v| !v.beta_is_zero && if naive { v.naive_significant } else { v.si_significant })
            .count()
    }

    pub fn false_positives(&self, naive: bool) -> usize {
        self.variables
            .iter()
            .filter(|v| v.beta_is_zero && if naive { v.naive_significant } else { v.si_significant })
            .count()
    }
}

/// Generate, analyse and score replicate `index`.
pub fn run_replicate(cfg: &ScenarioConfig, index: usize) -> ReplicateRecord {
    let mut rng = cfg.replicate_rng(index);
    let mut record = ReplicateRecord { replicate: index, model_size: 0, variables: vec![], error: None };
    let (ds, truth) = match generate_dataset(cfg, &mut rng) {
        Ok(v) => v,
        Err(e) => {
            record.error = Some(e.to_string());
            return record;
        }
    };
    let analysis = match analyze(&ds, &Contrast::treated_minus_control(), &cfg.analysis_config()) {
        Ok(a) => a,
        Err(Error::NoSelection) => return record,
        Err(e) => {
            record.error = Some(e.to_string());
            return record;
        }
    };
    record.model_size = analysis.fit.active.len();
    let design = design_matrix(&ds.x, cfg.intercept);
    let beta = match projected_true_coefficients(&design, &analysis.fit.active, &truth) {
        Ok(b) => b,
        Err(e) => {
            record.error = Some(e.to_string());
            return record;
        }
    };
    let scale = max_abs(&beta).max(1.0);
    for (k, var) in analysis.variables.iter().enumerate() {
        match &var.outcome {
            Ok(rep) => record.variables.push(VariableRecord {
                index: var.index,
                beta: beta[k],
                beta_is_zero: beta[k].abs() <= ZERO_COEF * scale,
                si_covers: rep.selective_ci.contains(beta[k]),
                si_significant: rep.si_significant(),
                naive_covers: rep.naive_ci.contains(beta[k]),
                naive_significant: rep.naive_significant(),
                saturated: rep.saturated,
            }),
            Err(e) => {
                record.error = Some(format!("variable {}: {e}", var.index));
                record.variables.clear();
                return record;
            }
        }
    }
    record
}

/// Mean and sample standard deviation (`None` below two observations).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let count = values.len();
        if count == 0 {
            return Summary { mean: None, sd: None, count };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let sd = (count > 1).then(|| {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1) as f64).sqrt()
        });
        Summary { mean: Some(mean), sd, count }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    /// Per-replicate false coverage proportion, averaged over all analysed
    /// replicates (empty models count as zero).
    pub fcr: Summary,
    /// Per variable: share of replicates selecting it whose interval excludes zero.
    pub significance: Vec<Summary>,
    pub true_positives: Summary,
    pub false_positives: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: ScenarioConfig,
    pub lambda: f64,
    pub delta: f64,
    pub model_size: Summary,
    pub si: MethodMetrics,
    pub naive: MethodMetrics,
    pub replicates: usize,
    /// Replicates with a nonempty model and no failures.
    pub contributing: usize,
    pub failed: usize,
    pub saturated_intervals: usize,
}

fn method_metrics(records: &[ReplicateRecord], p: usize, naive: bool) -> MethodMetrics {
    let ok: Vec<&ReplicateRecord> = records.iter().filter(|r| r.error.is_none()).collect();
    let fcr: Vec<f64> = ok.iter().map(|r| r.false_coverage(naive)).collect();
    let significance = (0..p)
        .map(|j| {
            let hits: Vec<f64> = ok
                .iter()
                .flat_map(|r| r.variables.iter().filter(|v| v.index == j))
                .map(|v| if naive { v.naive_significant } else { v.si_significant })
                .map(|b| if b { 1.0 } else { 0.0 })
                .collect();
            Summary::of(&hits)
        })
        .collect();
    let tp: Vec<f64> = ok.iter().map(|r| r.true_positives(naive) as f64).collect();
    let fp: Vec<f64> = ok.iter().map(|r| r.false_positives(naive) as f64).collect();
    MethodMetrics {
        fcr: Summary::of(&fcr),
        significance,
        true_positives: Summary::of(&tp),
        false_positives: Summary::of(&fp),
    }
}

/// Aggregate replicate records, in replicate order.
pub fn aggregate(cfg: &ScenarioConfig, records: &[ReplicateRecord]) -> MetricsReport {
    let ok: Vec<&ReplicateRecord> = records.iter().filter(|r| r.error.is_none()).collect();
    let sizes: Vec<f64> = ok.iter().map(|r| r.model_size as f64).collect();
    MetricsReport {
        scenario: cfg.clone(),
        lambda: cfg.lambda(),
        delta: cfg.delta_value(),
        model_size: Summary::of(&sizes),
        si: method_metrics(records, cfg.p, false),
        naive: method_metrics(records, cfg.p, true),
        replicates: records.len(),
        contributing: records.iter().filter(|r| r.contributes()).count(),
        failed: records.len() - ok.len(),
        saturated_intervals: ok.iter().flat_map(|r| &r.variables).filter(|v| v.saturated).count(),
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))
}

/// Run every replicate on `threads` workers (0 = rayon default).
pub fn run_replicates(cfg: &ScenarioConfig, threads: usize) -> Result<Vec<ReplicateRecord>> {
    cfg.validate()?;
    Ok(pool(threads)?.install(|| {
        (0..cfg.replications).into_par_iter().map(|r| run_replicate(cfg, r)).collect()
    }))
}

pub fn monte_carlo(cfg: &ScenarioConfig, threads: usize) -> Result<MetricsReport> {
    let records = run_replicates(cfg, threads)?;
    Ok(aggregate(cfg, &records))
}

/// Oracle pivot for the first selected variable of replicate `index`, with
/// the true center shifted by `shift` standard deviations.
pub fn oracle_pivot(cfg: &ScenarioConfig, index: usize, shift: f64) -> Result<Option<f64>> {
    let mut rng = cfg.replicate_rng(index);
    let (ds, truth) = generate_dataset(cfg, &mut rng)?;
    let c = Contrast::treated_minus_control();
    let acfg = cfg.analysis_config();
    let e = ds.e.clone().ok_or(Error::MissingPropensity)?;
    let prep = match prepare(&ds, &c, e, cfg.sigma2, &acfg) {
        Ok(p) => p,
        Err(Error::NoSelection) => return Ok(None),
        Err(err) => return Err(err),
    };
    let j = prep.fit.active[0];
    let (dec, region, _) = region_for(&prep, j, acfg.conditioning)?;
    let eta = eta_vector(&prep.design, &prep.fit.active, j)?;
    let kappa = eta.dot(&prep.w.component_mul(&truth.conditional_mean(&ds)));
    let z = zeta_from_eta(&eta, &prep.w, cfg.sigma2);
    pivot(dec.stat, kappa + shift * z.sqrt(), z, &region).map(Some)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotReport {
    pub scenario: ScenarioConfig,
    pub shift: f64,
    pub pivots: Vec<f64>,
    pub ks_statistic: f64,
    pub p_value: f64,
    pub histogram: Vec<HistogramBin>,
    /// Replicates with an empty model.
    pub empty: usize,
    pub failed: usize,
}

/// Kolmogorov-Smirnov distance of a sample from Unif(0, 1).
pub fn ks_uniform(sample: &[f64]) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &u)| ((i + 1) as f64 / m - u).max(u - i as f64 / m))
        .fold(0.0, f64::max)
}

/// Asymptotic Kolmogorov tail probability for distance `d` at sample size `m`.
pub fn ks_p_value(d: f64, m: usize) -> f64 {
    let sm = (m as f64).sqrt();
    let t = (sm + 0.12 + 0.11 / sm) * d;
    if t < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * t * t).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

pub fn histogram(sample: &[f64], bins: usize) -> Vec<HistogramBin> {
    let mut counts = vec![0usize; bins];
    for &u in sample {
        let b = ((u * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(b, count)| HistogramBin {
            lower: b as f64 / bins as f64,
            upper: (b + 1) as f64 / bins as f64,
            count,
        })
        .collect()
}

/// Pivot uniformity audit with the true center (shifted by `shift` sds).
pub fn pivot_check(cfg: &ScenarioConfig, shift: f64, threads: usize) -> Result<PivotReport> {
    cfg.validate()?;
    let results: Vec<Result<Option<f64>>> = pool(threads)?.install(|| {
        (0..cfg.replications).into_par_iter().map(|r| oracle_pivot(cfg, r, shift)).collect()
    });
    let mut pivots = Vec::new();
    let (mut empty, mut failed) = (0, 0);
    for r in results {
        match r {
            Ok(Some(v)) => pivots.push(v),
            Ok(None) => empty += 1,
            Err(_) => failed += 1,
        }
    }
    let ks = if pivots.is_empty() { f64::NAN } else { ks_uniform(&pivots) };
    Ok(PivotReport {
        scenario: cfg.clone(),
        shift,
        ks_statistic: ks,
        p_value: if pivots.is_empty() { f64::NAN } else { ks_p_value(ks, pivots.len()) },
        histogram: histogram(&pivots, 20),
        pivots,
        empty,
        failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms_at_midpoint() {
        let x = [0.5; 5];
        assert_eq!(Nuisance::F2.eval(&x), 0.0);
        assert_eq!(Effect::M2.eval(&x), 0.0);
        assert_eq!(PropensityLaw::E1.eval(&x), 0.5);
        assert_eq!(Effect::M1.eval(&[0.3; 5]), 0.0);
        assert!((PropensityLaw::E2.eval(&[0.0; 5]) - 1.0 / (1.0 + 1.5f64.exp())).abs() < 1e-15);
    }

    #[test]
    fn delta_presets() {
        let mut cfg = ScenarioConfig::new(5, CovariateLaw::Bernoulli, Nuisance::F1, PropensityLaw::E1, Effect::M1, 1.0);
        assert_eq!(cfg.delta_value(), 0.0);
        cfg.p = 25;
        assert_eq!(cfg.delta_value(), 12.5f64.sqrt());
        cfg.covariates = CovariateLaw::Uniform;
        assert_eq!(cfg.delta_value(), (25.0f64 / 6.0).sqrt());
    }

    #[test]
    fn ks_of_perfect_grid_is_small() {
        let s: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!((ks_uniform(&s) - 0.0005).abs() < 1e-12);
        assert!(ks_p_value(0.0005, 1000) > 0.99);
        assert!(ks_p_value(0.1, 1000) < 1e-6);
    }

    #[test]
    fn ks_critical_value_at_one_percent() {
        let p = ks_p_value(0.0363, 2000);
        assert!((p - 0.01).abs() < 0.002, "{p}");
    }

    #[test]
    fn summary_sd_needs_two_values() {
        let s = Summary::of(&[1.0]);
        assert_eq!(s.mean, Some(1.0));
        assert_eq!(s.sd, None);
    }

    #[test]
    fn generated_design_matches_truth() {
        let mut cfg = ScenarioConfig::new(5, CovariateLaw::Uniform, Nuisance::F3, PropensityLaw::E2, Effect::M2, 2.0);
        cfg.n = 50;
        let (ds, truth) = generate_dataset(&cfg, &mut cfg.replicate_rng(3)).unwrap();
        for i in 0..50 {
            let row: Vec<f64> = ds.x.row(i).iter().copied().collect();
            assert_eq!(truth.mu[i], Effect::M2.eval(&row));
            assert_eq!(ds.e.as_ref().unwrap()[(i, 1)], truth.e[i]);
        }
        let (again, _) = generate_dataset(&cfg, &mut cfg.replicate_rng(3)).unwrap();
        assert_eq!(ds, again);
    }
}
