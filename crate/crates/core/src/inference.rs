//! Bias and variance corrections, truncated-normal pivots and confidence
//! intervals for the coefficients of the selected model.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::geometry::{
    decompose, eta_vector, observed_sign_region, sign_union_region, Decomposition,
    DEFAULT_UNION_CAP,
};
use crate::lasso::{check_generic_position, solve_ipw_lasso, LassoFit};
use crate::linalg::{center_columns, prepend_ones};
use crate::model::{compute_weighted_outcome, Contrast, Dataset};
use crate::nuisance::{
    build_neighborhoods, counterfactual_surrogates, estimate_error_variance,
    fit_logistic_propensity, SurrogateKind, Surrogates,
};
use crate::truncnorm::{invert_mean, invert_mean_from, tn_union_cdf, TruncationRegion};

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Whether the interval excludes zero.
    pub fn is_significant(&self) -> bool {
        !self.contains(0.0)
    }
}

/// `sigma^2 * sum_i w_i^2 eta_i^2`.
pub fn zeta_from_eta(eta: &DVector<f64>, w: &DVector<f64>, sigma2: f64) -> f64 {
    sigma2 * eta.iter().zip(w.iter()).map(|(e, w)| (w * e) * (w * e)).sum::<f64>()
}

/// Conditional variance of the statistic for coefficient `j` of `active`.
pub fn zeta(
    x: &DMatrix<f64>,
    active: &[usize],
    j: usize,
    w: &DVector<f64>,
    sigma2: f64,
) -> Result<f64> {
    Ok(zeta_from_eta(&eta_vector(x, active, j)?, w, sigma2))
}

/// `eta' sum_h c_h (W^h - I) Y^h*` with `W^h = diag(T_ih / e_ih)`.
pub fn tau(
    ystar: &[DVector<f64>],
    t: &DMatrix<f64>,
    e: &DMatrix<f64>,
    eta: &DVector<f64>,
    c: &Contrast,
) -> f64 {
    let mut out = 0.0;
    for (h, &ch) in c.coefficients().iter().enumerate() {
        if ch == 0.0 {
            continue;
        }
        for i in 0..eta.len() {
            out += ch * eta[i] * (t[(i, h)] / e[(i, h)] - 1.0) * ystar[h][i];
        }
    }
    out
}

/// `zeta + sigma^2 sum_h c_h^2 eta' K^h eta`, `K^h_ii = (1/e_ih - 1) / counts[h][i]`.
pub fn rho(
    zeta_val: f64,
    eta: &DVector<f64>,
    sigma2: f64,
    counts: &[Vec<usize>],
    e: &DMatrix<f64>,
    c: &Contrast,
) -> Result<f64> {
    let mut extra = 0.0;
    for (h, &ch) in c.coefficients().iter().enumerate() {
        if ch == 0.0 {
            continue;
        }
        for i in 0..eta.len() {
            let k = counts[h][i];
            if k == 0 {
                return Err(Error::EmptyNeighborhood { unit: i, arm: h });
            }
            extra += ch * ch * eta[i] * eta[i] * (1.0 / e[(i, h)] - 1.0) / k as f64;
        }
    }
    Ok(zeta_val + sigma2 * extra)
}

/// Truncated-normal CDF of the statistic under the given center.
pub fn pivot(stat: f64, center: f64, variance: f64, region: &TruncationRegion) -> Result<f64> {
    tn_union_cdf(stat, center, variance, region)
}

/// Selective interval plus whether either end had to be left unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectiveInterval {
    pub interval: Interval,
    pub saturated: bool,
}

/// Interval `[L, U]` solving `F(stat; L + tau) = 1 - alpha/2` and
/// `F(stat; U + tau) = alpha/2` under variance `rho`.
pub fn selective_interval(
    stat: f64,
    tau_val: f64,
    rho_val: f64,
    region: &TruncationRegion,
    alpha: f64,
) -> Result<SelectiveInterval> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let (lo, lo_sat) = invert_with_fallback(stat, rho_val, region, 1.0 - alpha / 2.0, f64::NEG_INFINITY)?;
    let (hi, hi_sat) = invert_with_fallback(stat, rho_val, region, alpha / 2.0, f64::INFINITY)?;
    Ok(SelectiveInterval {
        interval: Interval { lower: lo - tau_val, upper: hi - tau_val },
        saturated: lo_sat || hi_sat,
    })
}

/// Invert the pivot, reseeding from the exponential tail approximation if
/// the plain bracket saturates, and finally giving up to an infinite end.
fn invert_with_fallback(
    x: f64,
    var: f64,
    region: &TruncationRegion,
    target: f64,
    saturated_value: f64,
) -> Result<(f64, bool)> {
    match invert_mean(x, var, region, target) {
        Ok(mu) => return Ok((mu, false)),
        Err(Error::BracketFailure { .. }) => {}
        Err(e) => return Err(e),
    }
    if let Some((a, b)) = region.piece_containing(x) {
        let mut seeds = Vec::new();
        if a.is_finite() && x > a {
            // Near a left edge the truncated law is roughly a + Exp((a - mu)/var).
            seeds.push(a - var * (-(1.0 - target).ln()) / (x - a));
        }
        if b.is_finite() && x < b {
            seeds.push(b + var * (-target.ln()) / (b - x));
        }
        for seed in seeds {
            if let Ok(mu) = invert_mean_from(seed, x, var, region, target) {
                return Ok((mu, false));
            }
        }
    }
    Ok((saturated_value, true))
}

/// `stat - tau +/- z_{1 - alpha/2} sqrt(rho)`.
pub fn naive_interval(stat: f64, tau_val: f64, rho_val: f64, alpha: f64) -> Interval {
    let half = normal_quantile(1.0 - alpha / 2.0) * rho_val.sqrt();
    Interval { lower: stat - tau_val - half, upper: stat - tau_val + half }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaChoice {
    Value(f64),
    /// `k * sigma * sqrt(n) * sqrt(ln p)`.
    Rule(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceChoice {
    Known(f64),
    /// Nearest-neighbor estimate with the configured radius.
    Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropensityChoice {
    /// Use the propensities stored in the dataset.
    Known,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Conditioning {
    /// Condition on the selected set only, enumerating sign vectors up to `cap` variables.
    SignUnion { cap: usize },
    /// Condition on the selected set and its observed signs.
    ObservedSign,
}

/// How the unadjusted comparison interval is centered and scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NaiveMode {
    /// Raw statistic with variance `zeta`.
    #[default]
    Raw,
    /// `stat - tau` with variance `rho`.
    Corrected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub lambda: LambdaChoice,
    pub alpha: f64,
    /// Neighborhood radius for surrogates and the variance estimate.
    pub delta: f64,
    pub sigma2: VarianceChoice,
    pub propensity: PropensityChoice,
    pub conditioning: Conditioning,
    pub surrogate: SurrogateKind,
    pub naive: NaiveMode,
    /// Fit an unpenalized intercept (center the covariates).
    #[serde(default = "default_intercept")]
    pub intercept: bool,
}

fn default_intercept() -> bool {
    true
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            lambda: LambdaChoice::Rule(1.0),
            alpha: 0.05,
            delta: 0.0,
            sigma2: VarianceChoice::Estimate,
            propensity: PropensityChoice::Known,
            conditioning: Conditioning::SignUnion { cap: DEFAULT_UNION_CAP },
            surrogate: SurrogateKind::Pooled,
            naive: NaiveMode::Raw,
            intercept: true,
        }
    }
}

/// The matrix the Lasso is fitted on: `x`, column-centered when an intercept is fitted.
pub fn design_matrix(x: &DMatrix<f64>, intercept: bool) -> DMatrix<f64> {
    if intercept {
        center_columns(x)
    } else {
        x.clone()
    }
}

/// `k * sigma * sqrt(n * ln p)`.
pub fn lambda_rule(k: f64, sigma2: f64, n: usize, p: usize) -> Result<f64> {
    let lambda = k * sigma2.sqrt() * (n as f64 * (p as f64).ln()).sqrt();
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "lambda rule gives {lambda} (k = {k}, sigma^2 = {sigma2}, n = {n}, p = {p})"
        )));
    }
    Ok(lambda)
}

/// Inference for one selected coefficient.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectiveReport {
    pub index: usize,
    /// `stat - tau`.
    pub estimate: f64,
    pub stat: f64,
    pub tau: f64,
    pub zeta: f64,
    pub rho: f64,
    pub region: TruncationRegion,
    /// Pivot evaluated at a zero coefficient.
    pub pivot: f64,
    pub selective_ci: Interval,
    pub naive_estimate: f64,
    pub naive_ci: Interval,
    pub alpha: f64,
    /// An interval end was set to infinity after the pivot saturated.
    pub saturated: bool,
    /// The region used only the observed signs (sign union was capped or disabled).
    pub observed_signs_only: bool,
}

impl SelectiveReport {
    pub fn si_significant(&self) -> bool {
        self.selective_ci.is_significant()
    }

    pub fn naive_significant(&self) -> bool {
        self.naive_ci.is_significant()
    }
}

/// Result for one selected variable; failures are kept per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableResult {
    pub index: usize,
    pub outcome: Result<SelectiveReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub lambda: f64,
    pub sigma2: f64,
    pub alpha: f64,
    pub fit: LassoFit,
    /// Unpenalized intercept, when fitted.
    pub intercept: Option<f64>,
    pub propensity: DMatrix<f64>,
    pub variables: Vec<VariableResult>,
}

/// Everything the per-variable step needs, shared across selected variables.
pub struct Prepared<'a> {
    pub ds: &'a Dataset,
    pub c: &'a Contrast,
    pub e: DMatrix<f64>,
    pub w: DVector<f64>,
    pub wy: DVector<f64>,
    pub sigma2: f64,
    /// Covariates as entered into the Lasso.
    pub design: DMatrix<f64>,
    pub intercept: Option<f64>,
    pub fit: LassoFit,
    pub surrogates: Surrogates,
}

/// Resolve propensities and the error variance.
pub fn resolve_nuisance(ds: &Dataset, cfg: &AnalysisConfig) -> Result<(DMatrix<f64>, f64)> {
    let e = match cfg.propensity {
        PropensityChoice::Known => ds.e.clone().ok_or(Error::MissingPropensity)?,
        PropensityChoice::Logistic => fit_logistic_propensity(&ds.t, &ds.x)?,
    };
    let sigma2 = match cfg.sigma2 {
        VarianceChoice::Known(v) if v > 0.0 && v.is_finite() => v,
        VarianceChoice::Known(v) => {
            return Err(Error::InvalidInput(format!("sigma^2 must be positive, got {v}")))
        }
        VarianceChoice::Estimate => estimate_error_variance(&ds.y, &ds.x, &ds.labels(), cfg.delta)?,
    };
    Ok((e, sigma2))
}

/// Weights, Lasso fit and surrogates.
pub fn prepare<'a>(
    ds: &'a Dataset,
    c: &'a Contrast,
    e: DMatrix<f64>,
    sigma2: f64,
    cfg: &AnalysisConfig,
) -> Result<Prepared<'a>> {
    let with_e = Dataset { e: Some(e.clone()), ..ds.clone() };
    crate::model::validate_dataset(&with_e)?;
    let wo = compute_weighted_outcome(&with_e, c)?;
    let lambda = match cfg.lambda {
        LambdaChoice::Value(v) => v,
        LambdaChoice::Rule(k) => lambda_rule(k, sigma2, ds.n(), ds.p())?,
    };
    let design = design_matrix(&ds.x, cfg.intercept);
    let fit = solve_ipw_lasso(&design, &wo.wy, lambda)?;
    if fit.is_empty() {
        return Err(Error::NoSelection);
    }
    check_generic_position(&design, &wo.wy, &fit)?;
    let intercept = cfg.intercept.then(|| wo.wy.mean());

    let labels = ds.labels();
    let nbhd = build_neighborhoods(&ds.x, &labels, ds.arms(), cfg.delta)?.fill_empty(&ds.x, &labels)?;
    let pooled_ok = ds.arms() == 2 && c.coefficients()[1] != 0.0;
    let kind = if cfg.surrogate == SurrogateKind::Pooled && pooled_ok {
        SurrogateKind::Pooled
    } else {
        SurrogateKind::Plain
    };
    let effect = (kind == SurrogateKind::Pooled).then(|| {
        (&design * &fit.beta).add_scalar(intercept.unwrap_or(0.0)) / c.coefficients()[1]
    });
    let regressors = if cfg.intercept { prepend_ones(&ds.x) } else { ds.x.clone() };
    let surrogates =
        counterfactual_surrogates(&ds.y, &regressors, &labels, &nbhd, kind, effect.as_ref())?;
    Ok(Prepared { ds, c, e, w: wo.w, wy: wo.wy, sigma2, design, intercept, fit, surrogates })
}

/// The statistic's decomposition and truncation region for coefficient `j`.
pub fn region_for(
    prep: &Prepared,
    j: usize,
    conditioning: Conditioning,
) -> Result<(Decomposition, TruncationRegion, bool)> {
    let x = &prep.design;
    let active = &prep.fit.active;
    let eta = eta_vector(x, active, j)?;
    let dec = decompose(&prep.w, &prep.wy, &eta)?;
    let observed = || observed_sign_region(x, active, &prep.fit.signs, prep.fit.lambda, &dec);
    let (region, observed_only) = match conditioning {
        Conditioning::SignUnion { cap } => match sign_union_region(x, active, prep.fit.lambda, &dec, cap) {
            Ok(r) => (r, false),
            Err(Error::UnionCapExceeded { .. }) => (observed()?, true),
            Err(e) => return Err(e),
        },
        Conditioning::ObservedSign => (observed()?, true),
    };
    Ok((dec, region, observed_only))
}

/// Full inference for one selected coefficient.
pub fn infer_variable(prep: &Prepared, j: usize, cfg: &AnalysisConfig) -> Result<SelectiveReport> {
    let (dec, region, observed_signs_only) = region_for(prep, j, cfg.conditioning)?;
    let z = zeta_from_eta(&dec.eta, &prep.w, prep.sigma2);
    let t = tau(&prep.surrogates.ystar, &prep.ds.t, &prep.e, &dec.eta, prep.c);
    let r = rho(z, &dec.eta, prep.sigma2, &prep.surrogates.counts, &prep.e, prep.c)?;
    let si = selective_interval(dec.stat, t, r, &region, cfg.alpha)?;
    let (naive_estimate, naive_ci) = match cfg.naive {
        NaiveMode::Raw => (dec.stat, naive_interval(dec.stat, 0.0, z, cfg.alpha)),
        NaiveMode::Corrected => (dec.stat - t, naive_interval(dec.stat, t, r, cfg.alpha)),
    };
    Ok(SelectiveReport {
        index: j,
        estimate: dec.stat - t,
        stat: dec.stat,
        tau: t,
        zeta: z,
        rho: r,
        pivot: pivot(dec.stat, t, r, &region)?,
        region,
        selective_ci: si.interval,
        naive_estimate,
        naive_ci,
        alpha: cfg.alpha,
        saturated: si.saturated,
        observed_signs_only,
    })
}

/// Run selection and inference end to end.
///
/// Returns [`Error::NoSelection`] when the Lasso selects nothing.
pub fn analyze(ds: &Dataset, c: &Contrast, cfg: &AnalysisConfig) -> Result<Analysis> {
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {}", cfg.alpha)));
    }
    let (e, sigma2) = resolve_nuisance(ds, cfg)?;
    let prep = prepare(ds, c, e, sigma2, cfg)?;
    let variables = prep
        .fit
        .active
        .iter()
        .map(|&j| VariableResult { index: j, outcome: infer_variable(&prep, j, cfg) })
        .collect();
    Ok(Analysis {
        lambda: prep.fit.lambda,
        sigma2,
        alpha: cfg.alpha,
        fit: prep.fit.clone(),
        intercept: prep.intercept,
        propensity: prep.e.clone(),
        variables,
    })
}
