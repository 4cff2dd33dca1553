//! Propensity scores, covariate neighborhoods, counterfactual surrogates and
//! the error-variance estimate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{least_squares, max_abs};

/// Fitted propensities are clipped into `[CLIP, 1 - CLIP]`.
pub const CLIP: f64 = 1e-6;
const NEWTON_ITERS: usize = 100;
const NEWTON_TOL: f64 = 1e-8;
/// Linear predictors beyond this size indicate separated data.
const SEPARATION_LINK: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    /// Intercept followed by one slope per column of `X`.
    pub coefficients: DVector<f64>,
    /// Inverse observed information at the optimum.
    pub covariance: DMatrix<f64>,
    pub iterations: usize,
}

fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = x.shape();
    DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] })
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Maximum-likelihood logistic regression of a binary indicator on `X`
/// plus an intercept, by Newton-Raphson.
pub fn fit_logistic(treated: &[bool], x: &DMatrix<f64>) -> Result<LogisticFit> {
    let n = x.nrows();
    if treated.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} indicators for {n} rows",
            treated.len()
        )));
    }
    let ones = treated.iter().filter(|&&t| t).count();
    if ones == 0 || ones == n {
        return Err(Error::Separation("one arm is empty".into()));
    }
    let z = with_intercept(x);
    let t = DVector::from_iterator(n, treated.iter().map(|&b| if b { 1.0 } else { 0.0 }));
    let k = z.ncols();
    let mut beta = DVector::<f64>::zeros(k);
    let mut iterations = 0;
    let hess = loop {
        let link = &z * &beta;
        let prob = link.map(sigmoid);
        let grad = z.transpose() * (&t - &prob);
        let wts = prob.map(|q| q * (1.0 - q));
        let zw = DMatrix::from_fn(n, k, |i, j| z[(i, j)] * wts[i]);
        let hess = z.transpose() * zw;
        if max_abs(&grad) < NEWTON_TOL {
            break hess;
        }
        if iterations == NEWTON_ITERS {
            return Err(Error::Separation(format!(
                "no convergence after {NEWTON_ITERS} Newton steps (gradient {:e})",
                max_abs(&grad)
            )));
        }
        let step = hess
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Separation("singular information matrix".into()))?
            .solve(&grad);
        beta += step;
        iterations += 1;
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Separation("coefficients diverged".into()));
        }
        if max_abs(&(&z * &beta)) > SEPARATION_LINK {
            return Err(Error::Separation("linear predictor diverges".into()));
        }
    };
    let covariance = hess
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Separation("singular information matrix".into()))?;
    Ok(LogisticFit { coefficients: beta, covariance, iterations })
}

/// Propensities for two arms from a logistic fit of membership in arm 1
/// (the second column of `t`). Column 0 holds `1 - e`, column 1 holds `e`.
pub fn fit_logistic_propensity(t: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if t.ncols() != 2 {
        return Err(Error::InvalidInput(format!(
            "logistic propensities need two arms, got {}",
            t.ncols()
        )));
    }
    let treated: Vec<bool> = t.column(1).iter().map(|&v| v == 1.0).collect();
    let fit = fit_logistic(&treated, x)?;
    let link = with_intercept(x) * &fit.coefficients;
    Ok(DMatrix::from_fn(x.nrows(), 2, |i, h| {
        let e = sigmoid(link[i]).clamp(CLIP, 1.0 - CLIP);
        if h == 1 {
            e
        } else {
            1.0 - e
        }
    }))
}

fn sq_dist(x: &DMatrix<f64>, i: usize, l: usize) -> f64 {
    x.row(i).iter().zip(x.row(l).iter()).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// For each arm `h` and unit `i`, the other units of arm `h` within `delta` of `i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Neighborhoods {
    pub delta: f64,
    /// `sets[h][i]`, increasing indices.
    sets: Vec<Vec<Vec<usize>>>,
    /// Units whose set was replaced by the nearest donor, per arm.
    filled: Vec<Vec<usize>>,
}

impl Neighborhoods {
    pub fn get(&self, arm: usize, unit: usize) -> &[usize] {
        &self.sets[arm][unit]
    }

    pub fn arms(&self) -> usize {
        self.sets.len()
    }

    pub fn size(&self, arm: usize, unit: usize) -> usize {
        self.sets[arm][unit].len()
    }

    /// Units whose neighborhood in `arm` was empty and got a nearest donor.
    pub fn filled(&self, arm: usize) -> &[usize] {
        &self.filled[arm]
    }

    /// Replace each empty set by the single nearest unit of that arm.
    pub fn fill_empty(mut self, x: &DMatrix<f64>, labels: &[usize]) -> Result<Self> {
        for h in 0..self.sets.len() {
            let donors: Vec<usize> = (0..labels.len()).filter(|&l| labels[l] == h).collect();
            for i in 0..labels.len() {
                if !self.sets[h][i].is_empty() {
                    continue;
                }
                let nearest = donors
                    .iter()
                    .copied()
                    .filter(|&l| l != i)
                    .map(|l| (sq_dist(x, i, l), l))
                    .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                    .ok_or(Error::NoEligibleDonor { arm: h })?;
                self.sets[h][i] = vec![nearest.1];
                self.filled[h].push(i);
            }
        }
        Ok(self)
    }
}

/// `N_i^h = {l != i : ||X_l - X_i|| <= delta, unit l in arm h}` for every arm.
pub fn build_neighborhoods(
    x: &DMatrix<f64>,
    labels: &[usize],
    arms: usize,
    delta: f64,
) -> Result<Neighborhoods> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidInput(format!("delta must be nonnegative, got {delta}")));
    }
    let n = x.nrows();
    let d2 = delta * delta;
    let mut sets = vec![vec![Vec::new(); n]; arms];
    for i in 0..n {
        for l in 0..n {
            if l != i && sq_dist(x, i, l) <= d2 {
                sets[labels[l]][i].push(l);
            }
        }
    }
    Ok(Neighborhoods { delta, sets, filled: vec![Vec::new(); arms] })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SurrogateKind {
    /// Each arm's residual mean uses only that arm's neighbors.
    Plain,
    /// Two arms: both arms' neighbors are pooled, shifting the other arm's
    /// outcomes by the fitted effect.
    #[default]
    Pooled,
}

/// Estimates of `mu^h(X_i) + f(X_i)` for every unit and arm.
#[derive(Debug, Clone, PartialEq)]
pub struct Surrogates {
    pub ystar: Vec<DVector<f64>>,
    pub kind: SurrogateKind,
    /// Effective neighborhood sizes entering the variance correction, `[h][i]`.
    pub counts: Vec<Vec<usize>>,
}

/// Least squares of `Y` on `X` within each arm.
pub fn arm_regressions(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    labels: &[usize],
    arms: usize,
) -> Result<Vec<DVector<f64>>> {
    (0..arms)
        .map(|h| {
            let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == h).collect();
            if rows.is_empty() {
                return Err(Error::NoEligibleDonor { arm: h });
            }
            let xh = DMatrix::from_fn(rows.len(), x.ncols(), |r, j| x[(rows[r], j)]);
            let yh = DVector::from_fn(rows.len(), |r, _| y[rows[r]]);
            least_squares(&xh, &yh).map_err(|_| Error::ArmRankDeficient { arm: h })
        })
        .collect()
}

/// Counterfactual surrogates from per-arm fits corrected by neighborhood
/// residual means.
///
/// `x` is the regression design (include a ones column for an intercept).
/// `effect` is required for [`SurrogateKind::Pooled`]: the estimated
/// arm-1-minus-arm-0 effect at every unit.
pub fn counterfactual_surrogates(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    labels: &[usize],
    nbhd: &Neighborhoods,
    kind: SurrogateKind,
    effect: Option<&DVector<f64>>,
) -> Result<Surrogates> {
    let n = y.len();
    let arms = nbhd.arms();
    let coefs = arm_regressions(y, x, labels, arms)?;
    let fitted: Vec<DVector<f64>> = coefs.iter().map(|b| x * b).collect();
    for h in 0..arms {
        if let Some(i) = (0..n).find(|&i| nbhd.size(h, i) == 0) {
            return Err(Error::EmptyNeighborhood { unit: i, arm: h });
        }
    }

    match kind {
        SurrogateKind::Plain => {
            let ystar = (0..arms)
                .map(|h| {
                    DVector::from_fn(n, |i, _| {
                        let set = nbhd.get(h, i);
                        let resid: f64 = set.iter().map(|&l| y[l] - fitted[h][l]).sum();
                        fitted[h][i] + resid / set.len() as f64
                    })
                })
                .collect();
            let counts = (0..arms).map(|h| (0..n).map(|i| nbhd.size(h, i)).collect()).collect();
            Ok(Surrogates { ystar, kind, counts })
        }
        SurrogateKind::Pooled => {
            if arms != 2 {
                return Err(Error::InvalidInput("pooled surrogates need exactly two arms".into()));
            }
            let shift = effect.ok_or_else(|| {
                Error::InvalidInput("pooled surrogates need an effect estimate".into())
            })?;
            if shift.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "effect has {} entries for {n} units",
                    shift.len()
                )));
            }
            let mut ystar = vec![DVector::zeros(n), DVector::zeros(n)];
            let mut counts = vec![vec![0; n], vec![0; n]];
            for i in 0..n {
                let total = nbhd.size(0, i) + nbhd.size(1, i);
                for h in 0..2 {
                    let mut s = 0.0;
                    for src in 0..2 {
                        // Move a donor's outcome from arm `src` to arm `h`.
                        let offset = match (src, h) {
                            (0, 1) => 1.0,
                            (1, 0) => -1.0,
                            _ => 0.0,
                        };
                        for &l in nbhd.get(src, i) {
                            s += y[l] + offset * shift[l] - fitted[h][l];
                        }
                    }
                    ystar[h][i] = fitted[h][i] + s / total as f64;
                    counts[h][i] = total;
                }
            }
            Ok(Surrogates { ystar, kind, counts })
        }
    }
}

/// Nearest-neighbor estimate of the error variance.
///
/// Neighbors share the unit's arm and lie strictly within `delta`; each unit
/// contributes `|N|/(1+|N|) * (Y_i - mean_N Y)^2`, averaged over all `n`.
pub fn estimate_error_variance(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    labels: &[usize],
    delta: f64,
) -> Result<f64> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidInput(format!("delta must be nonnegative, got {delta}")));
    }
    let n = y.len();
    let d2 = delta * delta;
    let mut total = 0.0;
    let mut any = false;
    for i in 0..n {
        let mut sum = 0.0;
        let mut count = 0usize;
        for l in 0..n {
            if l != i && labels[l] == labels[i] && sq_dist(x, i, l) < d2 {
                sum += y[l];
                count += 1;
            }
        }
        if count > 0 {
            any = true;
            let k = count as f64;
            let dev = y[i] - sum / k;
            total += k / (1.0 + k) * dev * dev;
        }
    }
    if !any {
        return Err(Error::AllNeighborhoodsEmpty);
    }
    Ok(total / n as f64)
}
