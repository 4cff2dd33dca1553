//! Gaussian distributions truncated to unions of intervals.
//!
//! Masses are handled in log space through the scaled complementary error
//! function, so the observed statistic may sit tens of standard deviations
//! inside a tail without the CDF collapsing to 0/0.

use serde::Serialize;
use libm::erfc;

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const SQRT_PI_OVER_2: f64 = 1.253_314_137_315_500_3;

/// Finite union of disjoint closed intervals on the extended real line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationRegion {
    intervals: Vec<(f64, f64)>,
}

impl TruncationRegion {
    /// Sort, drop empty pieces and merge overlapping or touching intervals.
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.iter().any(|(a, b)| a.is_nan() || b.is_nan()) {
            return Err(Error::InvalidInput("NaN interval endpoint".into()));
        }
        intervals.retain(|(a, b)| a <= b && *a != f64::INFINITY && *b != f64::NEG_INFINITY);
        intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
        for (a, b) in intervals {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        if merged.is_empty() {
            return Err(Error::ZeroMass);
        }
        Ok(TruncationRegion { intervals: merged })
    }

    pub fn whole_line() -> Self {
        TruncationRegion { intervals: vec![(f64::NEG_INFINITY, f64::INFINITY)] }
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![(a, b)])
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= x && x <= b)
    }

    pub fn lower(&self) -> f64 {
        self.intervals[0].0
    }

    pub fn upper(&self) -> f64 {
        self.intervals[self.intervals.len() - 1].1
    }

    pub fn is_whole_line(&self) -> bool {
        self.intervals == [(f64::NEG_INFINITY, f64::INFINITY)]
    }

    /// The interval containing `x`, if any.
    pub fn piece_containing(&self, x: f64) -> Option<(f64, f64)> {
        self.intervals.iter().copied().find(|&(a, b)| a <= x && x <= b)
    }
}

/// `exp(x^2) * erfc(x)` for `x >= 0`.
pub fn erfcx(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 10.0 {
        return erfc(x) * (x * x).exp();
    }
    // Asymptotic series; at x >= 10 the first omitted term is below 1e-20.
    let inv = 1.0 / (2.0 * x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..24 {
        term *= -((2 * k - 1) as f64) * inv;
        sum += term;
    }
    sum / (x * std::f64::consts::PI.sqrt())
}

/// `ln(Phi_bar(z) / phi(z))` for `z >= 0`.
fn log_mills(z: f64) -> f64 {
    if z == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    (SQRT_PI_OVER_2 * erfcx(z / std::f64::consts::SQRT_2)).ln()
}

/// Upper-tail probability of the standard normal.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// `ln P(Z > z)` for a standard normal `Z`.
pub fn log_normal_sf(z: f64) -> f64 {
    if z == f64::NEG_INFINITY {
        0.0
    } else if z == f64::INFINITY {
        f64::NEG_INFINITY
    } else if z >= 0.0 {
        log_mills(z) - 0.5 * z * z - LN_SQRT_2PI
    } else {
        (-normal_sf(-z)).ln_1p()
    }
}

/// `ln P(a <= Z <= b)` for a standard normal `Z`.
pub fn log_normal_mass(a: f64, b: f64) -> f64 {
    if !(a < b) {
        return f64::NEG_INFINITY;
    }
    if a >= 0.0 {
        let la = log_normal_sf(a);
        if b == f64::INFINITY {
            return la;
        }
        // ln Phi_bar(b) - ln Phi_bar(a) without forming either tail.
        let d = log_mills(b) - log_mills(a) - 0.5 * (b - a) * (b + a);
        la + (-d.exp_m1()).ln()
    } else if b <= 0.0 {
        log_normal_mass(-b, -a)
    } else {
        let lo = if a == f64::NEG_INFINITY { 0.0 } else { normal_sf(-a) };
        let hi = if b == f64::INFINITY { 0.0 } else { normal_sf(b) };
        (-(lo + hi)).ln_1p()
    }
}

fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Log masses of the region to the left and right of `x` under `N(mu, var)`.
fn split_log_mass(x: f64, mu: f64, sd: f64, region: &TruncationRegion) -> (f64, f64) {
    let z = (x - mu) / sd;
    let mut left = Vec::with_capacity(region.intervals.len());
    let mut right = Vec::with_capacity(region.intervals.len());
    for &(a, b) in &region.intervals {
        let (za, zb) = ((a - mu) / sd, (b - mu) / sd);
        if za < z {
            left.push(log_normal_mass(za, zb.min(z)));
        }
        if zb > z {
            right.push(log_normal_mass(za.max(z), zb));
        }
    }
    (log_sum_exp(left), log_sum_exp(right))
}

/// CDF at `x` of `N(mu, var)` truncated to `[a, b]`.
pub fn tn_cdf(x: f64, mu: f64, var: f64, a: f64, b: f64) -> Result<f64> {
    tn_union_cdf(x, mu, var, &TruncationRegion::interval(a, b)?)
}

/// CDF at `x` of `N(mu, var)` truncated to `region`.
pub fn tn_union_cdf(x: f64, mu: f64, var: f64, region: &TruncationRegion) -> Result<f64> {
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::InvalidInput(format!("variance must be positive, got {var}")));
    }
    if x.is_nan() || !mu.is_finite() {
        return Err(Error::InvalidInput("non-finite CDF argument".into()));
    }
    let (l, r) = split_log_mass(x, mu, var.sqrt(), region);
    let total = log_sum_exp([l, r]);
    if !total.is_finite() {
        return Err(Error::ZeroMass);
    }
    let p = if l <= r { (l - total).exp() } else { 1.0 - (r - total).exp() };
    Ok(p.clamp(0.0, 1.0))
}

/// Find `mu` with `tn_union_cdf(x, mu, var, region) = target`.
///
/// The CDF is decreasing in `mu`, so an expanding bracket followed by
/// bisection always converges unless the CDF saturates in floating point.
pub fn invert_mean(x: f64, var: f64, region: &TruncationRegion, target: f64) -> Result<f64> {
    invert_mean_from(x, x, var, region, target)
}

/// As [`invert_mean`], with the initial bracket centred on `seed`.
pub fn invert_mean_from(
    seed: f64,
    x: f64,
    var: f64,
    region: &TruncationRegion,
    target: f64,
) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidInput(format!("target must lie in (0, 1), got {target}")));
    }
    let sd = var.sqrt();
    let g = |mu: f64| tn_union_cdf(x, mu, var, region);
    let fail = Error::BracketFailure { target };

    let mut step = 10.0 * sd;
    let mut lo = seed - step;
    let mut hi = seed + step;
    let mut glo = g(lo)?;
    let mut ghi = g(hi)?;
    let mut doublings = 0;
    while glo < target || ghi > target {
        if doublings == 60 {
            return Err(fail);
        }
        step *= 2.0;
        if glo < target {
            hi = lo;
            ghi = glo;
            lo = seed - step;
            glo = g(lo)?;
        } else {
            lo = hi;
            glo = ghi;
            hi = seed + step;
            ghi = g(hi)?;
        }
        if !lo.is_finite() || !hi.is_finite() {
            return Err(fail);
        }
        doublings += 1;
    }
    if (glo == 1.0 && ghi == 1.0) || (glo == 0.0 && ghi == 0.0) {
        return Err(fail);
    }

    let width_tol = 1e-10 * sd;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid)?;
        if hi - lo <= width_tol && (gm - target).abs() <= 1e-8 {
            return Ok(mid);
        }
        if gm > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    if (g(mid)? - target).abs() <= 1e-8 {
        Ok(mid)
    } else {
        Err(fail)
    }
}
