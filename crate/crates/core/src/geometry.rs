//! Restricting the selection event to the line through the data along the
//! direction of one coefficient's test statistic.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lasso::{SelectionEvent, MEMBERSHIP_SLACK};
use crate::linalg::{complement, gram_inverse, select_columns};
use crate::truncnorm::TruncationRegion;

/// `(A D)_k` below this magnitude is treated as exactly zero.
pub const ZERO_DIRECTION: f64 = 1e-11;
/// Default largest model for which every sign vector is enumerated.
pub const DEFAULT_UNION_CAP: usize = 12;

/// Split of the weighted outcome into the statistic and an orthogonal remainder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub eta: DVector<f64>,
    pub d: DVector<f64>,
    pub z: DVector<f64>,
    pub stat: f64,
}

impl Decomposition {
    /// `z + d * t`: the weighted outcome with the statistic replaced by `t`.
    pub fn point(&self, t: f64) -> DVector<f64> {
        &self.z + &self.d * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bounds {
    pub vminus: f64,
    pub vplus: f64,
    pub vzero: f64,
}

impl Bounds {
    /// Whether the bounds describe a nonempty interval of the event.
    pub fn is_feasible(&self) -> bool {
        self.vminus < self.vplus && self.vzero >= -MEMBERSHIP_SLACK
    }
}

/// `X_M (X_M'X_M)^{-1} e_j`, with `e_j` picking `j`'s position within `active`.
pub fn eta_vector(x: &DMatrix<f64>, active: &[usize], j: usize) -> Result<DVector<f64>> {
    let k = active.iter().position(|&m| m == j).ok_or(Error::IndexNotInModel { index: j })?;
    let xm = select_columns(x, active);
    let inv = gram_inverse(&xm)?;
    Ok(xm * inv.column(k))
}

/// `d = w^2 * eta / sum(w^2 eta^2)`, `stat = eta'wy`, `z = wy - d * stat`.
pub fn decompose(w: &DVector<f64>, wy: &DVector<f64>, eta: &DVector<f64>) -> Result<Decomposition> {
    let w2eta = w.component_mul(w).component_mul(eta);
    let denom = w2eta.dot(eta);
    if !(denom > 0.0) {
        return Err(Error::DegenerateDirection);
    }
    let d = w2eta / denom;
    let stat = eta.dot(wy);
    let z = wy - &d * stat;
    Ok(Decomposition { eta: eta.clone(), d, z, stat })
}

fn fold_bounds(rows: impl Iterator<Item = (f64, f64)>) -> Bounds {
    let mut out = Bounds { vminus: f64::NEG_INFINITY, vplus: f64::INFINITY, vzero: f64::INFINITY };
    for (ad, slack) in rows {
        if ad.abs() <= ZERO_DIRECTION {
            out.vzero = out.vzero.min(slack);
        } else if ad < 0.0 {
            out.vminus = out.vminus.max(slack / ad);
        } else {
            out.vplus = out.vplus.min(slack / ad);
        }
    }
    out
}

/// Range of `t` for which `z + d t` stays inside the event, plus the
/// tightest constraint that does not depend on `t`.
pub fn truncation_bounds(ev: &SelectionEvent, dec: &Decomposition) -> Bounds {
    let ad = &ev.a * &dec.d;
    let slack = &ev.b - &ev.a * &dec.z;
    fold_bounds(ad.iter().copied().zip(slack.iter().copied()))
}

/// Quantities shared by every sign vector on a fixed active set.
struct LineGeometry {
    /// `X_Mc'(I - P_M) d / lambda` and the same applied to `z`.
    out_d: DVector<f64>,
    out_z: DVector<f64>,
    /// `X_Mc' X_M (X_M'X_M)^{-1}`.
    cross: DMatrix<f64>,
    /// `(X_M'X_M)^{-1} X_M' d / lambda` and the same applied to `z`.
    in_d: DVector<f64>,
    in_z: DVector<f64>,
    inv: DMatrix<f64>,
}

impl LineGeometry {
    fn new(x: &DMatrix<f64>, active: &[usize], lambda: f64, dec: &Decomposition) -> Result<Self> {
        let xm = select_columns(x, active);
        let xo = select_columns(x, &complement(x.ncols(), active));
        let inv = gram_inverse(&xm)?;
        let proj = |v: &DVector<f64>| -> (DVector<f64>, DVector<f64>) {
            let coef = &inv * (xm.transpose() * v);
            let resid = v - &xm * &coef;
            (xo.transpose() * resid / lambda, coef / lambda)
        };
        let (out_d, in_d) = proj(&dec.d);
        let (out_z, in_z) = proj(&dec.z);
        let cross = xo.transpose() * &xm * &inv;
        Ok(LineGeometry { out_d, out_z, cross, in_d, in_z, inv })
    }

    fn bounds(&self, s: &DVector<f64>) -> Bounds {
        let shift = &self.cross * s;
        let inv_s = &self.inv * s;
        let upper = (0..self.out_d.len())
            .map(|k| (self.out_d[k], 1.0 - shift[k] - self.out_z[k]));
        let lower = (0..self.out_d.len())
            .map(|k| (-self.out_d[k], 1.0 + shift[k] + self.out_z[k]));
        let signs = (0..s.len()).map(|k| (-s[k] * self.in_d[k], -s[k] * inv_s[k] + s[k] * self.in_z[k]));
        fold_bounds(upper.chain(lower).chain(signs))
    }
}

/// Bounds for every sign vector on `active`, in the order of
/// [`sign_vectors`].
pub fn all_sign_bounds(
    x: &DMatrix<f64>,
    active: &[usize],
    lambda: f64,
    dec: &Decomposition,
) -> Result<Vec<(Vec<f64>, Bounds)>> {
    let geo = LineGeometry::new(x, active, lambda, dec)?;
    Ok(sign_vectors(active.len())
        .map(|s| {
            let b = geo.bounds(&DVector::from_column_slice(&s));
            (s, b)
        })
        .collect())
}

/// Every vector in `{-1, +1}^m`, counting up in binary with bit set = `+1`.
pub fn sign_vectors(m: usize) -> impl Iterator<Item = Vec<f64>> {
    (0..1usize << m).map(move |code| {
        (0..m).map(|k| if code >> k & 1 == 1 { 1.0 } else { -1.0 }).collect()
    })
}

/// Bounds for the observed sign vector only.
pub fn observed_sign_bounds(
    x: &DMatrix<f64>,
    active: &[usize],
    signs: &[f64],
    lambda: f64,
    dec: &Decomposition,
) -> Result<Bounds> {
    let geo = LineGeometry::new(x, active, lambda, dec)?;
    Ok(geo.bounds(&DVector::from_column_slice(signs)))
}

/// Region of the statistic consistent with selecting `active` under any signs.
pub fn sign_union_region(
    x: &DMatrix<f64>,
    active: &[usize],
    lambda: f64,
    dec: &Decomposition,
    cap: usize,
) -> Result<TruncationRegion> {
    if active.len() > cap {
        return Err(Error::UnionCapExceeded { size: active.len(), cap });
    }
    let pieces: Vec<(f64, f64)> = all_sign_bounds(x, active, lambda, dec)?
        .into_iter()
        .filter(|(_, b)| b.is_feasible())
        .map(|(_, b)| (b.vminus, b.vplus))
        .collect();
    enclose_stat(pieces, dec.stat)
}

/// Region of the statistic consistent with the observed active set and signs.
pub fn observed_sign_region(
    x: &DMatrix<f64>,
    active: &[usize],
    signs: &[f64],
    lambda: f64,
    dec: &Decomposition,
) -> Result<TruncationRegion> {
    let b = observed_sign_bounds(x, active, signs, lambda, dec)?;
    if b.vzero < -MEMBERSHIP_SLACK {
        return Err(Error::InconsistentEvent(format!("vzero = {:e}", b.vzero)));
    }
    enclose_stat(vec![(b.vminus, b.vplus)], dec.stat)
}

/// Build the region, stretching the nearest piece when rounding leaves the
/// observed statistic marginally outside.
fn enclose_stat(mut pieces: Vec<(f64, f64)>, stat: f64) -> Result<TruncationRegion> {
    let tol = 1e-7 * (1.0 + stat.abs());
    if !pieces.iter().any(|&(a, b)| a <= stat && stat <= b) {
        let nearest = pieces
            .iter_mut()
            .map(|p| {
                let gap = if stat < p.0 { p.0 - stat } else { stat - p.1 };
                (gap, p)
            })
            .min_by(|x, y| x.0.total_cmp(&y.0));
        match nearest {
            Some((gap, p)) if gap <= tol => {
                p.0 = p.0.min(stat);
                p.1 = p.1.max(stat);
            }
            _ => {
                return Err(Error::InconsistentEvent(format!(
                    "statistic {stat} lies outside every feasible interval"
                )))
            }
        }
    }
    TruncationRegion::new(pieces)
}
