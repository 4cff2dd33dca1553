//! IPW-Lasso fitting and the affine description of its selection event.
//!
//! The problem is `min_b 0.5 * ||wy - X b||^2 + lambda * ||b||_1` with no
//! intercept and no column standardization. Cyclic coordinate descent with
//! exact soft-thresholding gives exact zeros, so the active set is read off
//! the coefficients directly. Once the active set settles, the fit is polished
//! by solving the KKT system on that set in closed form.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{complement, gram_inverse, max_abs, select_columns};

/// Maximum number of full coordinate sweeps.
pub const MAX_SWEEPS: usize = 100_000;
/// KKT tolerance, relative to `max(1, ||X'wy||_inf)`.
pub const KKT_TOLERANCE: f64 = 1e-8;
/// Slack allowed when testing polyhedron membership.
pub const MEMBERSHIP_SLACK: f64 = 1e-9;
/// Inactive constraints this close to the boundary are treated as ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// `sign(z) * max(|z| - gamma, 0)`.
#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LassoFit {
    pub beta: DVector<f64>,
    /// Indices with nonzero coefficient, increasing.
    pub active: Vec<usize>,
    /// `sign(beta_j)` for each active index, as `+1.0` / `-1.0`.
    pub signs: Vec<f64>,
    pub lambda: f64,
    pub kkt_residual: f64,
    pub sweeps: usize,
}

impl LassoFit {
    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    fn from_beta(beta: DVector<f64>, lambda: f64, kkt_residual: f64, sweeps: usize) -> Self {
        let active: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
        let signs = active.iter().map(|&j| beta[j].signum()).collect();
        LassoFit { beta, active, signs, lambda, kkt_residual, sweeps }
    }
}

/// `0.5 * ||wy - X beta||^2 + lambda * ||beta||_1`.
pub fn objective(x: &DMatrix<f64>, wy: &DVector<f64>, lambda: f64, beta: &DVector<f64>) -> f64 {
    let r = wy - x * beta;
    0.5 * r.norm_squared() + lambda * beta.lp_norm(1)
}

/// Largest violation of the Lasso KKT conditions at `beta`.
pub fn kkt_residual(x: &DMatrix<f64>, wy: &DVector<f64>, lambda: f64, beta: &DVector<f64>) -> f64 {
    let grad = x.transpose() * (x * beta - wy);
    grad.iter()
        .zip(beta.iter())
        .map(|(&g, &b)| {
            if b != 0.0 {
                (g + lambda * b.signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Absolute KKT tolerance for a problem instance.
pub fn kkt_tolerance(x: &DMatrix<f64>, wy: &DVector<f64>) -> f64 {
    KKT_TOLERANCE * max_abs(&(x.transpose() * wy)).max(1.0)
}

/// Solve the IPW-Lasso by cyclic coordinate descent.
pub fn solve_ipw_lasso(x: &DMatrix<f64>, wy: &DVector<f64>, lambda: f64) -> Result<LassoFit> {
    solve_with_trace(x, wy, lambda, |_| {})
}

/// As [`solve_ipw_lasso`], reporting the coefficient vector after every sweep.
pub fn solve_with_trace<F: FnMut(&DVector<f64>)>(
    x: &DMatrix<f64>,
    wy: &DVector<f64>,
    lambda: f64,
    mut on_sweep: F,
) -> Result<LassoFit> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    if x.nrows() != wy.len() {
        return Err(Error::DimensionMismatch(format!(
            "X has {} rows, wy has {}",
            x.nrows(),
            wy.len()
        )));
    }
    let (n, p) = x.shape();
    let tol = kkt_tolerance(x, wy);
    let step_tol = 1e-10 * (1.0 + max_abs(wy));
    let col_sq: Vec<f64> = (0..p).map(|j| x.column(j).norm_squared()).collect();

    let mut beta = DVector::<f64>::zeros(p);
    let mut resid = wy.clone();
    let mut last_support: Vec<bool> = vec![false; p];
    let mut residual = f64::INFINITY;

    for sweep in 1..=MAX_SWEEPS {
        let mut max_step = 0.0_f64;
        for j in 0..p {
            if col_sq[j] == 0.0 {
                continue;
            }
            let col = x.column(j);
            let old = beta[j];
            let rho = col.dot(&resid) + col_sq[j] * old;
            let new = soft_threshold(rho, lambda) / col_sq[j];
            if new != old {
                resid.axpy(old - new, &col, 1.0);
                beta[j] = new;
                max_step = max_step.max((new - old).abs());
            }
        }
        on_sweep(&beta);

        let support: Vec<bool> = beta.iter().map(|&b| b != 0.0).collect();
        let settled = support == last_support;
        last_support = support;

        if max_step < step_tol || (settled && max_step < 1e-6 * (1.0 + max_abs(&beta))) {
            if let Some(polished) = polish(x, wy, lambda, &beta, tol) {
                let r = kkt_residual(x, wy, lambda, &polished);
                if objective(x, wy, lambda, &polished) <= objective(x, wy, lambda, &beta) + tol {
                    on_sweep(&polished);
                    return Ok(LassoFit::from_beta(polished, lambda, r, sweep));
                }
            }
            if max_step < step_tol {
                // Fresh residual to shed accumulated drift.
                resid = wy - x * &beta;
                residual = kkt_residual(x, wy, lambda, &beta);
                if residual <= tol {
                    return Ok(LassoFit::from_beta(beta, lambda, residual, sweep));
                }
            }
        }
        debug_assert_eq!(resid.len(), n);
    }
    Err(Error::NoConvergence { sweeps: MAX_SWEEPS, residual })
}

/// Closed-form solution on the current support with the current signs, if
/// it keeps those signs and satisfies the KKT conditions.
fn polish(
    x: &DMatrix<f64>,
    wy: &DVector<f64>,
    lambda: f64,
    beta: &DVector<f64>,
    tol: f64,
) -> Option<DVector<f64>> {
    let p = beta.len();
    let active: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
    let mut out = DVector::zeros(p);
    if !active.is_empty() {
        let xm = select_columns(x, &active);
        let inv = gram_inverse(&xm).ok()?;
        let s = DVector::from_iterator(active.len(), active.iter().map(|&j| beta[j].signum()));
        let bm = inv * (xm.transpose() * wy - s.scale(lambda));
        for (k, &j) in active.iter().enumerate() {
            if bm[k] * s[k] <= 0.0 {
                return None;
            }
            out[j] = bm[k];
        }
    }
    (kkt_residual(x, wy, lambda, &out) <= tol).then_some(out)
}

/// Reject fits whose inactive KKT constraints hold with equality.
pub fn check_generic_position(x: &DMatrix<f64>, wy: &DVector<f64>, fit: &LassoFit) -> Result<()> {
    let corr = x.transpose() * (wy - x * &fit.beta);
    for j in complement(x.ncols(), &fit.active) {
        if ((corr[j] / fit.lambda).abs() - 1.0).abs() <= TIE_TOLERANCE {
            return Err(Error::DegenerateSelection { index: j });
        }
    }
    Ok(())
}

/// `{A wy <= b}`: the set of weighted outcomes for which the Lasso returns
/// the active set `active` with signs `signs`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionEvent {
    pub active: Vec<usize>,
    pub signs: Vec<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl SelectionEvent {
    /// `b - A wy`; nonnegative entries mean the constraint holds.
    pub fn slack(&self, wy: &DVector<f64>) -> DVector<f64> {
        &self.b - &self.a * wy
    }

    pub fn rows(&self) -> usize {
        self.b.len()
    }
}

/// Build the affine constraints encoding `{active set = M, signs = s}`.
///
/// Rows are ordered as three blocks: the upper and lower inactive-variable
/// bounds over the complement of `M`, then the sign constraints over `M`.
/// With an empty model only the first two blocks remain.
pub fn selection_polyhedron(
    x: &DMatrix<f64>,
    active: &[usize],
    signs: &[f64],
    lambda: f64,
) -> Result<SelectionEvent> {
    if active.len() != signs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} active indices but {} signs",
            active.len(),
            signs.len()
        )));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    let (n, p) = x.shape();
    let inactive = complement(p, active);
    let (mc, m) = (inactive.len(), active.len());
    let rows = 2 * mc + m;
    let mut a = DMatrix::zeros(rows, n);
    let mut b = DVector::zeros(rows);
    let x_out = select_columns(x, &inactive);

    if m == 0 {
        let xt = x_out.transpose() / lambda;
        a.rows_mut(0, mc).copy_from(&xt);
        a.rows_mut(mc, mc).copy_from(&(-xt));
        b.fill(1.0);
        return Ok(SelectionEvent { active: vec![], signs: vec![], a, b });
    }

    let xm = select_columns(x, active);
    let inv = gram_inverse(&xm)?;
    let s = DVector::from_column_slice(signs);
    // (X_M'X_M)^{-1} X_M'
    let pinv = &inv * xm.transpose();
    let inv_s = &inv * &s;

    if mc > 0 {
        // X_Mc' (I - X_M (X_M'X_M)^{-1} X_M') / lambda
        let cross = x_out.transpose() * &xm;
        let resid_proj = (x_out.transpose() - &cross * &pinv) / lambda;
        a.rows_mut(0, mc).copy_from(&resid_proj);
        a.rows_mut(mc, mc).copy_from(&(-resid_proj));
        let shift = &cross * &inv_s;
        for k in 0..mc {
            b[k] = 1.0 - shift[k];
            b[mc + k] = 1.0 + shift[k];
        }
    }
    for k in 0..m {
        let row = pinv.row(k) * (-s[k] / lambda);
        a.row_mut(2 * mc + k).copy_from(&row);
        b[2 * mc + k] = -s[k] * inv_s[k];
    }
    Ok(SelectionEvent { active: active.to_vec(), signs: signs.to_vec(), a, b })
}

/// Whether `wy` satisfies every constraint of `ev`, up to [`MEMBERSHIP_SLACK`].
pub fn event_membership(ev: &SelectionEvent, wy: &DVector<f64>) -> bool {
    ev.slack(wy).iter().all(|&s| s >= -MEMBERSHIP_SLACK)
}
