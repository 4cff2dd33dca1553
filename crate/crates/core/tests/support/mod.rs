//! Independent reference computations used by the integration and
//! acceptance tests. Nothing here calls into the code under test except to
//! build inputs.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix<R: Rng>(rng: &mut R, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(rng))
}

pub fn normal_vector<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// IPW-like weights: `+-1/e` with `e` in `[0.2, 0.8]`.
pub fn ipw_weights<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| {
        let e = rng.random_range(0.2..0.8);
        if rng.random_bool(0.5) {
            1.0 / e
        } else {
            -1.0 / (1.0 - e)
        }
    })
}

/// A small random selection problem: design, weights, weighted outcome and a
/// log-uniform penalty below `max |X'wy|`.
pub struct Instance {
    pub x: DMatrix<f64>,
    pub w: DVector<f64>,
    pub wy: DVector<f64>,
    pub lambda: f64,
}

pub fn random_instance<R: Rng>(rng: &mut R, n: usize, p: usize) -> Instance {
    let x = normal_matrix(rng, n, p);
    let w = ipw_weights(rng, n);
    let signal = DVector::from_fn(p, |j, _| if j < p / 2 { rng.random_range(-1.0..1.0) } else { 0.0 });
    let y = &x * signal + normal_vector(rng, n);
    let wy = w.component_mul(&y);
    let top = (x.transpose() * &wy).amax();
    let lambda = top * 10f64.powf(rng.random_range(-2.0..0.0));
    Instance { x, w, wy, lambda }
}

/// A weighted outcome that satisfies the KKT conditions of `(active, signs)`
/// whenever that event is nonempty near the construction.
pub fn point_for_event<R: Rng>(r: &mut R, x: &DMatrix<f64>, active: &[usize], signs: &[f64], lambda: f64) -> DVector<f64> {
    let n = x.nrows();
    let xm = DMatrix::from_fn(n, active.len(), |i, k| x[(i, active[k])]);
    let g = (xm.transpose() * &xm).try_inverse().unwrap();
    let s = DVector::from_column_slice(signs);
    let beta = DVector::from_fn(active.len(), |k, _| s[k] * r.random_range(0.05..2.0));
    // Residual: lambda X_M G s plus a random component orthogonal to X_M.
    let g_noise = normal_vector(r, n);
    let orth = &g_noise - &xm * (&g * (xm.transpose() * &g_noise));
    let scale = lambda * r.random_range(0.0..0.3) / orth.norm().max(1e-12);
    &xm * beta + &xm * (&g * &s) * lambda + orth * scale
}

// ---------------------------------------------------------------------------
// Quadrature

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson integral of `f` over `[a, b]` (finite).
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `ln` of the standard normal mass on `[a, b]`, by quadrature of the density
/// rescaled at the point of the interval nearest zero.
pub fn log_mass_by_quadrature(a: f64, b: f64) -> f64 {
    if a >= b {
        return f64::NEG_INFINITY;
    }
    let anchor = if a > 0.0 {
        a
    } else if b < 0.0 {
        b
    } else {
        0.0
    };
    // Beyond 40 units of the anchor the rescaled density is below e^-800.
    let lo = a.max(anchor - 40.0);
    let hi = b.min(anchor + 40.0);
    let f = move |t: f64| (-0.5 * (t * t - anchor * anchor)).exp();
    // Split at the anchor and on a unit grid so the adaptive rule sees the peak.
    let mut cuts = vec![lo];
    let mut c = lo.ceil();
    while c < hi {
        if c > lo {
            cuts.push(c);
        }
        c += 1.0;
    }
    cuts.push(hi);
    let total: f64 = cuts.windows(2).map(|s| integrate(&f, s[0], s[1], 1e-15)).sum();
    total.ln() - 0.5 * anchor * anchor - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Truncated-normal CDF over a union of intervals, by quadrature.
pub fn quadrature_cdf(x: f64, mu: f64, var: f64, pieces: &[(f64, f64)]) -> f64 {
    let sd = var.sqrt();
    let std = |v: f64| (v - mu) / sd;
    let mut below = vec![];
    let mut all = vec![];
    for &(a, b) in pieces {
        let (za, zb) = (std(a), std(b));
        all.push(log_mass_by_quadrature(za, zb));
        below.push(log_mass_by_quadrature(za, zb.min(std(x))));
    }
    (log_sum_exp(&below) - log_sum_exp(&all)).exp()
}

// ---------------------------------------------------------------------------
// Lasso by enumeration

/// Global Lasso minimiser found by trying every sign pattern in `{-1,0,1}^p`:
/// each pattern's stationary point is kept when its signs agree with the
/// pattern, and the best objective among those wins.
pub fn exhaustive_lasso(x: &DMatrix<f64>, wy: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let p = x.ncols();
    let objective = |b: &DVector<f64>| 0.5 * (wy - x * b).norm_squared() + lambda * b.lp_norm(1);
    let mut best = DVector::zeros(p);
    let mut best_val = objective(&best);
    let patterns = 3usize.pow(p as u32);
    for code in 1..patterns {
        let mut signs = vec![0i32; p];
        let mut c = code;
        for s in signs.iter_mut() {
            *s = [0, 1, -1][c % 3];
            c /= 3;
        }
        let active: Vec<usize> = (0..p).filter(|&j| signs[j] != 0).collect();
        let xm = DMatrix::from_fn(x.nrows(), active.len(), |i, k| x[(i, active[k])]);
        let s = DVector::from_iterator(active.len(), active.iter().map(|&j| signs[j] as f64));
        let rhs = xm.transpose() * wy - s * lambda;
        let Some(chol) = (xm.transpose() * &xm).cholesky() else { continue };
        let bm = chol.solve(&rhs);
        if active.iter().enumerate().any(|(k, &j)| bm[k] * signs[j] as f64 <= 0.0) {
            continue;
        }
        let mut b = DVector::zeros(p);
        for (k, &j) in active.iter().enumerate() {
            b[j] = bm[k];
        }
        let val = objective(&b);
        if val < best_val {
            best_val = val;
            best = b;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Dense-matrix forms of the correction terms

pub fn eta_dense(x: &DMatrix<f64>, active: &[usize], k: usize) -> DVector<f64> {
    let xm = DMatrix::from_fn(x.nrows(), active.len(), |i, c| x[(i, active[c])]);
    let g = (xm.transpose() * &xm).try_inverse().unwrap();
    let e = DVector::from_fn(active.len(), |c, _| if c == k { 1.0 } else { 0.0 });
    // e_j' G X_M' written out as a row, then transposed.
    (e.transpose() * g * xm.transpose()).transpose()
}

/// `sigma^2 e_j' G X_M' W W X_M G e_j` with explicit diagonal matrices.
pub fn zeta_dense(x: &DMatrix<f64>, active: &[usize], k: usize, w: &DVector<f64>, sigma2: f64) -> f64 {
    let wmat = DMatrix::from_diagonal(w);
    let eta = eta_dense(x, active, k);
    sigma2 * (eta.transpose() * &wmat * &wmat * &eta)[(0, 0)]
}

/// `eta' sum_h c_h (W^h - I) Y^h*`.
pub fn tau_dense(
    eta: &DVector<f64>,
    t: &DMatrix<f64>,
    e: &DMatrix<f64>,
    ystar: &[DVector<f64>],
    c: &[f64],
) -> f64 {
    let n = eta.len();
    let mut acc = DVector::zeros(n);
    for h in 0..c.len() {
        let wh = DMatrix::from_fn(n, n, |i, l| if i == l { t[(i, h)] / e[(i, h)] } else { 0.0 });
        acc += (wh - DMatrix::identity(n, n)) * &ystar[h] * c[h];
    }
    eta.dot(&acc)
}

/// `zeta + sigma^2 sum_h c_h^2 eta' K^h eta` with `K^h = diag((1/e - 1)/|N|)`.
pub fn rho_dense(
    zeta: f64,
    eta: &DVector<f64>,
    sigma2: f64,
    counts: &[Vec<usize>],
    e: &DMatrix<f64>,
    c: &[f64],
) -> f64 {
    let n = eta.len();
    let mut extra = 0.0;
    for h in 0..c.len() {
        let k = DMatrix::from_fn(n, n, |i, l| {
            if i == l {
                (1.0 / e[(i, h)] - 1.0) / counts[h][i] as f64
            } else {
                0.0
            }
        });
        extra += c[h] * c[h] * (eta.transpose() * k * eta)[(0, 0)];
    }
    zeta + sigma2 * extra
}
