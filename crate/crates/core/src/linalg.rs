//! Small dense helpers shared by the selection and inference stages.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Gram matrices with a larger condition number are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Copy the listed columns of `x` into a new matrix, in the given order.
pub fn select_columns(x: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), cols.len(), |i, k| x[(i, cols[k])])
}

/// Columns of `x` not listed in `active`, in increasing order.
pub fn complement(p: usize, active: &[usize]) -> Vec<usize> {
    (0..p).filter(|j| !active.contains(j)).collect()
}

/// Inverse of `x'x` after checking its spectral condition number.
pub fn gram_inverse(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gram = x.transpose() * x;
    symmetric_inverse(gram)
}

/// Inverse of a symmetric positive definite matrix, rejecting near-singular input.
pub fn symmetric_inverse(gram: DMatrix<f64>) -> Result<DMatrix<f64>> {
    if gram.nrows() == 0 {
        return Ok(gram);
    }
    let eig = gram.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) || !(max / min <= MAX_CONDITION) {
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        return Err(Error::RankDeficient { condition });
    }
    match gram.clone().cholesky() {
        Some(ch) => Ok(ch.inverse()),
        None => Err(Error::RankDeficient {
            condition: max / min,
        }),
    }
}

/// Ordinary least squares `argmin ||y - x b||`.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let inv = gram_inverse(x)?;
    Ok(&inv * (x.transpose() * y))
}

/// `x` with each column's mean subtracted.
pub fn center_columns(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    out
}

/// `[1, x]`.
pub fn prepend_ones(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().insert_column(0, 1.0)
}

pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}
