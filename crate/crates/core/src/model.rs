//! Observed data, treatment contrasts and the inverse-probability weights.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcomes, one-hot arm assignments, confounders and (optionally) propensities.
///
/// Arms are columns of `t`; `e[(i, h)]` is the probability that unit `i`
/// receives arm `h` given its confounders.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: DVector<f64>,
    pub t: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub e: Option<DMatrix<f64>>,
}

impl Dataset {
    /// Build and validate a dataset.
    pub fn new(
        y: DVector<f64>,
        t: DMatrix<f64>,
        x: DMatrix<f64>,
        e: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let ds = Dataset { y, t, x, e };
        validate_dataset(&ds)?;
        Ok(ds)
    }

    /// Build from integer arm labels `0..arms`.
    pub fn from_labels(
        y: DVector<f64>,
        labels: &[usize],
        arms: usize,
        x: DMatrix<f64>,
        e: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        if let Some((row, _)) = labels.iter().enumerate().find(|(_, &l)| l >= arms) {
            return Err(Error::InvalidAssignment { row });
        }
        let t = one_hot(labels, arms);
        Self::new(y, t, x, e)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn arms(&self) -> usize {
        self.t.ncols()
    }

    /// Arm received by unit `i`.
    pub fn arm_of(&self, i: usize) -> usize {
        (0..self.arms())
            .find(|&h| self.t[(i, h)] == 1.0)
            .expect("validated one-hot assignment")
    }

    pub fn labels(&self) -> Vec<usize> {
        (0..self.n()).map(|i| self.arm_of(i)).collect()
    }

    pub fn with_propensity(mut self, e: DMatrix<f64>) -> Result<Self> {
        self.e = Some(e);
        validate_dataset(&self)?;
        Ok(self)
    }
}

pub fn one_hot(labels: &[usize], arms: usize) -> DMatrix<f64> {
    DMatrix::from_fn(labels.len(), arms, |i, h| if labels[i] == h { 1.0 } else { 0.0 })
}

/// Check every structural invariant of a [`Dataset`].
pub fn validate_dataset(ds: &Dataset) -> Result<()> {
    let n = ds.y.len();
    if n < 2 {
        return Err(Error::DimensionMismatch(format!("need n >= 2, got {n}")));
    }
    if ds.x.nrows() != n || ds.t.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "y has {n} rows, T has {}, X has {}",
            ds.t.nrows(),
            ds.x.nrows()
        )));
    }
    if ds.x.ncols() < 1 {
        return Err(Error::DimensionMismatch("X needs at least one column".into()));
    }
    let arms = ds.t.ncols();
    if arms < 2 {
        return Err(Error::DimensionMismatch(format!("need H >= 2 arms, got {arms}")));
    }
    if ds.y.iter().chain(ds.x.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite value in Y or X".into()));
    }
    for i in 0..n {
        let row = ds.t.row(i);
        let ones = row.iter().filter(|&&v| v == 1.0).count();
        let zeros = row.iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || zeros != arms - 1 {
            return Err(Error::InvalidAssignment { row: i });
        }
    }
    if let Some(e) = &ds.e {
        if e.nrows() != n || e.ncols() != arms {
            return Err(Error::DimensionMismatch(format!(
                "propensity matrix is {}x{}, expected {n}x{arms}",
                e.nrows(),
                e.ncols()
            )));
        }
        for i in 0..n {
            for h in 0..arms {
                let v = e[(i, h)];
                if !(v > 0.0 && v < 1.0) {
                    return Err(Error::PositivityViolation { row: i, arm: h, value: v });
                }
            }
            let s: f64 = e.row(i).iter().sum();
            if (s - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidInput(format!(
                    "row {i}: propensities sum to {s}, expected 1"
                )));
            }
        }
    }
    Ok(())
}

/// Coefficients over arms that sum to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Contrast(Vec<f64>);

impl Contrast {
    pub fn new(c: Vec<f64>) -> Result<Self> {
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidContrast("non-finite entry".into()));
        }
        if c.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidContrast("contrast is the zero vector".into()));
        }
        let s: f64 = c.iter().sum();
        if s.abs() > 1e-12 {
            return Err(Error::InvalidContrast(format!("entries sum to {s}, expected 0")));
        }
        Ok(Contrast(c))
    }

    /// `(-1, 1)`: arm 2 minus arm 1.
    pub fn treated_minus_control() -> Self {
        Contrast(vec![-1.0, 1.0])
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for Contrast {
    type Error = Error;
    fn try_from(c: Vec<f64>) -> Result<Self> {
        Contrast::new(c)
    }
}

impl From<Contrast> for Vec<f64> {
    fn from(c: Contrast) -> Self {
        c.0
    }
}

/// Diagonal of the contrast weight matrix and the weighted outcome it produces.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedOutcome {
    pub w: DVector<f64>,
    pub wy: DVector<f64>,
}

/// `w_i = sum_h c_h T_ih / e_ih` and `wy = w * Y`.
pub fn compute_weighted_outcome(ds: &Dataset, c: &Contrast) -> Result<WeightedOutcome> {
    let e = ds.e.as_ref().ok_or(Error::MissingPropensity)?;
    if c.len() != ds.arms() {
        return Err(Error::DimensionMismatch(format!(
            "contrast has {} entries for {} arms",
            c.len(),
            ds.arms()
        )));
    }
    let w = DVector::from_fn(ds.n(), |i, _| {
        c.coefficients()
            .iter()
            .enumerate()
            .map(|(h, ch)| ch * ds.t[(i, h)] / e[(i, h)])
            .sum::<f64>()
    });
    let wy = w.component_mul(&ds.y);
    Ok(WeightedOutcome { w, wy })
}
