//! Selective inference for causal effects chosen by an inverse-propensity
//! weighted Lasso.

// `!(x > 0.0)` is how inputs reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod inference;
pub mod lasso;
pub mod linalg;
pub mod model;
pub mod nuisance;
pub mod simulation;
pub mod truncnorm;

pub use error::{Error, Result};
pub use geometry::{Bounds, Decomposition};
pub use inference::{
    analyze, AnalysisConfig, Analysis, Conditioning, Interval, LambdaChoice, NaiveMode,
    PropensityChoice, SelectiveReport, VarianceChoice, VariableResult,
};
pub use lasso::{solve_ipw_lasso, LassoFit, SelectionEvent};
pub use model::{Contrast, Dataset, WeightedOutcome};
pub use nuisance::SurrogateKind;
pub use truncnorm::TruncationRegion;
