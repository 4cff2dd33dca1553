use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes across the selection, truncation and inference stages.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("row {row}: assignment is not one-hot")]
    InvalidAssignment { row: usize },

    #[error("row {row}, arm {arm}: propensity {value} is outside (0, 1)")]
    PositivityViolation { row: usize, arm: usize, value: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid contrast: {0}")]
    InvalidContrast(String),

    #[error("propensity scores are required but missing")]
    MissingPropensity,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("coordinate descent did not converge after {sweeps} sweeps (KKT residual {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("design submatrix is rank deficient (condition number {condition:e})")]
    RankDeficient { condition: f64 },

    #[error("selection is degenerate: inactive variable {index} sits on the KKT boundary")]
    DegenerateSelection { index: usize },

    #[error("truncation region carries no representable Gaussian mass")]
    ZeroMass,

    #[error("could not bracket the mean parameter for target {target}")]
    BracketFailure { target: f64 },

    #[error("variable {index} is not in the selected model")]
    IndexNotInModel { index: usize },

    #[error("decomposition direction is degenerate (eta' W^2 eta = 0)")]
    DegenerateDirection,

    #[error("sign union over {size} variables exceeds the cap of {cap}")]
    UnionCapExceeded { size: usize, cap: usize },

    #[error("observed data is inconsistent with its own selection event: {0}")]
    InconsistentEvent(String),

    #[error("logistic regression failed: {0}")]
    Separation(String),

    #[error("arm {arm}: per-arm least squares is rank deficient")]
    ArmRankDeficient { arm: usize },

    #[error("arm {arm} has no units to act as neighborhood donors")]
    NoEligibleDonor { arm: usize },

    #[error("every variance-estimator neighborhood is empty")]
    AllNeighborhoodsEmpty,

    #[error("unit {unit}, arm {arm}: empty neighborhood")]
    EmptyNeighborhood { unit: usize, arm: usize },

    #[error("lasso selected no variables; no inference performed")]
    NoSelection,
}

impl Error {
    /// Whether the failure is numerical (as opposed to bad input data).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::RankDeficient { .. }
                | Error::DegenerateSelection { .. }
                | Error::ZeroMass
                | Error::BracketFailure { .. }
                | Error::DegenerateDirection
                | Error::UnionCapExceeded { .. }
                | Error::InconsistentEvent(_)
                | Error::Separation(_)
                | Error::ArmRankDeficient { .. }
                | Error::EmptyNeighborhood { .. }
        )
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidAssignment { .. } => "InvalidAssignment",
            Error::PositivityViolation { .. } => "PositivityViolation",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::InvalidContrast(_) => "InvalidContrast",
            Error::MissingPropensity => "MissingPropensity",
            Error::InvalidInput(_) => "InvalidInput",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::DegenerateSelection { .. } => "DegenerateSelection",
            Error::ZeroMass => "ZeroMass",
            Error::BracketFailure { .. } => "BracketFailure",
            Error::IndexNotInModel { .. } => "IndexNotInModel",
            Error::DegenerateDirection => "DegenerateDirection",
            Error::UnionCapExceeded { .. } => "UnionCapExceeded",
            Error::InconsistentEvent(_) => "InconsistentEvent",
            Error::Separation(_) => "Separation",
            Error::ArmRankDeficient { .. } => "ArmRankDeficient",
            Error::NoEligibleDonor { .. } => "NoEligibleDonor",
            Error::AllNeighborhoodsEmpty => "AllNeighborhoodsEmpty",
            Error::EmptyNeighborhood { .. } => "EmptyNeighborhood",
            Error::NoSelection => "NoSelection",
        }
    }
}
