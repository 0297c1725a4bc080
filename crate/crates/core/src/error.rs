use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which structural requirement on a row sequence `beta` failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaCondition {
    /// `beta(k) beta(k)^* = I_p`
    Coisometry,
    /// `det beta_1(0) != 0` and `det beta(k-1) beta(k)^* != 0`
    Nondegeneracy,
}

impl BetaCondition {
    pub fn as_str(self) -> &'static str {
        match self {
            BetaCondition::Coisometry => "coisometry",
            BetaCondition::Nondegeneracy => "nondegeneracy",
        }
    }
}

impl fmt::Display for BetaCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BetaCondition::Coisometry => write!(f, "coisometry (beta beta^* = I_p)"),
            BetaCondition::Nondegeneracy => write!(
                f,
                "nondegeneracy (det beta_1(0) != 0, det beta(k-1) beta(k)^* != 0)"
            ),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error(
        "operator is not the structured triangular Toeplitz operator (deviation {deviation:e})"
    )]
    UnsupportedOperator { deviation: f64 },

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositive { index: usize, pivot: f64 },

    #[error("Moebius denominator is singular (relative smallest singular value {sigma_ratio:e})")]
    SingularDenominator { sigma_ratio: f64 },

    #[error("invalid beta at index {index}: {condition} violated (value {value:e})")]
    InvalidBeta {
        index: usize,
        condition: BetaCondition,
        value: f64,
    },

    #[error("invalid system coefficient C_{index}: {reason}")]
    InvalidSystem { index: usize, reason: String },

    #[error("matrix U({index}) is not unitary (deviation {deviation:e})")]
    NotUnitary { index: usize, deviation: f64 },

    #[error("spectral parameter lambda = 0 is a singular point of the discrete system")]
    LambdaZero,

    #[error("resolvent (A - lambda I)^-1 is singular at lambda = i/2")]
    ResolventSingular,

    #[error("pole of the Cayley map at {0}")]
    Pole(&'static str),

    #[error("numeric breakdown at stage {stage}: condition number {condition:e}")]
    NumericBreakdown { stage: usize, condition: f64 },

    #[error("data is not Taylor data of a Weyl function (invertibility margin {margin:e})")]
    NotAWeylFunction { margin: f64 },

    #[error("ill-conditioned reconstruction at stage {stage}: {detail} (condition number {condition:e})")]
    IllConditioned {
        stage: usize,
        detail: String,
        condition: f64,
    },

    #[error("Schur complement is singular at stage {stage}")]
    SingularSchurComplement { stage: usize },

    #[error("Im lambda = {im} is not below -M = {neg_bound}")]
    HalfPlaneViolation { im: f64, neg_bound: f64 },

    #[error("step size too coarse: h * (|lambda| + M) = {product} needs more than {max_substeps} substeps")]
    StepSizeTooCoarse { product: f64, max_substeps: usize },

    #[error("Fourier truncation tail estimate {estimate:e} exceeds budget {budget:e}")]
    TruncationBudgetExceeded { estimate: f64, budget: f64 },

    #[error("operation requires p = 1, got p = {p}")]
    WrongBlockSize { p: usize },

    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
