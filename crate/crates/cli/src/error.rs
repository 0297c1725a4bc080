//! Exit codes and machine-readable failures.

use dirac_core::Error;
use serde::Serialize;

pub const EXIT_OK: i32 = 0;
/// Output could not be written.
pub const EXIT_IO: i32 = 1;
/// Malformed or invalid input, including violated structural conditions.
pub const EXIT_INVALID: i32 = 2;
/// Taylor data rejected as not coming from a Weyl function.
pub const EXIT_NOT_WEYL: i32 = 3;
/// Numerically ill-conditioned or singular computation.
pub const EXIT_ILL_CONDITIONED: i32 = 4;
/// Quadrature or step-size budget exceeded.
pub const EXIT_BUDGET: i32 = 5;
/// A requested check ran but did not pass (round-trip tolerance).
pub const EXIT_CHECK_FAILED: i32 = 6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub code: i32,
    pub kind: String,
    pub message: String,
    /// Structural condition that failed, when there is one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<String>,
}

impl CliError {
    pub fn new(code: i32, kind: &str, message: String) -> Self {
        Self {
            code,
            kind: kind.to_string(),
            message,
            condition: None,
        }
    }

    pub fn invalid(kind: &str, message: String) -> Self {
        Self::new(EXIT_INVALID, kind, message)
    }

    pub fn io(message: String) -> Self {
        Self::new(EXIT_IO, "io", message)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_else(|_| format!("{{\"code\":{}}}", self.code))
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        let (code, kind) = match &e {
            Error::InvalidBeta { .. } => (EXIT_INVALID, "invalid_beta"),
            Error::InvalidSystem { .. } => (EXIT_INVALID, "invalid_system"),
            Error::NotUnitary { .. } => (EXIT_INVALID, "not_unitary"),
            Error::NotSquare { .. } | Error::DimensionMismatch { .. } => {
                (EXIT_INVALID, "shape_mismatch")
            }
            Error::NotHermitian { .. } => (EXIT_INVALID, "not_hermitian"),
            Error::WrongBlockSize { .. } => (EXIT_INVALID, "wrong_block_size"),
            Error::HalfPlaneViolation { .. } => (EXIT_INVALID, "half_plane"),
            Error::InvalidInput(_) => (EXIT_INVALID, "invalid_input"),
            Error::NotAWeylFunction { .. } => (EXIT_NOT_WEYL, "not_a_weyl_function"),
            Error::IllConditioned { .. } => (EXIT_ILL_CONDITIONED, "ill_conditioned"),
            Error::NumericBreakdown { .. } => (EXIT_ILL_CONDITIONED, "numeric_breakdown"),
            Error::SingularSchurComplement { .. } => {
                (EXIT_ILL_CONDITIONED, "singular_schur_complement")
            }
            Error::SingularDenominator { .. } => (EXIT_ILL_CONDITIONED, "singular_denominator"),
            Error::NotPositive { .. } => (EXIT_ILL_CONDITIONED, "not_positive"),
            Error::Pole(_) => (EXIT_ILL_CONDITIONED, "pole"),
            Error::NonFinite(_) => (EXIT_ILL_CONDITIONED, "non_finite"),
            Error::LambdaZero | Error::ResolventSingular => {
                (EXIT_ILL_CONDITIONED, "singular_point")
            }
            Error::UnsupportedOperator { .. } => (EXIT_ILL_CONDITIONED, "unsupported_operator"),
            Error::TruncationBudgetExceeded { .. } => (EXIT_BUDGET, "truncation_budget_exceeded"),
            Error::StepSizeTooCoarse { .. } => (EXIT_BUDGET, "step_size_too_coarse"),
        };
        let condition = match &e {
            Error::InvalidBeta { condition, .. } => Some(condition.as_str().to_string()),
            _ => None,
        };
        Self {
            code,
            kind: kind.to_string(),
            message,
            condition,
        }
    }
}
