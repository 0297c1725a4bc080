use std::path::PathBuf;

use dirac_core::continuous::DEFAULT_TAIL_TOLERANCE;
use dirac_core::inverse::WEYL_THRESHOLD;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Allowed drop of the smallest eigenvalue of the continuous `S` below 1.
    pub positivity: f64,
    /// Round-trip pass/fail bound on `C_k` and `alpha`.
    pub residual: f64,
    /// Threshold on `sigma_min(S) / sigma_max(S)` for the classifier.
    pub admissibility: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            positivity: 0.05,
            residual: 1e-8,
            admissibility: WEYL_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousConfig {
    /// Recovery grid intervals.
    pub grid: usize,
    /// `eta - 2M`.
    pub eta_offset: f64,
    /// Frequency truncation; `None` means `grid / l`.
    pub xi: Option<f64>,
    pub tail_tolerance: f64,
}

impl Default for ContinuousConfig {
    fn default() -> Self {
        Self {
            grid: 400,
            eta_offset: 1.0,
            xi: None,
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
        }
    }
}

impl ContinuousConfig {
    pub fn xi_for(&self, l: f64) -> f64 {
        self.xi.unwrap_or(self.grid as f64 / l)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub tolerances: Tolerances,
    pub continuous: ContinuousConfig,
    pub out: Option<PathBuf>,
    /// Secondary JSON output (diagnostics or error report).
    pub report: Option<PathBuf>,
    pub seed: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let t = &self.tolerances;
        for (name, value) in [
            ("positivity tolerance", t.positivity),
            ("residual tolerance", t.residual),
            ("admissibility margin", t.admissibility),
            ("eta offset", self.continuous.eta_offset),
            ("tail tolerance", self.continuous.tail_tolerance),
            ("xi", self.continuous.xi.unwrap_or(1.0)),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(CliError::invalid(
                    "invalid_config",
                    format!("{name} must be positive, got {value}"),
                ));
            }
        }
        if self.continuous.grid < 16 {
            return Err(CliError::invalid(
                "invalid_config",
                format!(
                    "grid must have at least 16 intervals, got {}",
                    self.continuous.grid
                ),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        assert!(RunConfig::default().validate().is_ok());
        let mut cfg = RunConfig::default();
        cfg.continuous.grid = 8;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.tolerances.residual = 0.0;
        assert!(cfg.validate().is_err());
        assert_eq!(ContinuousConfig::default().xi_for(1.0), 400.0);
    }
}
