//! Privacy accounting: regime checks, sensitivity bounds, the cumulative
//! budget, the truthfulness bound and noise calibration.

mod budget;
mod lemma2;
mod regime;

pub use budget::{
    c1, c2, calibrate_noise, decision_step_constant, epsilon, eta, iterate_sensitivity_psi,
    recursion_constant, sensitivity_psi, sensitivity_y, BudgetTerms, EtaReport, Horizon,
    NoiseCalibration, PrivacyReport, SeriesTerm, MAX_SERIES_TERMS, TAIL_TOLERANCE,
};
pub use lemma2::{
    check_lemma2, DrawOutcome, Lemma2Part, Lemma2Summary, RecursionParams, Violation,
};
pub use regime::{check_regime, Inequality, Regime, RegimeConditions};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PrivacyError {
    #[error("w_hat * gamma2 = {contraction} does not exceed u - w1 - w2 = {gap}")]
    DenominatorNonpositive { contraction: f64, gap: f64 },
    #[error("w_hat = {0} is outside (0, 2)")]
    InvalidW(f64),
    #[error("truthfulness regime violated: {}", .0.join(", "))]
    RegimeViolation(Vec<String>),
    #[error("noise is disabled, so no finite budget exists")]
    NoiseDisabled,
    #[error("target budget must be positive and finite, got {0}")]
    NonPositiveTarget(f64),
}
