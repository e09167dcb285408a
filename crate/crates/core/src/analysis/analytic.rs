//! Closed-form leading-order BS shift.

use crate::scalar::Real;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("transition frequency must be positive (got {0} MHz)")]
    NonPositiveOmega0(f64),
    #[error("shift must be non-negative (got {0} kHz)")]
    NegativeShift(f64),
}

/// `ω1² / (2 ω0)` in kHz for `omega1`, `omega0` in MHz.
pub fn bs_shift_analytic<T: Real>(omega1: T, omega0: T) -> Result<T, AnalyticError> {
    if !(omega0 > T::zero()) {
        return Err(AnalyticError::NonPositiveOmega0(omega0.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(omega1 * omega1 / (T::lit(2.0) * omega0) * T::lit(1e3))
}

/// Drive amplitude (MHz) that produces `shift_khz` on a transition at `omega0`.
pub fn omega1_for_shift<T: Real>(shift_khz: T, omega0: T) -> Result<T, AnalyticError> {
    if !(omega0 > T::zero()) {
        return Err(AnalyticError::NonPositiveOmega0(omega0.to_f64().unwrap_or(f64::NAN)));
    }
    if shift_khz < T::zero() {
        return Err(AnalyticError::NegativeShift(shift_khz.to_f64().unwrap_or(f64::NAN)));
    }
    Ok((T::lit(2.0) * omega0 * shift_khz * T::lit(1e-3)).sqrt())
}
