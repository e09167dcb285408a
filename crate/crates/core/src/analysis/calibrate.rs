//! RF-power calibration using the electron BS shift as a power meter.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("calibration inputs must be positive (got {name} = {value})")]
    NonPositive { name: &'static str, value: f64 },
}

fn positive(name: &'static str, value: f64) -> Result<f64, CalibrationError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(CalibrationError::NonPositive { name, value })
    }
}

/// Power → RF field amplitude map, `B1 = b1_ref · sqrt(P / p_ref)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RfCalibration {
    pub p_ref_mw: f64,
    pub b1_ref_mt: f64,
}

impl RfCalibration {
    pub fn new(p_ref_mw: f64, b1_ref_mt: f64) -> Result<Self, CalibrationError> {
        positive("p_ref_mw", p_ref_mw)?;
        if !(b1_ref_mt >= 0.0) {
            return Err(CalibrationError::NonPositive { name: "b1_ref_mt", value: b1_ref_mt });
        }
        Ok(Self { p_ref_mw, b1_ref_mt })
    }

    /// Calibration whose reference power produces the transverse drive `omega1`
    /// (MHz) on the electron: `|γe|·B1·sin(tilt) = omega1`.
    pub fn from_omega1(omega1: f64, gamma_e: f64, rf_tilt: f64, p_ref_mw: f64) -> Result<Self, CalibrationError> {
        let g = positive("|gamma_e| sin(rf_tilt)", gamma_e.abs() * rf_tilt.sin())?;
        Self::new(p_ref_mw, omega1 / g)
    }

    /// mT.
    pub fn b1(&self, power_mw: f64) -> f64 {
        if power_mw <= 0.0 {
            0.0
        } else {
            self.b1_ref_mt * (power_mw / self.p_ref_mw).sqrt()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerCalibration {
    pub power_mw: f64,
    pub b1_scale: f64,
}

/// Infers the applied power from a measured shift, using that the shift is
/// linear in power.
pub fn calibrate_power(measured_khz: f64, reference_khz: f64, p_ref_mw: f64) -> Result<PowerCalibration, CalibrationError> {
    let m = positive("measured_khz", measured_khz)?;
    let r = positive("reference_khz", reference_khz)?;
    let p = positive("p_ref_mw", p_ref_mw)?;
    let ratio = m / r;
    Ok(PowerCalibration { power_mw: p * ratio, b1_scale: ratio.sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn on_resonance_example() {
        let c = calibrate_power(27.09, 20.90, 80.0).unwrap();
        assert!((c.power_mw - 103.694).abs() < 1e-3);
        assert!((c.b1_scale - 1.1385).abs() < 1e-3);
    }

    #[test]
    fn trivial_ratios() {
        let c = calibrate_power(20.0, 20.0, 80.0).unwrap();
        assert_eq!((c.power_mw, c.b1_scale), (80.0, 1.0));
        let c = calibrate_power(80.0, 20.0, 80.0).unwrap();
        assert_eq!((c.power_mw, c.b1_scale), (320.0, 2.0));
        assert!(calibrate_power(0.0, 20.0, 80.0).is_err());
        assert!(calibrate_power(1.0, -1.0, 80.0).is_err());
    }

    #[test]
    fn b1_scales_with_root_power() {
        let cal = RfCalibration::new(80.0, 0.4).unwrap();
        assert_eq!(cal.b1(80.0), 0.4);
        assert!((cal.b1(20.0) - 0.2).abs() < 1e-15);
        assert_eq!(cal.b1(0.0), 0.0);
        let cal = RfCalibration::from_omega1(10.0, -28.0, std::f64::consts::FRAC_PI_2, 80.0).unwrap();
        assert!((cal.b1_ref_mt * 28.0 - 10.0).abs() < 1e-12);
    }
}
