//! Serializable experiment results.

use std::collections::BTreeMap;

use serde::Serialize;

use super::scenario::Scenario;
use crate::analysis::{FitResult, Peak, Spectrum, TimeSeries};
use crate::dynamics::{ModelKind, StepPolicy};

/// Drive calibration used by a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationRecord {
    pub p_ref_mw: f64,
    pub b1_ref_mt: f64,
    /// Transverse electron drive at `p_ref_mw`.
    pub omega1_mhz: f64,
    /// Model shift at `p_ref_mw` and `calibration_freq_mhz`.
    pub shift_ref_khz: f64,
    pub calibration_freq_mhz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointReport {
    pub index: usize,
    pub label: String,
    /// Simulated `P0` before envelope and noise.
    pub series: TimeSeries,
    /// Detected signal `a + b·(2P0 − 1)·envelope + noise`, the fitted data.
    pub signal: TimeSeries,
    pub fit: Option<FitResult>,
    /// Signed RF-on fraction of the gate from the phase ledger.
    pub ledger_fraction: Option<f64>,
    /// Shift implied by the fit after dividing out the ledger fraction.
    pub omega_bs_khz: Option<f64>,
    /// Cosine frequency of the signal predicted by the ledger at the calibrated shift.
    pub ledger_cosine_khz: Option<f64>,
}

impl PointReport {
    pub fn cosine_khz(&self) -> Option<f64> {
        self.fit.as_ref().and_then(|f| f.omega_bs_khz()).map(|w| w / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakRow {
    pub freq_mhz: f64,
    pub magnitude: f64,
    /// Closest ESR line consistent with the frame offset.
    pub line_label: String,
    pub line_mhz: f64,
    pub deviation_mhz: f64,
    pub fwhm_mhz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub spectrum: Spectrum,
    pub peaks: Vec<PeakRow>,
}

/// Result of re-running one point with every step halved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceEvidence {
    pub point_index: usize,
    pub gate_time_us: f64,
    pub p0: f64,
    pub p0_halved: f64,
    pub abs_change: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub scenario: Scenario,
    pub model: ModelKind,
    pub template: String,
    /// SHA-256 of the resolved configuration.
    pub config_sha256: String,
    pub seed: u64,
    pub noise_sigma: f64,
    pub policy: StepPolicy,
    pub calibration: Option<CalibrationRecord>,
    pub points: Vec<PointReport>,
    pub spectrum: Option<SpectrumReport>,
    /// Scenario statistics keyed with their units.
    pub derived: BTreeMap<String, f64>,
    pub linear_fit: Option<FitResult>,
    pub convergence: Option<ConvergenceEvidence>,
}

impl ExperimentReport {
    pub fn derived(&self, key: &str) -> Option<f64> {
        self.derived.get(key).copied()
    }

    /// Every fit that did not reach its convergence criterion.
    pub fn unconverged_fits(&self) -> Vec<&str> {
        self.points
            .iter()
            .filter(|p| p.fit.as_ref().is_some_and(|f| !f.converged))
            .map(|p| p.label.as_str())
            .chain(self.linear_fit.iter().filter(|f| !f.converged).map(|_| "linear"))
            .collect()
    }
}

/// Full width at half maximum of the peak nearest `peak`, by linear
/// interpolation of the half-level crossings.
pub fn peak_fwhm(spec: &Spectrum, peak: &Peak) -> Option<f64> {
    let f = &spec.freq_mhz;
    let m = &spec.magnitude;
    if f.len() < 3 {
        return None;
    }
    let i0 = f
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - peak.freq_mhz).abs().total_cmp(&(b.1 - peak.freq_mhz).abs()))?
        .0;
    let half = m[i0] / 2.0;
    let cross = |a: usize, b: usize| f[a] + (half - m[a]) * (f[b] - f[a]) / (m[b] - m[a]);
    let mut lo = None;
    let mut i = i0;
    while i > 0 {
        if m[i - 1] <= half {
            lo = Some(cross(i - 1, i));
            break;
        }
        i -= 1;
    }
    let mut hi = None;
    let mut i = i0;
    while i + 1 < m.len() {
        if m[i + 1] <= half {
            hi = Some(cross(i, i + 1));
            break;
        }
        i += 1;
    }
    Some(hi? - lo?)
}
