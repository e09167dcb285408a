//! End-to-end scenario runners: simulate, apply a decoherence envelope and
//! detection noise, fit, and reduce to a report.

mod config;
mod report;
mod run;
mod scenario;
pub mod templates;

use thiserror::Error;

pub use config::{Config, ConfigError, Entry};
pub use report::{
    peak_fwhm, CalibrationRecord, ConvergenceEvidence, ExperimentReport, PeakRow, PointReport, SpectrumReport,
};
pub use run::{
    calibrate_omega1, config_sha256, model_shift, run, run_compensation, run_freq_sweep, run_on_resonance,
    run_power_sweep, run_spectrum, CONVERGENCE_THRESHOLD,
};
pub use scenario::{grid, params_from_config, linspace, Decoherence, Detection, ExperimentConfig, Scenario};

use crate::analysis::{FitError, SeriesError, SpectrumError};
use crate::dynamics::DynamicsError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}

impl ExperimentError {
    /// True when the simulator declined to run (step policy, convergence gate
    /// or Floquet ambiguity) rather than the input being malformed.
    pub fn is_refusal(&self) -> bool {
        matches!(
            self,
            ExperimentError::Dynamics(
                DynamicsError::PolicyTooCoarse { .. }
                    | DynamicsError::NotConverged { .. }
                    | DynamicsError::FoldingAmbiguity { .. }
                    | DynamicsError::TrackingAmbiguous { .. }
            )
        )
    }
}
