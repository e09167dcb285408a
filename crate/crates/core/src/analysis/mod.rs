//! Analytic predictions, phase bookkeeping, fits, spectra and calibration.

mod analytic;
mod calibrate;
mod fit;
mod ledger;
mod lm;
mod series;
mod spectrum;

pub use analytic::{bs_shift_analytic, omega1_for_shift, AnalyticError};
pub use calibrate::{calibrate_power, CalibrationError, PowerCalibration, RfCalibration};
pub use fit::{
    decay_jacobian, decay_model, fit_bs_oscillation, fit_decay, linear_fit, oscillation_jacobian, oscillation_model,
    DecayGuess, FitError, FitFlag, FitModel, FitParam, FitResult, OscillationGuess,
};
pub use ledger::{ledger_from_schedule, phase_ledger, LedgerError, PhaseLedger, RfInterval};
pub use lm::{levenberg_marquardt, LmOptions, LmOutcome, LmProblem};
pub use series::{SeriesError, SeriesMeta, TimeSeries};
pub use spectrum::{fft_spectrum, fft_spectrum_windowed, find_peaks, Peak, Spectrum, SpectrumError, Window};
