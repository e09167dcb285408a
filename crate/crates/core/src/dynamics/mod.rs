//! Time evolution under compiled schedules and numerical BS-shift extraction.

mod floquet;
mod model;
mod propagate;
mod simulate;
mod state;

use thiserror::Error;

pub use floquet::{
    floquet_shift_2level, floquet_shift_multilevel, BSPrediction, Method, MultilevelOptions, TRACKING_STEPS,
};
pub use model::{ModelKind, SpinModel};
pub use propagate::{Propagator, RunOutput, StepPolicy};
pub use simulate::{bs_shift_from_simulation, compile_at, sweep_p0, SimulatedShift, DEFAULT_P_REF_MW};
pub use state::{initial_state, laser_reset, measure_p0, DensityState, StateCheck};

use crate::analysis::{FitError, SeriesError};
use crate::dsl::DslError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("step policy too coarse: {steps} steps per RF period, need at least {min}")]
    PolicyTooCoarse { steps: usize, min: usize },
    #[error("sample time {t} µs outside schedule span [0, {end}] µs")]
    SampleOutOfSpan { t: f64, end: f64 },
    #[error("quasi-energy folding ambiguous: line {edge_mhz:.4} MHz from a zone edge for a {shift_khz:.4} kHz shift; choose another RF frequency")]
    FoldingAmbiguity { edge_mhz: f64, shift_khz: f64 },
    #[error("quasi-energy tracking ambiguous near drive amplitude {amplitude} MHz; choose another RF frequency")]
    TrackingAmbiguous { amplitude: f64 },
    #[error("step halving changed the result by {change:.2e} (relative), above the 1e-3 gate")]
    NotConverged { change: f64 },
    #[error("segment is not unitary")]
    NotUnitary,
    #[error("unsupported schedule: {0}")]
    Unsupported(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}
