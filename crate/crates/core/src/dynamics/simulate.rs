//! BS shift extracted from simulated gate-time sweeps of a sequence template.

use rayon::prelude::*;

use super::floquet::{BSPrediction, Method};
use super::model::{ModelKind, SpinModel};
use super::propagate::{Propagator, StepPolicy};
use super::state::initial_state;
use super::DynamicsError;
use crate::analysis::{bs_shift_analytic, fit_bs_oscillation, ledger_from_schedule, FitResult, RfCalibration, TimeSeries};
use crate::dsl::{compile, Frame, Schedule, SequenceParser};
use crate::spin::NVParams;

/// Reference power (mW) used when a template does not declare `p0`.
pub const DEFAULT_P_REF_MW: f64 = 80.0;

#[derive(Debug, Clone)]
pub struct SimulatedShift {
    pub series: TimeSeries,
    pub fit: FitResult,
    pub prediction: BSPrediction,
    /// Signed fraction of the gate during which RF phase accumulates.
    pub ledger_fraction: f64,
}

/// Compiles `template` with its gate-length parameter `t` set to `t_us`.
pub fn compile_at(
    template: &str,
    t_us: f64,
    params: &NVParams,
    cal: &RfCalibration,
) -> Result<Schedule, DynamicsError> {
    let seq = SequenceParser::new().set("t", t_us).parse(template)?;
    Ok(compile(&seq, Frame::probed(params), params, cal)?)
}

/// Final `P0` of each compiled gate time, computed in parallel.
pub fn sweep_p0(prop: &Propagator, schedules: &[Schedule]) -> Result<Vec<f64>, DynamicsError> {
    let init = initial_state(prop.model());
    schedules
        .par_iter()
        .map(|s| {
            let out = prop.run(s, &init)?;
            out.measurements.last().map(|m| m.1).ok_or(DynamicsError::InvalidInput("sequence has no measure".into()))
        })
        .collect()
}

/// Runs the template over `gate_times` with the RF calibrated so that the
/// template's `p0` power drives the electron with transverse amplitude
/// `omega1`, then fits the oscillation and divides out the ledger fraction.
pub fn bs_shift_from_simulation(
    template: &str,
    params: &NVParams,
    model: ModelKind,
    omega1: f64,
    gate_times: &[f64],
    policy: &StepPolicy,
) -> Result<SimulatedShift, DynamicsError> {
    let p_ref = SequenceParser::new().parse(template)?.param("p0").unwrap_or(DEFAULT_P_REF_MW);
    let cal = RfCalibration::from_omega1(omega1, params.gamma_e, params.rf_tilt, p_ref)
        .map_err(|e| DynamicsError::InvalidInput(e.to_string()))?;
    let prop = Propagator::new(SpinModel::new(model, params), *policy)?;
    let schedules: Vec<Schedule> =
        gate_times.iter().map(|&t| compile_at(template, t, params, &cal)).collect::<Result<_, _>>()?;
    let p0 = sweep_p0(&prop, &schedules)?;
    let series = TimeSeries::new(gate_times.to_vec(), p0)?;
    let fit = fit_bs_oscillation(&series, None)?;
    let last = schedules.last().ok_or(DynamicsError::InvalidInput("empty gate-time grid".into()))?;
    let t_last = *gate_times.last().unwrap();
    let ledger = ledger_from_schedule(last, |_| 1.0).map_err(|e| DynamicsError::InvalidInput(e.to_string()))?;
    let fraction = ledger.oscillation_khz(t_last);
    if fraction.abs() < 1e-12 {
        return Err(DynamicsError::InvalidInput("template accumulates no net RF phase".into()));
    }
    let fitted = fit.omega_bs_khz().unwrap_or(0.0);
    let omega_bs = fitted / (2.0 * fraction.abs());
    let omega0 = params.esr_minus();
    let analytic = bs_shift_analytic(omega1, omega0).ok();
    let prediction = BSPrediction {
        omega_bs_khz: omega_bs,
        omega1_mhz: omega1,
        omega0_mhz: omega0,
        omega_rf_mhz: None,
        method: Method::Simulated,
        ratio_to_analytic: analytic.filter(|a| *a > 0.0).map(|a| omega_bs / a),
        step_halving_change: None,
        steps_per_rf_period: Some(policy.steps_per_rf_period),
    };
    Ok(SimulatedShift { series, fit, prediction, ledger_fraction: fraction })
}
