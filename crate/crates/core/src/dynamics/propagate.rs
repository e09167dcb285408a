//! Time-ordered propagators for compiled schedules.
//!
//! Drive terms are sampled at step midpoints and each step is an exact
//! exponential. Segments with periodic drives reuse a cached one-period
//! propagator (and its prefix products) raised to integer powers; the remaining
//! fraction of a period is stepped on the same grid. Rotating-frame RF segments
//! are integrated in the lab frame and transformed, so the counter-rotating
//! RF components are kept in full.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::Serialize;

use super::model::SpinModel;
use super::state::{laser_reset, measure_p0, DensityState};
use super::DynamicsError;
use crate::dsl::{Action, DriveTerm, Frame, Schedule, Segment};
use crate::linalg::unitary_power;
use crate::Operator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepPolicy {
    pub steps_per_rf_period: usize,
    /// µs; upper bound on any time step.
    pub max_step: f64,
    /// Reuse one-period propagators via matrix powers.
    pub strobe: bool,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self { steps_per_rf_period: 256, max_step: 0.01, strobe: true }
    }
}

impl StepPolicy {
    pub const MIN_STEPS_PER_PERIOD: usize = 32;

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if self.steps_per_rf_period < Self::MIN_STEPS_PER_PERIOD {
            return Err(DynamicsError::PolicyTooCoarse {
                steps: self.steps_per_rf_period,
                min: Self::MIN_STEPS_PER_PERIOD,
            });
        }
        if !(self.max_step > 0.0 && self.max_step.is_finite()) {
            return Err(DynamicsError::InvalidInput(format!("max_step must be positive, got {}", self.max_step)));
        }
        Ok(())
    }

    /// Same policy with every step halved.
    pub fn halved(&self) -> Self {
        Self { steps_per_rf_period: 2 * self.steps_per_rf_period, max_step: self.max_step / 2.0, ..*self }
    }

    pub(crate) fn steps_for_period(&self, period: f64) -> usize {
        self.steps_per_rf_period.max((period / self.max_step).ceil() as usize)
    }
}

/// Step exponentials over one drive period, as prefix products
/// `prefix[m] = U(m·dt, 0)`.
struct PeriodData {
    prefix: Vec<Operator>,
    dt: f64,
    period: f64,
}

type Key = Vec<u64>;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub final_state: DensityState,
    /// `(time µs, P0)` at every `Measure` action.
    pub measurements: Vec<(f64, f64)>,
}

pub struct Propagator {
    model: SpinModel,
    policy: StepPolicy,
    cache: Mutex<HashMap<Key, Arc<PeriodData>>>,
}

const CACHE_LIMIT: usize = 512;

fn hamiltonian_at(base: &Operator, model: &SpinModel, osc: &[DriveTerm], tau: f64) -> Operator {
    let mut h = base.clone();
    for d in osc {
        h += &model.operator(d.op).scale(d.value(tau));
    }
    h
}

fn step(h: &Operator, dt: f64) -> Operator {
    h.exp_i_hermitian(std::f64::consts::TAU * dt)
}

impl Propagator {
    pub fn new(model: SpinModel, policy: StepPolicy) -> Result<Self, DynamicsError> {
        policy.validate()?;
        Ok(Self { model, policy, cache: Mutex::new(HashMap::new()) })
    }

    pub fn model(&self) -> &SpinModel {
        &self.model
    }

    pub fn policy(&self) -> StepPolicy {
        self.policy
    }

    fn static_base(&self, frame: Frame, stat: &[DriveTerm]) -> Operator {
        let mut h = match frame {
            Frame::Lab => self.model.h0.clone(),
            Frame::Rotating { carrier_mhz } => self.model.rotating_h0(carrier_mhz),
        };
        for d in stat {
            h += &self.model.operator(d.op).scale(d.value(0.0));
        }
        h
    }

    fn period_data(&self, osc: &[DriveTerm], freq: f64) -> Arc<PeriodData> {
        let key: Key = osc
            .iter()
            .flat_map(|d| [d.op as u64, d.amplitude.to_bits(), d.frequency.to_bits(), d.phase.to_bits()])
            .collect();
        if let Some(p) = self.cache.lock().unwrap().get(&key) {
            return p.clone();
        }
        let period = 1.0 / freq;
        let n = self.policy.steps_for_period(period);
        let dt = period / n as f64;
        let base = &self.model.h0;
        let mut prefix = Vec::with_capacity(n + 1);
        prefix.push(Operator::identity(self.model.dim()));
        for k in 0..n {
            let u = step(&hamiltonian_at(base, &self.model, osc, (k as f64 + 0.5) * dt), dt);
            let next = u.matmul(&prefix[k]);
            prefix.push(next);
        }
        let data = Arc::new(PeriodData { prefix, dt, period });
        let mut cache = self.cache.lock().unwrap();
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, data.clone());
        data
    }

    /// Lab-frame `U(tau_end, 0)` for periodic drives.
    fn periodic_lab(&self, osc: &[DriveTerm], freq: f64, tau_end: f64) -> Operator {
        let data = self.period_data(osc, freq);
        let cycles = tau_end * freq;
        let mut n = (cycles + 1e-9).floor().max(0.0) as u64;
        let mut rem = tau_end - n as f64 * data.period;
        if rem < 0.0 {
            rem = 0.0;
        }
        if rem > data.period {
            n += 1;
            rem = 0.0;
        }
        let full = if n == 0 {
            Operator::identity(self.model.dim())
        } else if self.policy.strobe {
            unitary_power(&data.prefix[data.prefix.len() - 1], n)
        } else {
            let ut = &data.prefix[data.prefix.len() - 1];
            let mut acc = ut.clone();
            for _ in 1..n {
                acc = ut.matmul(&acc);
            }
            acc
        };
        let m = ((rem / data.dt) + 1e-9).floor() as usize;
        let m = m.min(data.prefix.len() - 1);
        let mut part = data.prefix[m].clone();
        let h = rem - m as f64 * data.dt;
        if h > 1e-12 * data.dt {
            let mid = m as f64 * data.dt + 0.5 * h;
            let u = step(&hamiltonian_at(&self.model.h0, &self.model, osc, mid), h);
            part = u.matmul(&part);
        }
        part.matmul(&full)
    }

    /// Lab-frame `U(tau_end, 0)` for drives of several frequencies.
    fn aperiodic_lab(&self, osc: &[DriveTerm], tau_end: f64) -> Operator {
        let fmax = osc.iter().map(|d| d.frequency.abs()).fold(0.0, f64::max);
        let dt_max = (1.0 / fmax / self.policy.steps_per_rf_period as f64).min(self.policy.max_step);
        let steps = (tau_end / dt_max).ceil().max(1.0) as usize;
        let dt = tau_end / steps as f64;
        let mut u = Operator::identity(self.model.dim());
        for k in 0..steps {
            let s = step(&hamiltonian_at(&self.model.h0, &self.model, osc, (k as f64 + 0.5) * dt), dt);
            u = s.matmul(&u);
        }
        u
    }

    /// Propagator of an `Evolve` segment truncated to its first `tau` µs.
    fn evolve_op(&self, drives: &[DriveTerm], start: f64, tau: f64, frame: Frame) -> Result<Operator, DynamicsError> {
        let (osc, stat): (Vec<DriveTerm>, Vec<DriveTerm>) = drives.iter().partition(|d| !d.is_static());
        if osc.is_empty() {
            return Ok(step(&self.static_base(frame, &stat), tau));
        }
        if !stat.is_empty() {
            return Err(DynamicsError::Unsupported("static and oscillating drives in one segment".into()));
        }
        if tau <= 0.0 {
            return Ok(Operator::identity(self.model.dim()));
        }
        let f0 = osc[0].frequency;
        let lab = if osc.iter().all(|d| d.frequency == f0) {
            self.periodic_lab(&osc, f0, tau)
        } else {
            self.aperiodic_lab(&osc, tau)
        };
        Ok(match frame {
            Frame::Lab => lab,
            Frame::Rotating { carrier_mhz } => {
                let r1 = self.model.frame_rotation(carrier_mhz, start);
                let r2 = self.model.frame_rotation(carrier_mhz, start + tau);
                r2.adjoint().matmul(&lab.matmul(&r1))
            }
        })
    }

    fn rotation_op(&self, angle: f64, phase: f64, selective: bool, t: f64, frame: Frame) -> Operator {
        let rot = self.model.rotation(angle, phase, selective);
        match frame {
            Frame::Rotating { .. } => rot,
            Frame::Lab => {
                let r = self.model.frame_rotation(self.model.params.esr_minus(), t);
                r.matmul(&rot).matmul(&r.adjoint())
            }
        }
    }

    /// Unitary of a segment. `Reset` and `Measure` are not unitary.
    pub fn segment_propagator(&self, seg: &Segment, frame: Frame) -> Result<Operator, DynamicsError> {
        self.partial(seg, seg.duration, frame)
    }

    fn partial(&self, seg: &Segment, tau: f64, frame: Frame) -> Result<Operator, DynamicsError> {
        match &seg.action {
            Action::Evolve { drives, .. } => self.evolve_op(drives, seg.start, tau, frame),
            Action::Rotation { angle, phase, selective, .. } => {
                Ok(self.rotation_op(*angle, *phase, *selective, seg.start, frame))
            }
            Action::Reset | Action::Measure => Err(DynamicsError::NotUnitary),
        }
    }

    fn apply(&self, seg: &Segment, state: &DensityState, frame: Frame) -> Result<DensityState, DynamicsError> {
        Ok(match seg.action {
            Action::Reset => laser_reset(&self.model, state),
            Action::Measure => state.clone(),
            _ => state.evolve(&self.segment_propagator(seg, frame)?),
        })
    }

    /// States at the requested times. Instantaneous actions at time `t` are
    /// applied before a sample taken at `t`.
    pub fn evolve(
        &self,
        schedule: &Schedule,
        initial: &DensityState,
        sample_times: &[f64],
    ) -> Result<Vec<DensityState>, DynamicsError> {
        self.check_dim(initial)?;
        let eps = 1e-12 * schedule.duration.max(1.0);
        for (i, &s) in sample_times.iter().enumerate() {
            if !(s >= -eps && s <= schedule.duration + eps) {
                return Err(DynamicsError::SampleOutOfSpan { t: s, end: schedule.duration });
            }
            if i > 0 && s < sample_times[i - 1] {
                return Err(DynamicsError::InvalidInput("sample times must be sorted".into()));
            }
        }
        let mut out = Vec::with_capacity(sample_times.len());
        let mut idx = 0;
        let mut state = initial.clone();
        for seg in &schedule.segments {
            while idx < sample_times.len() && sample_times[idx] < seg.start - eps {
                out.push(state.clone());
                idx += 1;
            }
            if seg.duration > 0.0 {
                while idx < sample_times.len() && sample_times[idx] < seg.end() - eps {
                    let tau = (sample_times[idx] - seg.start).max(0.0);
                    out.push(state.evolve(&self.partial(seg, tau, schedule.frame)?));
                    idx += 1;
                }
            }
            state = self.apply(seg, &state, schedule.frame)?;
        }
        while idx < sample_times.len() {
            out.push(state.clone());
            idx += 1;
        }
        Ok(out)
    }

    pub fn run(&self, schedule: &Schedule, initial: &DensityState) -> Result<RunOutput, DynamicsError> {
        self.check_dim(initial)?;
        let mut state = initial.clone();
        let mut measurements = Vec::new();
        for seg in &schedule.segments {
            state = self.apply(seg, &state, schedule.frame)?;
            if seg.action == Action::Measure {
                measurements.push((seg.start, measure_p0(&self.model, &state)));
            }
        }
        Ok(RunOutput { final_state: state, measurements })
    }

    fn check_dim(&self, s: &DensityState) -> Result<(), DynamicsError> {
        if s.dim() != self.model.dim() {
            return Err(DynamicsError::InvalidInput(format!(
                "state dimension {} does not match model dimension {}",
                s.dim(),
                self.model.dim()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::RfCalibration;
    use crate::dsl::{compile, parse, OperatorId, Source};
    use crate::dynamics::{initial_state, ModelKind};
    use crate::NVParams;

    fn prop(kind: ModelKind) -> Propagator {
        Propagator::new(SpinModel::new(kind, &NVParams::default()), StepPolicy::default()).unwrap()
    }

    fn rf_segment(freq: f64, amp: f64, dur: f64) -> Segment {
        Segment {
            start: 0.0,
            duration: dur,
            action: Action::Evolve {
                drives: vec![DriveTerm { op: OperatorId::ElectronSx, amplitude: amp, frequency: freq, phase: 0.0 }],
                source: Source::Rf { power_mw: 0.0, frequency_mhz: freq, b1_mt: 0.0 },
            },
        }
    }

    #[test]
    fn coarse_policy_is_refused() {
        let m = SpinModel::new(ModelKind::TwoLevel, &NVParams::default());
        let p = StepPolicy { steps_per_rf_period: 16, ..StepPolicy::default() };
        assert!(matches!(Propagator::new(m, p), Err(DynamicsError::PolicyTooCoarse { steps: 16, .. })));
    }

    #[test]
    fn free_evolution_is_diagonal() {
        let p = prop(ModelKind::Full9);
        let seg = Segment { start: 0.0, duration: 3.7, action: Action::Evolve { drives: vec![], source: Source::Free } };
        let u = p.segment_propagator(&seg, Frame::Lab).unwrap();
        assert!(u.is_diagonal(1e-14));
        let want = p.model().h0.exp_i_hermitian(std::f64::consts::TAU * 3.7);
        assert!((&u - &want).max_abs() < 1e-9);
    }

    #[test]
    fn resonant_pi_pulse_inverts() {
        let p = prop(ModelKind::ThreeLevel);
        let params = NVParams::default();
        let seq = parse("laser\nmw flip=pi phase=x rabi=12\nmeasure").unwrap();
        let cal = RfCalibration::new(80.0, 0.0).unwrap();
        let s = compile(&seq, Frame::probed(&params), &params, &cal).unwrap();
        let out = p.run(&s, &initial_state(p.model())).unwrap();
        assert!(out.measurements[0].1 <= 1e-4, "{:?}", out.measurements);
    }

    #[test]
    fn strobe_matches_direct_product() {
        let params = NVParams::default();
        let seg = rf_segment(6.0, 10.0, 100.0 / 6.0);
        let strobe = prop(ModelKind::ThreeLevel);
        let direct = Propagator::new(
            SpinModel::new(ModelKind::ThreeLevel, &params),
            StepPolicy { strobe: false, ..StepPolicy::default() },
        )
        .unwrap();
        let a = strobe.segment_propagator(&seg, Frame::probed(&params)).unwrap();
        let b = direct.segment_propagator(&seg, Frame::probed(&params)).unwrap();
        assert!((&a - &b).max_abs() <= 1e-8, "{}", (&a - &b).max_abs());
        assert!(a.unitarity_error() <= 1e-10);
    }

    #[test]
    fn remainder_matches_finer_stepping() {
        // 2.3 periods: strobe power plus a partial period vs. aperiodic stepping
        // the two grids differ, so the gap is discretisation error and must shrink as dt²
        let seg = rf_segment(6.0, 10.0, 2.3 / 6.0);
        let Action::Evolve { drives, .. } = &seg.action else { unreachable!() };
        let gap = |steps: usize| {
            let m = SpinModel::new(ModelKind::TwoLevel, &NVParams::default());
            let p = Propagator::new(m, StepPolicy { steps_per_rf_period: steps, ..StepPolicy::default() }).unwrap();
            let a = p.segment_propagator(&seg, Frame::Lab).unwrap();
            (&a - &p.aperiodic_lab(drives, seg.duration)).max_abs()
        };
        let (g1, g2) = (gap(256), gap(1024));
        assert!(g1 < 1e-4 && g2 < g1 / 8.0, "{g1} {g2}");
    }

    #[test]
    fn zero_gate_double_quarter_turn_inverts() {
        let p = prop(ModelKind::TwoLevel);
        let params = NVParams::default();
        let seq = parse("laser\nmw flip=pi/2 phase=x\nmw flip=pi/2 phase=x\nmeasure").unwrap();
        let cal = RfCalibration::new(80.0, 0.0).unwrap();
        let s = compile(&seq, Frame::probed(&params), &params, &cal).unwrap();
        let out = p.run(&s, &initial_state(p.model())).unwrap();
        assert!(out.measurements[0].1.abs() < 1e-6);
    }

    #[test]
    fn samples_and_reset() {
        let p = prop(ModelKind::Full9);
        let params = NVParams::default();
        let seq = parse("laser").unwrap();
        let cal = RfCalibration::new(80.0, 0.0).unwrap();
        let s = compile(&seq, Frame::probed(&params), &params, &cal).unwrap();
        let st = p.evolve(&s, &DensityState::maximally_mixed(9), &[0.0]).unwrap();
        assert!((measure_p0(p.model(), &st[0]) - 1.0).abs() < 1e-14);
        assert!(st[0].check().ok());
        assert!(matches!(p.evolve(&s, &st[0], &[1.0]), Err(DynamicsError::SampleOutOfSpan { .. })));
    }
}
