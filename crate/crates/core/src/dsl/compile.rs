//! Compilation of a [`PulseSequence`] into piecewise-constant [`Schedule`] segments.
//!
//! In the rotating frame MW drives become static terms under the rotating-wave
//! approximation. RF drives always stay explicit cosines: their counter-rotating
//! content is what produces the Bloch–Siegert shift.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt;
use std::str::FromStr;

use super::sequence::{Channel, EventKind, PulseEvent, PulseSequence};
use super::DslError;
use crate::analysis::RfCalibration;
use crate::spin::NVParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Frame {
    Lab,
    /// Frame rotating at `carrier_mhz` on the m_S = −1 manifold.
    Rotating { carrier_mhz: f64 },
}

impl Frame {
    /// Rotating frame at the probed `|0,0⟩ ↔ |−1,0⟩` line.
    pub fn probed(params: &NVParams) -> Self {
        Frame::Rotating { carrier_mhz: params.esr_minus() }
    }
}

impl FromStr for Frame {
    type Err = DslError;

    /// `lab`, `rotating` (carrier 0 until resolved) or `rotating:<MHz>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "lab" => Ok(Frame::Lab),
            Some(("rotating", f)) => f
                .parse()
                .map(|carrier_mhz| Frame::Rotating { carrier_mhz })
                .map_err(|_| DslError::UnknownFrame(s.into())),
            _ => Err(DslError::UnknownFrame(s.into())),
        }
    }
}

/// Operators a drive term may act on; resolved per model by the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorId {
    ElectronSx,
    ElectronSz,
    NuclearIx,
    /// σx on every `|0, m_I⟩ ↔ |−1, m_I⟩` pair.
    MwX,
    /// σy on every `|0, m_I⟩ ↔ |−1, m_I⟩` pair.
    MwY,
}

/// `amplitude · cos(2π·frequency·τ + phase) · op`, `τ` measured from segment start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveTerm {
    pub op: OperatorId,
    /// MHz.
    pub amplitude: f64,
    /// MHz; zero for static terms.
    pub frequency: f64,
    pub phase: f64,
}

impl DriveTerm {
    pub fn is_static(&self) -> bool {
        self.frequency == 0.0
    }

    pub fn value(&self, tau: f64) -> f64 {
        if self.is_static() {
            self.amplitude * self.phase.cos()
        } else {
            self.amplitude * (TAU * self.frequency * tau + self.phase).cos()
        }
    }
}

/// What produced a segment, kept for phase bookkeeping and reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Source {
    Free,
    Laser,
    Mw,
    Dd,
    Rf { power_mw: f64, frequency_mhz: f64, b1_mt: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Evolve { drives: Vec<DriveTerm>, source: Source },
    Reset,
    /// Ideal rotation about the axis `cos(phase)·σx + sin(phase)·σy` of the
    /// 0 ↔ −1 transition.
    Rotation { angle: f64, phase: f64, selective: bool, source: Source },
    Measure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// µs.
    pub start: f64,
    /// µs; zero for instantaneous actions.
    pub duration: f64,
    pub action: Action,
}

impl Segment {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    pub fn is_rf(&self) -> bool {
        matches!(self.action, Action::Evolve { source: Source::Rf { .. }, .. })
    }

    pub fn is_dd(&self) -> bool {
        matches!(self.action, Action::Rotation { source: Source::Dd, .. })
            || matches!(self.action, Action::Evolve { source: Source::Dd, .. })
    }
}

fn axis_name(phase: f64) -> String {
    let k = phase.rem_euclid(TAU) / FRAC_PI_2;
    if (k - k.round()).abs() < 1e-12 {
        ["x", "y", "-x", "-y"][(k.round() as usize) % 4].to_string()
    } else {
        format!("{phase:.4}")
    }
}

fn angle_name(angle: f64) -> String {
    let r = angle / std::f64::consts::PI;
    if (r - 1.0).abs() < 1e-12 {
        "π".into()
    } else if (r - 0.5).abs() < 1e-12 {
        "π/2".into()
    } else {
        format!("{angle:.4}")
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.action {
            Action::Reset => write!(f, "Reset"),
            Action::Measure => write!(f, "Measure"),
            Action::Rotation { angle, phase, .. } => {
                write!(f, "Rot({},{})", angle_name(*angle), axis_name(*phase))
            }
            Action::Evolve { source: Source::Rf { .. }, .. } => write!(f, "RF({})", self.duration),
            Action::Evolve { source: Source::Mw | Source::Dd, drives } => {
                let (x, y) = drives.iter().fold((0.0, 0.0), |acc, d| match d.op {
                    OperatorId::MwX if d.is_static() => (acc.0 + d.amplitude, acc.1),
                    OperatorId::MwY if d.is_static() => (acc.0, acc.1 + d.amplitude),
                    _ => acc,
                });
                let phase = y.atan2(x);
                write!(f, "Pulse({},{})", self.duration, axis_name(phase))
            }
            Action::Evolve { .. } => write!(f, "Free({})", self.duration),
        }
    }
}

/// Compiled, frame-resolved timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub frame: Frame,
    pub segments: Vec<Segment>,
    /// µs.
    pub duration: f64,
}

impl Schedule {
    pub fn labels(&self) -> Vec<String> {
        self.segments.iter().map(|s| s.to_string()).collect()
    }

    /// Times of DD pulses (centre of finite ones).
    pub fn dd_times(&self) -> Vec<f64> {
        self.segments.iter().filter(|s| s.is_dd()).map(|s| s.start + s.duration / 2.0).collect()
    }
}

fn overlap_kind(a: &PulseEvent, b: &PulseEvent, eps: f64) -> bool {
    match (a.duration > 0.0, b.duration > 0.0) {
        (true, true) => a.start < b.end() - eps && b.start < a.end() - eps,
        (true, false) => b.start > a.start + eps && b.start < a.end() - eps,
        (false, true) => a.start > b.start + eps && a.start < b.end() - eps,
        (false, false) => false,
    }
}

fn check_overlaps(seq: &PulseSequence, eps: f64) -> Result<(), DslError> {
    for (j, b) in seq.events.iter().enumerate() {
        for (i, a) in seq.events[..j].iter().enumerate() {
            if !overlap_kind(a, b, eps) {
                continue;
            }
            let (ca, cb) = (a.kind.channel(), b.kind.channel());
            let rf_dd = |x: &PulseEvent, y: &PulseEvent| {
                x.kind == EventKind::Rf && y.kind == EventKind::Dd && y.duration == 0.0
            };
            if rf_dd(a, b) {
                return Err(DslError::RfOverlapsDd { rf: i, dd: j });
            }
            if rf_dd(b, a) {
                return Err(DslError::RfOverlapsDd { rf: j, dd: i });
            }
            if ca == cb && ca != Channel::None {
                return Err(DslError::ChannelOverlap { first: i, second: j, channel: ca });
            }
            return Err(DslError::TimelineOverlap { first: i, second: j });
        }
    }
    Ok(())
}

fn mw_drives(ev: &PulseEvent, idx: usize, frame: Frame, rabi: f64) -> Result<Vec<DriveTerm>, DslError> {
    let phase = ev.phase.unwrap_or(0.0);
    match frame {
        Frame::Rotating { carrier_mhz } => {
            if let Some(freq) = ev.frequency {
                if (freq - carrier_mhz).abs() > 1e-9 * carrier_mhz.abs().max(1.0) {
                    return Err(DslError::CarrierMismatch { event: idx, freq, carrier: carrier_mhz });
                }
            }
            let half = rabi / 2.0;
            Ok(vec![
                DriveTerm { op: OperatorId::MwX, amplitude: half * phase.cos(), frequency: 0.0, phase: 0.0 },
                DriveTerm { op: OperatorId::MwY, amplitude: half * phase.sin(), frequency: 0.0, phase: 0.0 },
            ])
        }
        Frame::Lab => {
            let freq = ev.frequency.ok_or(DslError::Validation {
                line: idx + 1,
                msg: "lab-frame MW pulses need freq=".into(),
            })?;
            // rabi·cos(2π f t − φ) with t global; the RWA limit is (rabi/2)(cos φ σx + sin φ σy)
            let cycles = freq * ev.start;
            let offset = TAU * (cycles - cycles.floor());
            Ok(vec![DriveTerm { op: OperatorId::MwX, amplitude: rabi, frequency: freq, phase: offset - phase }])
        }
    }
}

fn rf_drives(ev: &PulseEvent, params: &NVParams, rf: &RfCalibration) -> (Vec<DriveTerm>, Source) {
    let power = ev.power.unwrap_or(0.0);
    let freq = ev.frequency.unwrap_or(0.0);
    let phase = ev.phase.unwrap_or(0.0);
    let b1 = rf.b1(power);
    let sin = if params.rf_tilt == FRAC_PI_2 { 1.0 } else { params.rf_tilt.sin() };
    let cos = if params.rf_tilt == FRAC_PI_2 { 0.0 } else { params.rf_tilt.cos() };
    let ge = params.gamma_e.abs();
    let terms = [
        (OperatorId::ElectronSx, ge * b1 * sin),
        (OperatorId::ElectronSz, ge * b1 * cos),
        (OperatorId::NuclearIx, params.gamma_n * b1),
    ];
    let drives = terms
        .into_iter()
        .filter(|&(_, a)| a != 0.0)
        .map(|(op, amplitude)| DriveTerm { op, amplitude, frequency: freq, phase })
        .collect();
    (drives, Source::Rf { power_mw: power, frequency_mhz: freq, b1_mt: b1 })
}

/// Resolves the event list into frame-specific segments.
///
/// Laser → `Reset`, ideal MW/DD → `Rotation`, finite MW/DD → static drive
/// (rotating frame) or explicit cosine (lab frame), RF → explicit cosines on
/// `S_x`, `S_z` and the enhanced nuclear `I_x`, gaps and delays → free evolution.
pub fn compile(
    seq: &PulseSequence,
    frame: Frame,
    params: &NVParams,
    rf: &RfCalibration,
) -> Result<Schedule, DslError> {
    let total = seq.duration();
    let eps = 1e-12 * total.max(1.0);
    check_overlaps(seq, eps)?;
    let mut order: Vec<usize> = (0..seq.events.len()).collect();
    order.sort_by(|&i, &j| seq.events[i].start.partial_cmp(&seq.events[j].start).unwrap());

    let mut segments = Vec::new();
    let mut cursor = 0.0;
    let free = |segments: &mut Vec<Segment>, from: f64, to: f64| {
        if to - from > eps {
            segments.push(Segment {
                start: from,
                duration: to - from,
                action: Action::Evolve { drives: Vec::new(), source: Source::Free },
            });
        }
    };
    for &idx in &order {
        let ev = &seq.events[idx];
        free(&mut segments, cursor, ev.start);
        let start = ev.start;
        match ev.kind {
            EventKind::Laser => {
                segments.push(Segment { start, duration: 0.0, action: Action::Reset });
                free(&mut segments, start, ev.end());
            }
            EventKind::Measure => segments.push(Segment { start, duration: 0.0, action: Action::Measure }),
            EventKind::Delay => free(&mut segments, start, ev.end()),
            EventKind::Mw | EventKind::Dd => {
                let source = if ev.kind == EventKind::Mw { Source::Mw } else { Source::Dd };
                let angle = ev.flip.unwrap_or(std::f64::consts::PI);
                let phase = ev.phase.unwrap_or(0.0);
                match ev.rabi {
                    Some(rabi) if ev.duration > 0.0 => {
                        let drives = mw_drives(ev, idx, frame, rabi)?;
                        segments.push(Segment {
                            start,
                            duration: ev.duration,
                            action: Action::Evolve { drives, source },
                        });
                    }
                    _ => {
                        if let (Frame::Rotating { carrier_mhz }, Some(freq)) = (frame, ev.frequency) {
                            if (freq - carrier_mhz).abs() > 1e-9 * carrier_mhz.abs().max(1.0) {
                                return Err(DslError::CarrierMismatch { event: idx, freq, carrier: carrier_mhz });
                            }
                        }
                        segments.push(Segment {
                            start,
                            duration: 0.0,
                            action: Action::Rotation { angle, phase, selective: ev.selective, source },
                        });
                    }
                }
            }
            EventKind::Rf => {
                if ev.duration > eps {
                    let (drives, source) = rf_drives(ev, params, rf);
                    segments.push(Segment {
                        start,
                        duration: ev.duration,
                        action: Action::Evolve { drives, source },
                    });
                }
            }
        }
        cursor = cursor.max(ev.end());
    }
    Ok(Schedule { frame, segments, duration: total })
}
