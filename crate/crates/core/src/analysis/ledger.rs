//! Signed bookkeeping of BS phase across DD refocusing pulses.
//!
//! Each π pulse inverts the sign with which subsequently accumulated phase
//! enters the final coherence, so RF windows of durations 1:2:1 around two DD
//! pulses cancel.

use std::f64::consts::TAU;

use serde::Serialize;
use thiserror::Error;

use crate::dsl::{Action, Schedule, Source};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LedgerError {
    #[error("RF intervals {0} and {1} overlap")]
    Overlap(usize, usize),
    #[error("RF interval {0} has end before start")]
    Reversed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RfInterval {
    /// µs.
    pub start: f64,
    /// µs.
    pub end: f64,
    /// Shift accumulated while the RF is on, kHz.
    pub omega_bs_khz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseLedger {
    pub dd_times: Vec<f64>,
    pub rf_intervals: Vec<RfInterval>,
    /// rad.
    pub net_phase: f64,
}

impl PhaseLedger {
    /// Net phase rate for a gate of length `t_us`, as the cosine frequency in kHz
    /// of `cos(net_phase)`.
    pub fn oscillation_khz(&self, t_us: f64) -> f64 {
        self.net_phase / (TAU * t_us * 1e-3)
    }
}

/// Sign of phase accumulated at time `t`: `(−1)^(number of DD pulses before t)`.
fn sign_at(dd: &[f64], t: f64) -> f64 {
    if dd.iter().filter(|&&d| d <= t).count() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn phase_ledger(dd_times: &[f64], rf_intervals: &[RfInterval]) -> Result<PhaseLedger, LedgerError> {
    for (i, iv) in rf_intervals.iter().enumerate() {
        if iv.end < iv.start {
            return Err(LedgerError::Reversed(i));
        }
        for (j, other) in rf_intervals[..i].iter().enumerate() {
            if iv.start < other.end && other.start < iv.end {
                return Err(LedgerError::Overlap(j, i));
            }
        }
    }
    let mut dd = dd_times.to_vec();
    dd.sort_by(f64::total_cmp);
    let mut net = 0.0;
    for iv in rf_intervals {
        // split at DD times falling inside the interval
        let mut cuts = vec![iv.start];
        cuts.extend(dd.iter().copied().filter(|&d| d > iv.start && d < iv.end));
        cuts.push(iv.end);
        for w in cuts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            net += sign_at(&dd, mid) * iv.omega_bs_khz * 1e-3 * (w[1] - w[0]);
        }
    }
    Ok(PhaseLedger { dd_times: dd, rf_intervals: rf_intervals.to_vec(), net_phase: TAU * net })
}

/// Ledger of a compiled schedule; `shift_khz` maps each RF source to its shift.
pub fn ledger_from_schedule(schedule: &Schedule, shift_khz: impl Fn(&Source) -> f64) -> Result<PhaseLedger, LedgerError> {
    let rf: Vec<RfInterval> = schedule
        .segments
        .iter()
        .filter_map(|s| match &s.action {
            Action::Evolve { source: src @ Source::Rf { .. }, .. } => {
                Some(RfInterval { start: s.start, end: s.end(), omega_bs_khz: shift_khz(src) })
            }
            _ => None,
        })
        .collect();
    phase_ledger(&schedule.dd_times(), &rf)
}
