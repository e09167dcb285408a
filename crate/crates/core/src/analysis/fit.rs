//! Decay, BS-oscillation and linear fits.
//!
//! Decay: `a + b·exp(−(t/T2)^k)`. Oscillation: `a + b·cos(2π·(ω_BS/2)·t)·exp(−t/T2)`
//! with ω_BS in kHz and t in µs; the reported ω_BS is the full shift.

use std::f64::consts::PI;

use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Serialize, Serializer};
use thiserror::Error;

use super::lm::{inverse_spd, levenberg_marquardt, LmOptions, LmOutcome, LmProblem};
use super::series::{SeriesError, TimeSeries};
use super::spectrum::{fft_spectrum, find_peaks};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("fit needs at least {need} points (got {got})")]
    TooFewPoints { need: usize, got: usize },
    #[error("x values have zero variance")]
    ZeroVariance,
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    Decay,
    BsOscillation,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFlag {
    IllConditioned,
    NoPeak,
    FallbackDecay,
    NotConverged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitParam {
    /// Carries the unit, e.g. `t2_us`.
    pub name: &'static str,
    pub value: f64,
    /// NaN when not identifiable.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: FitModel,
    pub params: Vec<FitParam>,
    pub residual_rms: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub r_squared: Option<f64>,
    pub flags: Vec<FitFlag>,
}

impl FitResult {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|p| p.name == name).map(|p| p.value)
    }

    pub fn stderr(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|p| p.name == name).map(|p| p.stderr)
    }

    pub fn has_flag(&self, f: FitFlag) -> bool {
        self.flags.contains(&f)
    }

    pub fn omega_bs_khz(&self) -> Option<f64> {
        self.value("omega_bs_khz")
    }

    pub fn t2_us(&self) -> Option<f64> {
        self.value("t2_us")
    }
}

struct ParamMap<'a>(&'a [FitParam]);

impl Serialize for ParamMap<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len() * 2))?;
        for p in self.0 {
            m.serialize_entry(p.name, &finite(p.value))?;
            m.serialize_entry(&format!("{}_stderr", p.name), &finite(p.stderr))?;
        }
        m.end()
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl Serialize for FitResult {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("FitResult", 8)?;
        st.serialize_field("model", &self.model)?;
        st.serialize_field("params", &ParamMap(&self.params))?;
        st.serialize_field("residual_rms", &finite(self.residual_rms))?;
        st.serialize_field("converged", &self.converged)?;
        st.serialize_field("iterations", &self.iterations)?;
        st.serialize_field("gradient_norm", &finite(self.gradient_norm))?;
        st.serialize_field("r_squared", &self.r_squared.and_then(finite))?;
        st.serialize_field("flags", &self.flags)?;
        st.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayGuess {
    pub a: f64,
    pub b: f64,
    pub t2_us: f64,
    pub k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationGuess {
    pub a: f64,
    pub b: f64,
    pub omega_bs_khz: f64,
    pub t2_us: f64,
}

/// `p = [a, b, T2, k]`.
pub fn decay_model(t: f64, p: &[f64]) -> f64 {
    p[0] + p[1] * (-(t / p[2]).powf(p[3])).exp()
}

pub fn decay_jacobian(t: f64, p: &[f64]) -> [f64; 4] {
    let (b, t2, k) = (p[1], p[2], p[3]);
    if t == 0.0 {
        return [1.0, 1.0, 0.0, 0.0];
    }
    let x = t / t2;
    let u = x.powf(k);
    let e = (-u).exp();
    [1.0, e, b * e * u * k / t2, -b * e * u * x.ln()]
}

/// `p = [a, b, ω_BS (kHz), T2]`.
pub fn oscillation_model(t: f64, p: &[f64]) -> f64 {
    p[0] + p[1] * (PI * p[2] * 1e-3 * t).cos() * (-t / p[3]).exp()
}

pub fn oscillation_jacobian(t: f64, p: &[f64]) -> [f64; 4] {
    let (b, w, t2) = (p[1], p[2], p[3]);
    let th = PI * w * 1e-3 * t;
    let e = (-t / t2).exp();
    let (s, c) = th.sin_cos();
    [1.0, c * e, -b * s * PI * 1e-3 * t * e, b * c * e * t / (t2 * t2)]
}

type Model = fn(f64, &[f64]) -> f64;
type Jac = fn(f64, &[f64]) -> [f64; 4];

struct Curve<'a> {
    t: &'a [f64],
    y: &'a [f64],
    f: Model,
    jac: Jac,
    kind: FitModel,
    t2_floor: f64,
}

impl LmProblem for Curve<'_> {
    fn n_params(&self) -> usize {
        4
    }
    fn n_residuals(&self) -> usize {
        self.t.len()
    }
    fn residuals(&self, p: &[f64], r: &mut [f64]) {
        for i in 0..self.t.len() {
            r[i] = (self.f)(self.t[i], p) - self.y[i];
        }
    }
    fn jacobian(&self, p: &[f64], j: &mut [f64]) {
        for i in 0..self.t.len() {
            j[i * 4..i * 4 + 4].copy_from_slice(&(self.jac)(self.t[i], p));
        }
    }
    fn project(&self, p: &mut [f64]) {
        match self.kind {
            FitModel::Decay => {
                p[2] = p[2].max(self.t2_floor);
                p[3] = p[3].clamp(1e-3, 4.0);
            }
            _ => {
                p[2] = p[2].abs();
                p[3] = p[3].max(self.t2_floor);
            }
        }
    }
}

const DECAY_NAMES: [&str; 4] = ["a", "b", "t2_us", "k"];
const OSC_NAMES: [&str; 4] = ["a", "b", "omega_bs_khz", "t2_us"];

fn finish(kind: FitModel, names: [&'static str; 4], out: &LmOutcome, m: usize) -> FitResult {
    let n = 4;
    let dof = m.saturating_sub(n).max(1) as f64;
    let s2 = 2.0 * out.cost / dof;
    let mut flags = Vec::new();
    let stderr: Vec<f64> = match inverse_spd(&out.jtj, n) {
        Some((inv, rcond)) if rcond > 1e-14 => (0..n).map(|i| (inv[i * n + i].max(0.0) * s2).sqrt()).collect(),
        _ => {
            flags.push(FitFlag::IllConditioned);
            vec![f64::NAN; n]
        }
    };
    if !out.converged {
        flags.push(FitFlag::NotConverged);
    }
    FitResult {
        model: kind,
        params: (0..n).map(|i| FitParam { name: names[i], value: out.params[i], stderr: stderr[i] }).collect(),
        residual_rms: (2.0 * out.cost / m as f64).sqrt(),
        converged: out.converged,
        iterations: out.iterations,
        gradient_norm: out.gradient_norm,
        r_squared: None,
        flags,
    }
}

fn best_of(curve: &Curve, starts: &[[f64; 4]]) -> LmOutcome {
    let opts = LmOptions::default();
    let mut best: Option<LmOutcome> = None;
    for s in starts {
        let out = levenberg_marquardt(curve, s, &opts);
        let better = match &best {
            None => true,
            Some(b) => (out.converged && !b.converged) || (out.converged == b.converged && out.cost < b.cost),
        };
        if better {
            best = Some(out);
        }
    }
    best.expect("at least one start")
}

fn span(t: &[f64]) -> f64 {
    t[t.len() - 1] - t[0]
}

fn degenerate(y: &[f64]) -> bool {
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    hi - lo <= 1e-12 * mean.abs().max(1.0)
}

fn constant_result(series: &TimeSeries) -> FitResult {
    let a = series.mean();
    let names = DECAY_NAMES;
    let values = [a, 0.0, span(&series.t), 1.0];
    let se_a = 0.0;
    FitResult {
        model: FitModel::Decay,
        params: (0..4)
            .map(|i| FitParam { name: names[i], value: values[i], stderr: if i == 0 { se_a } else { f64::NAN } })
            .collect(),
        residual_rms: 0.0,
        converged: true,
        iterations: 0,
        gradient_norm: 0.0,
        r_squared: None,
        flags: vec![FitFlag::IllConditioned],
    }
}

/// Stretched-exponential decay fit. Without a guess, several starting points
/// derived from the data are tried and the lowest cost wins.
pub fn fit_decay(series: &TimeSeries, guess: Option<DecayGuess>) -> Result<FitResult, FitError> {
    let (t, y) = (&series.t, &series.y);
    if t.len() < 6 {
        return Err(FitError::TooFewPoints { need: 6, got: t.len() });
    }
    if degenerate(y) {
        return Ok(constant_result(series));
    }
    let sp = span(t).max(f64::MIN_POSITIVE);
    let curve = Curve { t, y, f: decay_model, jac: decay_jacobian, kind: FitModel::Decay, t2_floor: 1e-9 * sp };
    let starts: Vec<[f64; 4]> = match guess {
        Some(g) => vec![[g.a, g.b, g.t2_us, g.k]],
        None => {
            let a0 = y[y.len() - 1];
            let b0 = y[0] - a0;
            let target = b0.abs() / std::f64::consts::E;
            let cross = t.iter().zip(y).find(|(_, &v)| (v - a0).abs() <= target).map(|(&ti, _)| ti - t[0]);
            let t2 = cross.filter(|&c| c > 0.0).unwrap_or(sp);
            let mut s = Vec::new();
            for t2c in [t2, sp / 3.0, sp, 3.0 * sp] {
                for k in [1.0, 2.0] {
                    s.push([a0, b0, t2c, k]);
                }
            }
            s
        }
    };
    let out = best_of(&curve, &starts);
    Ok(finish(FitModel::Decay, DECAY_NAMES, &out, t.len()))
}

fn detrended(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len() as f64;
    let (mt, my) = (t.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = t.iter().map(|v| (v - mt).powi(2)).sum();
    let sxy: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    t.iter().zip(y).map(|(a, b)| b - my - slope * (a - mt)).collect()
}

/// Dominant cosine frequency (MHz for t in µs) of the detrended signal.
fn dominant_frequency(t: &[f64], y: &[f64]) -> Option<f64> {
    let r = detrended(t, y);
    let sp = span(t);
    let pad = 16;
    let (freqs, mags): (Vec<f64>, Vec<f64>) = match TimeSeries::unchecked(t.to_vec(), r.clone())
        .ok()
        .and_then(|s| fft_spectrum(&s, pad).ok())
    {
        Some(spec) => {
            let peaks = find_peaks(&spec, 0.0);
            return peaks
                .into_iter()
                .filter(|p| p.freq_mhz * sp >= 0.5)
                .max_by(|a, b| a.magnitude.total_cmp(&b.magnitude))
                .map(|p| p.freq_mhz);
        }
        None => {
            // non-uniform grid: direct transform on the padded axis
            let n = t.len();
            let df = 1.0 / (pad as f64 * sp);
            let dt_mean = sp / (n - 1) as f64;
            let kmax = (0.5 / dt_mean / df) as usize;
            (0..=kmax)
                .map(|k| {
                    let f = k as f64 * df;
                    let (re, im) = t.iter().zip(&r).fold((0.0, 0.0), |(a, b), (&ti, &v)| {
                        let ph = 2.0 * PI * f * ti;
                        (a + v * ph.cos(), b - v * ph.sin())
                    });
                    (f, (re * re + im * im).sqrt())
                })
                .unzip()
        }
    };
    (1..mags.len() - 1)
        .filter(|&k| mags[k] > mags[k - 1] && mags[k] >= mags[k + 1] && freqs[k] * sp >= 0.5)
        .max_by(|&a, &b| mags[a].total_cmp(&mags[b]))
        .map(|k| freqs[k])
}

/// Decaying-cosine fit reporting the full shift ω_BS = 2 × cosine frequency.
///
/// When there is no resolvable spectral peak (`NoPeak`), or a stretched decay
/// fits at least as well as the cosine, the result carries `FallbackDecay`,
/// ω_BS = 0 and the decay parameters (including `k`).
pub fn fit_bs_oscillation(series: &TimeSeries, guess: Option<OscillationGuess>) -> Result<FitResult, FitError> {
    let (t, y) = (&series.t, &series.y);
    if t.len() < 10 {
        return Err(FitError::TooFewPoints { need: 10, got: t.len() });
    }
    let sp = span(t).max(f64::MIN_POSITIVE);
    let starts: Vec<[f64; 4]> = match guess {
        Some(g) => vec![[g.a, g.b, g.omega_bs_khz, g.t2_us]],
        None => {
            let f = if degenerate(y) { None } else { dominant_frequency(t, y) };
            let Some(f) = f else {
                return Ok(fallback(fit_decay(series, None)?, true));
            };
            let w0 = 2.0 * f * 1e3;
            let a0 = series.mean();
            let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
            let amp = 0.5 * (hi - lo);
            let r = detrended(t, y);
            let third = (t.len() / 3).max(1);
            let rms = |s: &[f64]| (s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64).sqrt();
            let (first, last) = (rms(&r[..third]), rms(&r[r.len() - third..]));
            let gap = t[t.len() - 1 - third / 2] - t[third / 2];
            let t2 = if first > last * 1.01 && last > 0.0 { gap / (first / last).ln() } else { 10.0 * sp };
            let sign = if y[0] >= a0 { 1.0 } else { -1.0 };
            let mut s = Vec::new();
            for t2c in [t2, 3.0 * t2] {
                for sg in [sign, -sign] {
                    s.push([a0, sg * amp, w0, t2c]);
                }
            }
            s
        }
    };
    let curve = Curve {
        t,
        y,
        f: oscillation_model,
        jac: oscillation_jacobian,
        kind: FitModel::BsOscillation,
        t2_floor: 1e-9 * sp,
    };
    let out = best_of(&curve, &starts);
    let osc = finish(FitModel::BsOscillation, OSC_NAMES, &out, t.len());
    if guess.is_none() {
        // a pure decay explains the data at least as well: no oscillation present
        let d = fit_decay(series, None)?;
        if d.residual_rms <= osc.residual_rms * (1.0 + 1e-9) + 1e-15 {
            return Ok(fallback(d, false));
        }
    }
    Ok(osc)
}

fn fallback(d: FitResult, no_peak: bool) -> FitResult {
    let get = |n: &str| (d.value(n).unwrap(), d.stderr(n).unwrap());
    let mut params = vec![];
    for (name, (v, s)) in [("a", get("a")), ("b", get("b"))] {
        params.push(FitParam { name, value: v, stderr: s });
    }
    params.push(FitParam { name: "omega_bs_khz", value: 0.0, stderr: f64::NAN });
    let (v, s) = get("t2_us");
    params.push(FitParam { name: "t2_us", value: v, stderr: s });
    let (v, s) = get("k");
    params.push(FitParam { name: "k", value: v, stderr: s });
    let mut flags = if no_peak { vec![FitFlag::NoPeak] } else { Vec::new() };
    flags.push(FitFlag::FallbackDecay);
    flags.extend(d.flags.iter().copied());
    FitResult { model: FitModel::BsOscillation, params, flags, ..d }
}

/// Ordinary least squares of shift (kHz) against power (mW).
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<FitResult, FitError> {
    if x.len() != y.len() {
        return Err(SeriesError::LengthMismatch { t: x.len(), y: y.len() }.into());
    }
    let n = x.len();
    if n < 2 {
        return Err(FitError::TooFewPoints { need: 2, got: n });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(FitError::ZeroVariance);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let (se_slope, se_int) = if n > 2 {
        let s2 = sse / (nf - 2.0);
        ((s2 / sxx).sqrt(), (s2 * (1.0 / nf + mx * mx / sxx)).sqrt())
    } else {
        (0.0, 0.0)
    };
    Ok(FitResult {
        model: FitModel::Linear,
        params: vec![
            FitParam { name: "slope_khz_per_mw", value: slope, stderr: se_slope },
            FitParam { name: "intercept_khz", value: intercept, stderr: se_int },
        ],
        residual_rms: (sse / nf).sqrt(),
        converged: true,
        iterations: 0,
        gradient_norm: 0.0,
        r_squared: Some(r2),
        flags: Vec::new(),
    })
}
