//! Typed experiment settings with the reference values as defaults.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use super::config::{Config, ConfigError};
use super::templates;
use crate::analysis::calibrate_power;
use crate::dynamics::{ModelKind, StepPolicy};
use crate::spin::{fit_field_from_esr, transition_table, NVParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Spectrum,
    PowerSweep,
    FreqSweep,
    OnResonance,
    Compensation,
}

impl Scenario {
    pub const ALL: [Scenario; 5] =
        [Self::Spectrum, Self::PowerSweep, Self::FreqSweep, Self::OnResonance, Self::Compensation];

    pub fn name(self) -> &'static str {
        match self {
            Self::Spectrum => "spectrum",
            Self::PowerSweep => "power-sweep",
            Self::FreqSweep => "freq-sweep",
            Self::OnResonance => "on-resonance",
            Self::Compensation => "compensation",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            format!("unknown scenario `{s}` (expected spectrum, power-sweep, freq-sweep, on-resonance or compensation)")
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decoherence {
    pub t2_us: f64,
    pub k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Detection {
    /// Signal offset.
    pub a: f64,
    /// Signal contrast, `y = a + b·(2P0 − 1)`.
    pub b: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub params: NVParams,
    pub model: ModelKind,
    pub policy: StepPolicy,
    pub template_name: String,
    /// Sequence source with symbolic `t`.
    pub template: String,
    /// Power at which the calibration target applies, mW.
    pub p_ref_mw: f64,
    /// Shift produced at `p_ref_mw` and `calibration_freq_mhz`, kHz.
    pub target_shift_khz: f64,
    pub calibration_freq_mhz: f64,
    /// Transverse drive amplitude at `p_ref_mw`; overrides the target when set.
    pub omega1_mhz: Option<f64>,
    pub rf_freq_mhz: f64,
    pub power_mw: f64,
    pub powers_mw: Vec<f64>,
    pub frequencies_mhz: Vec<f64>,
    pub gate_times_us: Vec<f64>,
    pub decoherence: Decoherence,
    pub detection: Detection,
    pub nuclear_rabi_khz: f64,
    pub nuclear_drive: bool,
    pub measured_khz: f64,
    pub reference_khz: f64,
    pub window3: f64,
    pub perturbed_window3: Option<f64>,
    pub carrier_offset_mhz: f64,
    pub fid_dt_us: f64,
    pub fid_points: usize,
    pub zero_pad: usize,
    /// Re-run the reference point with halved steps before accepting results.
    pub convergence_check: bool,
}

/// `start, start + step, …` up to `stop` inclusive.
pub fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}

/// `points` values evenly spaced over `[start, stop]`.
pub fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![start];
    }
    (0..points).map(|i| start + (stop - start) * i as f64 / (points - 1) as f64).collect()
}

impl ExperimentConfig {
    /// Settings reproducing the reference measurements.
    pub fn reference(scenario: Scenario) -> Self {
        let params = NVParams::default();
        let base = Self {
            scenario,
            params,
            model: ModelKind::TwoLevel,
            policy: StepPolicy::default(),
            template_name: "quantify".into(),
            template: templates::QUANTIFY.into(),
            p_ref_mw: 80.0,
            target_shift_khz: 21.72,
            calibration_freq_mhz: 6.0,
            omega1_mhz: None,
            rf_freq_mhz: 6.0,
            power_mw: 80.0,
            powers_mw: vec![80.0, 40.0, 20.0, 0.0],
            frequencies_mhz: vec![6.5, 7.0, 7.5],
            gate_times_us: grid(0.0, 800.0, 10.0),
            decoherence: Decoherence { t2_us: 1300.0, k: 1.2 },
            detection: Detection { a: 0.5, b: 0.5, noise_sigma: 0.01, seed: 1 },
            nuclear_rabi_khz: 10.7,
            nuclear_drive: true,
            measured_khz: 27.09,
            reference_khz: 20.90,
            window3: 1.0,
            perturbed_window3: Some(1.1),
            carrier_offset_mhz: 5.0,
            fid_dt_us: 0.02,
            fid_points: 512,
            zero_pad: 16,
            convergence_check: true,
        };
        match scenario {
            Scenario::PowerSweep | Scenario::FreqSweep => base,
            Scenario::Spectrum => Self {
                model: ModelKind::Full9,
                template_name: "ramsey".into(),
                template: templates::RAMSEY.into(),
                detection: Detection { noise_sigma: 0.0, ..base.detection },
                ..base
            },
            Scenario::OnResonance => {
                let nu1n = transition_table(&params).by_label("nu1n").map(|l| l.frequency_mhz).unwrap_or(4.99);
                let power = calibrate_power(27.09, 20.90, 80.0).map(|c| c.power_mw).unwrap_or(80.0);
                Self {
                    model: ModelKind::Full9,
                    rf_freq_mhz: nu1n,
                    power_mw: power,
                    target_shift_khz: 20.90,
                    calibration_freq_mhz: 7.5,
                    ..base
                }
            }
            Scenario::Compensation => Self {
                template_name: "compensate".into(),
                template: templates::COMPENSATE.into(),
                gate_times_us: linspace(0.0, 5000.0, 201),
                ..base
            },
        }
    }

    /// Reference defaults overridden by `cfg`. `base_dir` resolves relative
    /// sequence-file paths.
    pub fn from_config(cfg: &Config, scenario: Scenario, base_dir: Option<&Path>) -> Result<Self, ConfigError> {
        let mut c = Self::reference(scenario);
        let other = |msg: String| ConfigError::Other(msg);

        c.params = params_from_config(cfg)?;

        cfg.check_keys("rf", &["p_ref", "target_shift_khz", "calibration_frequency", "omega1"])?;
        c.p_ref_mw = cfg.number_or("rf", "p_ref", c.p_ref_mw)?;
        c.omega1_mhz = cfg.number("rf", "omega1")?.or(c.omega1_mhz);

        cfg.check_keys("decoherence", &["t2", "k"])?;
        c.decoherence.t2_us = cfg.number_or("decoherence", "t2", c.decoherence.t2_us)?;
        c.decoherence.k = cfg.number_or("decoherence", "k", c.decoherence.k)?;

        cfg.check_keys("detection", &["a", "b", "noise", "seed"])?;
        c.detection.a = cfg.number_or("detection", "a", c.detection.a)?;
        c.detection.b = cfg.number_or("detection", "b", c.detection.b)?;
        c.detection.noise_sigma = cfg.number_or("detection", "noise", c.detection.noise_sigma)?;
        if let Some(s) = cfg.number("detection", "seed")? {
            c.detection.seed = as_count(s, "[detection] seed")? as u64;
        }

        cfg.check_keys("simulation", &["model", "steps_per_rf_period", "max_step", "strobe", "convergence_check"])?;
        let mut model_override = cfg.string("simulation", "model").map(|s| s.to_string());
        if let Some(n) = cfg.number("simulation", "steps_per_rf_period")? {
            c.policy.steps_per_rf_period = as_count(n, "[simulation] steps_per_rf_period")?;
        }
        c.policy.max_step = cfg.number_or("simulation", "max_step", c.policy.max_step)?;
        c.policy.strobe = cfg.boolean("simulation", "strobe")?.unwrap_or(c.policy.strobe);
        c.convergence_check = cfg.boolean("simulation", "convergence_check")?.unwrap_or(c.convergence_check);

        let s = scenario.name();
        cfg.check_keys(
            s,
            &[
                "model", "template", "sequence_file", "frequency", "power", "powers", "frequencies", "t_start",
                "t_stop", "t_step", "points", "target_shift_khz", "calibration_frequency", "nuclear_rabi_khz",
                "nuclear_drive", "measured_khz", "reference_khz", "window3", "perturbed_window3", "offset", "dt",
                "zero_pad", "noise", "t2", "k",
            ],
        )?;
        if let Some(m) = cfg.string(s, "model") {
            model_override = Some(m.to_string());
        }
        if let Some(m) = model_override {
            c.model = m.parse().map_err(other)?;
        }
        // calibration target: scenario section wins over [rf]
        c.target_shift_khz = cfg.number_or("rf", "target_shift_khz", c.target_shift_khz)?;
        c.target_shift_khz = cfg.number_or(s, "target_shift_khz", c.target_shift_khz)?;
        c.calibration_freq_mhz = cfg.number_or("rf", "calibration_frequency", c.calibration_freq_mhz)?;
        c.calibration_freq_mhz = cfg.number_or(s, "calibration_frequency", c.calibration_freq_mhz)?;

        if let Some(name) = cfg.string(s, "template") {
            c.template = templates::by_name(name).ok_or_else(|| other(format!("unknown template `{name}`")))?.into();
            c.template_name = name.into();
        }
        if let Some(path) = cfg.string(s, "sequence_file") {
            let full = match base_dir {
                Some(d) => d.join(path),
                None => Path::new(path).to_path_buf(),
            };
            c.template = std::fs::read_to_string(&full)
                .map_err(|e| other(format!("cannot read sequence file {}: {e}", full.display())))?;
            c.template_name = path.into();
        }
        c.rf_freq_mhz = cfg.number_or(s, "frequency", c.rf_freq_mhz)?;
        c.power_mw = cfg.number_or(s, "power", c.power_mw)?;
        c.powers_mw = cfg.list(s, "powers")?.unwrap_or(c.powers_mw);
        c.frequencies_mhz = cfg.list(s, "frequencies")?.unwrap_or(c.frequencies_mhz);
        let t_start = cfg.number(s, "t_start")?;
        let t_stop = cfg.number(s, "t_stop")?;
        let t_step = cfg.number(s, "t_step")?;
        let points = cfg.number(s, "points")?;
        // spectrum `points` is the FID length, not a gate grid
        let grid_points = if scenario == Scenario::Spectrum { None } else { points };
        if t_start.is_some() || t_stop.is_some() || t_step.is_some() || grid_points.is_some() {
            let first = c.gate_times_us.first().copied().unwrap_or(0.0);
            let last = c.gate_times_us.last().copied().unwrap_or(0.0);
            let (a, b) = (t_start.unwrap_or(first), t_stop.unwrap_or(last));
            c.gate_times_us = match (t_step, grid_points) {
                (Some(_), Some(_)) => return Err(other(format!("[{s}] give t_step or points, not both"))),
                (Some(st), None) if st > 0.0 => grid(a, b, st),
                (Some(st), None) => return Err(other(format!("[{s}] t_step must be positive, got {st}"))),
                (None, Some(n)) => linspace(a, b, as_count(n, "points")?),
                (None, None) => {
                    let n = c.gate_times_us.len().max(2);
                    linspace(a, b, n)
                }
            };
        }
        c.decoherence.t2_us = cfg.number_or(s, "t2", c.decoherence.t2_us)?;
        c.decoherence.k = cfg.number_or(s, "k", c.decoherence.k)?;
        c.detection.noise_sigma = cfg.number_or(s, "noise", c.detection.noise_sigma)?;
        c.nuclear_rabi_khz = cfg.number_or(s, "nuclear_rabi_khz", c.nuclear_rabi_khz)?;
        c.nuclear_drive = cfg.boolean(s, "nuclear_drive")?.unwrap_or(c.nuclear_drive);
        c.measured_khz = cfg.number_or(s, "measured_khz", c.measured_khz)?;
        c.reference_khz = cfg.number_or(s, "reference_khz", c.reference_khz)?;
        c.window3 = cfg.number_or(s, "window3", c.window3)?;
        if let Some(w) = cfg.number(s, "perturbed_window3")? {
            c.perturbed_window3 = (w > 0.0).then_some(w);
        }
        c.carrier_offset_mhz = cfg.number_or(s, "offset", c.carrier_offset_mhz)?;
        c.fid_dt_us = cfg.number_or(s, "dt", c.fid_dt_us)?;
        if scenario == Scenario::Spectrum {
            if let Some(n) = points {
                c.fid_points = as_count(n, "points")?;
            }
        }
        if let Some(z) = cfg.number(s, "zero_pad")? {
            c.zero_pad = as_count(z, "zero_pad")?;
        }
        c.validate().map_err(other)?;
        Ok(c)
    }

    /// Checks everything except the step policy, which the runners reject
    /// as a refusal rather than a configuration error.
    pub fn validate(&self) -> Result<(), String> {
        self.params.validate().map_err(|e| e.to_string())?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be positive, got {v}"))
            }
        };
        positive("t2", self.decoherence.t2_us)?;
        positive("k", self.decoherence.k)?;
        positive("p_ref", self.p_ref_mw)?;
        positive("rf frequency", self.rf_freq_mhz)?;
        positive("calibration frequency", self.calibration_freq_mhz)?;
        if !(self.detection.noise_sigma >= 0.0) {
            return Err(format!("noise must be non-negative, got {}", self.detection.noise_sigma));
        }
        if self.omega1_mhz.is_none() && !(self.target_shift_khz >= 0.0) {
            return Err("target_shift_khz must be non-negative".into());
        }
        if self.power_mw < 0.0 || self.powers_mw.iter().any(|&p| p < 0.0) {
            return Err("powers must be non-negative".into());
        }
        let needs_grid = match self.scenario {
            Scenario::Spectrum => self.fid_points == 0,
            Scenario::PowerSweep => self.powers_mw.is_empty() || self.gate_times_us.is_empty(),
            Scenario::FreqSweep => self.frequencies_mhz.is_empty() || self.gate_times_us.is_empty(),
            _ => self.gate_times_us.is_empty(),
        };
        if needs_grid {
            return Err(format!("{}: sweep grid is empty", self.scenario));
        }
        if self.frequencies_mhz.iter().any(|&f| !(f > 0.0)) {
            return Err("frequencies must be positive".into());
        }
        if self.gate_times_us.iter().any(|&t| t < 0.0) || self.gate_times_us.windows(2).any(|w| w[1] <= w[0]) {
            return Err("gate times must be non-negative and increasing".into());
        }
        if self.scenario == Scenario::Spectrum && !(self.fid_dt_us > 0.0) {
            return Err("spectrum dt must be positive".into());
        }
        if self.zero_pad == 0 {
            return Err("zero_pad must be at least 1".into());
        }
        Ok(())
    }
}

/// Spin-system constants from `[system]`. Without `b` or `esr` the field is
/// fitted to the reference ESR line.
pub fn params_from_config(cfg: &Config) -> Result<NVParams, ConfigError> {
    let other = |msg: String| ConfigError::Other(msg);
    cfg.check_keys("system", &["d", "p", "a", "gamma_e", "gamma_n", "b", "esr", "rf_tilt", "enh"])?;
    let mut params = NVParams::default();
    let p = &mut params;
    p.d = cfg.number_or("system", "d", p.d)?;
    p.p = cfg.number_or("system", "p", p.p)?;
    p.a = cfg.number_or("system", "a", p.a)?;
    p.gamma_e = cfg.number_or("system", "gamma_e", p.gamma_e)?;
    p.gamma_n = cfg.number_or("system", "gamma_n", p.gamma_n)?;
    p.rf_tilt = cfg.number_or("system", "rf_tilt", p.rf_tilt)?;
    if let Some(e) = cfg.list("system", "enh")? {
        match e.as_slice() {
            [x] => p.enh = [*x; 4],
            [a, b, cc, d] => p.enh = [*a, *b, *cc, *d],
            _ => return Err(other("[system] enh needs 1 or 4 values".into())),
        }
    }
    match (cfg.number("system", "b")?, cfg.number("system", "esr")?) {
        (Some(_), Some(_)) => return Err(other("[system] give either b or esr, not both".into())),
        (Some(b), None) => p.b = b,
        (None, Some(nu)) => p.b = fit_field_from_esr(nu, p).map_err(|e| other(format!("[system] esr: {e}")))?,
        (None, None) => {
            p.b = fit_field_from_esr(crate::spin::REFERENCE_ESR_MHZ, p).map_err(|e| other(format!("[system]: {e}")))?
        }
    }
    p.validate().map_err(|e| other(format!("[system]: {e}")))?;
    Ok(params)
}

fn as_count(v: f64, what: &str) -> Result<usize, ConfigError> {
    if v >= 0.0 && v.fract() == 0.0 && v < 1e12 {
        Ok(v as usize)
    } else {
        Err(ConfigError::Other(format!("{what} must be a non-negative integer, got {v}")))
    }
}
