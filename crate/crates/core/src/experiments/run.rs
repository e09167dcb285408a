//! Scenario runners: simulate, apply envelope and noise, fit, reduce.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::report::{
    peak_fwhm, CalibrationRecord, ConvergenceEvidence, ExperimentReport, PeakRow, PointReport, SpectrumReport,
};
use super::scenario::{ExperimentConfig, Scenario};
use super::ExperimentError;
use crate::analysis::{
    bs_shift_analytic, fft_spectrum_windowed, find_peaks, fit_bs_oscillation, fit_decay, ledger_from_schedule,
    linear_fit, omega1_for_shift, RfCalibration, SeriesMeta, TimeSeries, Window,
};
use crate::dsl::{compile, Frame, Schedule, SequenceParser, Source};
use crate::dynamics::{
    floquet_shift_multilevel, initial_state, DynamicsError, ModelKind, MultilevelOptions, Propagator, SpinModel,
    StepPolicy,
};
use crate::spin::{transition_table, NVParams, TransitionKind};

/// Largest accepted change of a simulated `P0` when every step is halved.
pub const CONVERGENCE_THRESHOLD: f64 = 1e-3;

/// Electron drive amplitude (MHz) at which `model` shifts the probed line by
/// `target_khz` for an RF field at `freq_mhz`.
pub fn calibrate_omega1(
    model: ModelKind,
    params: &NVParams,
    target_khz: f64,
    freq_mhz: f64,
    policy: &StepPolicy,
) -> Result<f64, ExperimentError> {
    let omega0 = params.esr_minus();
    let mut w = omega1_for_shift(target_khz, omega0).map_err(|e| ExperimentError::Config(e.to_string()))?;
    if model == ModelKind::TwoLevel || w == 0.0 {
        return Ok(w);
    }
    // the multilevel correction is nearly amplitude independent: a few
    // fixed-point rounds on the ratio converge to well below 1e-6
    for _ in 0..3 {
        let s = model_shift(model, params, w, freq_mhz, policy)?;
        if !(s > 0.0) {
            return Err(ExperimentError::Config(format!("model shift at {w} MHz drive is not positive")));
        }
        w *= (target_khz / s).sqrt();
    }
    Ok(w)
}

/// Shift of the probed line predicted by `model` at drive `omega1`.
pub fn model_shift(
    model: ModelKind,
    params: &NVParams,
    omega1: f64,
    freq_mhz: f64,
    policy: &StepPolicy,
) -> Result<f64, ExperimentError> {
    let omega0 = params.esr_minus();
    match model {
        ModelKind::TwoLevel => bs_shift_analytic(omega1, omega0).map_err(|e| ExperimentError::Config(e.to_string())),
        _ => Ok(floquet_shift_multilevel(params, omega1, freq_mhz, policy, MultilevelOptions { model, couple_upper: true })?
            .omega_bs_khz),
    }
}

pub fn config_sha256(cfg: &ExperimentConfig) -> String {
    let digest = Sha256::digest(format!("{cfg:?}").as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Envelope {
    None,
    /// `exp(−t/T2)`, the form inside the oscillation fit.
    Exponential,
    /// `exp(−(t/T2)^k)`, the free-evolution form.
    Stretched,
}

fn envelope(cfg: &ExperimentConfig, kind: Envelope, t: f64) -> f64 {
    let d = cfg.decoherence;
    match kind {
        Envelope::None => 1.0,
        Envelope::Exponential => (-t / d.t2_us).exp(),
        Envelope::Stretched => (-(t / d.t2_us).powf(d.k)).exp(),
    }
}

/// Detected signal for one sweep point. Noise comes from a ChaCha stream
/// keyed by `(seed, index)` so points are independent of execution order.
fn detect(cfg: &ExperimentConfig, t: &[f64], p0: &[f64], kind: Envelope, index: usize) -> Vec<f64> {
    let det = cfg.detection;
    let mut rng = ChaCha8Rng::seed_from_u64(det.seed);
    rng.set_stream(index as u64);
    let normal = (det.noise_sigma > 0.0).then(|| Normal::new(0.0, det.noise_sigma).expect("sigma validated"));
    t.iter()
        .zip(p0)
        .map(|(&t, &p)| {
            let y = det.a + det.b * (2.0 * p - 1.0) * envelope(cfg, kind, t);
            match &normal {
                Some(n) => y + n.sample(&mut rng),
                None => y,
            }
        })
        .collect()
}

/// Compiled sequence family sharing one propagator.
struct Bench {
    prop: Propagator,
    params: NVParams,
    cal: RfCalibration,
    frame: Frame,
    template: String,
}

impl Bench {
    fn new(cfg: &ExperimentConfig, cal: RfCalibration, frame: Frame) -> Result<Self, ExperimentError> {
        let mut model = SpinModel::new(cfg.model, &cfg.params);
        if !cfg.nuclear_drive {
            model = model.without_nuclear_drive();
        }
        let prop = Propagator::new(model, cfg.policy)?;
        Ok(Self { prop, params: cfg.params, cal, frame, template: cfg.template.clone() })
    }

    fn schedule(&self, t: f64, overrides: &[(&str, f64)]) -> Result<Schedule, ExperimentError> {
        let mut parser = SequenceParser::new().set("t", t);
        for &(k, v) in overrides {
            parser = parser.set(k, v);
        }
        let seq = parser.parse(&self.template).map_err(DynamicsError::from)?;
        Ok(compile(&seq, self.frame, &self.params, &self.cal).map_err(DynamicsError::from)?)
    }

    fn final_p0(prop: &Propagator, s: &Schedule) -> Result<f64, ExperimentError> {
        let out = prop.run(s, &initial_state(prop.model()))?;
        out.measurements
            .last()
            .map(|m| m.1)
            .ok_or_else(|| ExperimentError::Config("sequence has no measure statement".into()))
    }

    /// `P0` for every gate time, in parallel, plus the last schedule.
    fn sweep(&self, times: &[f64], overrides: &[(&str, f64)]) -> Result<(Vec<f64>, Schedule), ExperimentError> {
        let schedules: Vec<Schedule> =
            times.iter().map(|&t| self.schedule(t, overrides)).collect::<Result<_, _>>()?;
        let p0 = schedules.par_iter().map(|s| Self::final_p0(&self.prop, s)).collect::<Result<Vec<_>, _>>()?;
        let last = schedules.into_iter().last().ok_or_else(|| ExperimentError::Config("empty gate-time grid".into()))?;
        Ok((p0, last))
    }

    fn convergence(
        &self,
        index: usize,
        t: f64,
        p0: f64,
        overrides: &[(&str, f64)],
    ) -> Result<ConvergenceEvidence, ExperimentError> {
        let fine = Propagator::new(self.prop.model().clone(), self.prop.policy().halved())?;
        let p = Self::final_p0(&fine, &self.schedule(t, overrides)?)?;
        let change = (p - p0).abs();
        if change >= CONVERGENCE_THRESHOLD {
            return Err(DynamicsError::NotConverged { change }.into());
        }
        Ok(ConvergenceEvidence {
            point_index: index,
            gate_time_us: t,
            p0,
            p0_halved: p,
            abs_change: change,
            threshold: CONVERGENCE_THRESHOLD,
        })
    }
}

fn calibration(cfg: &ExperimentConfig) -> Result<(RfCalibration, CalibrationRecord), ExperimentError> {
    let (omega1, shift) = match cfg.omega1_mhz {
        Some(w) => (w, model_shift(cfg.model, &cfg.params, w, cfg.calibration_freq_mhz, &cfg.policy)?),
        None => (
            calibrate_omega1(cfg.model, &cfg.params, cfg.target_shift_khz, cfg.calibration_freq_mhz, &cfg.policy)?,
            cfg.target_shift_khz,
        ),
    };
    let cal = RfCalibration::from_omega1(omega1, cfg.params.gamma_e, cfg.params.rf_tilt, cfg.p_ref_mw)
        .map_err(|e| ExperimentError::Config(e.to_string()))?;
    let rec = CalibrationRecord {
        p_ref_mw: cfg.p_ref_mw,
        b1_ref_mt: cal.b1_ref_mt,
        omega1_mhz: omega1,
        shift_ref_khz: shift,
        calibration_freq_mhz: cfg.calibration_freq_mhz,
    };
    Ok((cal, rec))
}

fn empty_report(cfg: &ExperimentConfig, calibration: Option<CalibrationRecord>) -> ExperimentReport {
    ExperimentReport {
        scenario: cfg.scenario,
        model: cfg.model,
        template: cfg.template_name.clone(),
        config_sha256: config_sha256(cfg),
        seed: cfg.detection.seed,
        noise_sigma: cfg.detection.noise_sigma,
        policy: cfg.policy,
        calibration,
        points: Vec::new(),
        spectrum: None,
        derived: BTreeMap::new(),
        linear_fit: None,
        convergence: None,
    }
}

fn with_meta(series: TimeSeries, cfg: &ExperimentConfig, var: &str, value: f64, tags: &[&str]) -> TimeSeries {
    series.with_meta(SeriesMeta {
        sweep_variable: var.into(),
        sweep_value: value,
        seed: Some(cfg.detection.seed),
        tags: tags.iter().map(|s| s.to_string()).collect(),
    })
}

/// How a point is analysed.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Analysis {
    Oscillation,
    Decay,
}

struct PointSpec<'a> {
    label: String,
    var: &'a str,
    value: f64,
    overrides: Vec<(&'a str, f64)>,
    analysis: Analysis,
}

fn run_point(
    cfg: &ExperimentConfig,
    bench: &Bench,
    rec: &CalibrationRecord,
    index: usize,
    spec: &PointSpec<'_>,
) -> Result<PointReport, ExperimentError> {
    let times = &cfg.gate_times_us;
    let (p0, last) = bench.sweep(times, &spec.overrides)?;
    let kind = match spec.analysis {
        Analysis::Oscillation => Envelope::Exponential,
        Analysis::Decay => Envelope::Stretched,
    };
    let y = detect(cfg, times, &p0, kind, index);
    let series = with_meta(TimeSeries::new(times.clone(), p0)?, cfg, spec.var, spec.value, &["p0"]);
    let signal = with_meta(TimeSeries::new(times.clone(), y)?, cfg, spec.var, spec.value, &["signal"]);

    let t_last = *times.last().expect("validated non-empty");
    let shift_at = |src: &Source| match src {
        Source::Rf { power_mw, .. } => rec.shift_ref_khz * power_mw / rec.p_ref_mw,
        _ => 0.0,
    };
    let unit = ledger_from_schedule(&last, |_| 1.0).map_err(|e| ExperimentError::Config(e.to_string()))?;
    let fraction = (t_last > 0.0).then(|| unit.oscillation_khz(t_last));
    let predicted = ledger_from_schedule(&last, shift_at)
        .ok()
        .filter(|_| t_last > 0.0)
        .map(|l| l.oscillation_khz(t_last).abs());

    let fit = match spec.analysis {
        Analysis::Oscillation => fit_bs_oscillation(&signal, None)?,
        Analysis::Decay => fit_decay(&signal, None)?,
    };
    let omega = match (fit.omega_bs_khz(), fraction) {
        (Some(w), Some(f)) if f.abs() > 1e-12 => Some(w / (2.0 * f.abs())),
        _ => None,
    };
    Ok(PointReport {
        index,
        label: spec.label.clone(),
        series,
        signal,
        fit: Some(fit),
        ledger_fraction: fraction,
        omega_bs_khz: omega,
        ledger_cosine_khz: predicted,
    })
}

fn check_scenario(cfg: &ExperimentConfig, want: Scenario) -> Result<(), ExperimentError> {
    if cfg.scenario != want {
        return Err(ExperimentError::Config(format!("config is for {} but {want} was requested", cfg.scenario)));
    }
    cfg.policy.validate()?;
    cfg.validate().map_err(ExperimentError::Config)
}

fn run_points(
    cfg: &ExperimentConfig,
    bench: &Bench,
    rec: &CalibrationRecord,
    specs: &[PointSpec<'_>],
    report: &mut ExperimentReport,
) -> Result<(), ExperimentError> {
    for (i, spec) in specs.iter().enumerate() {
        report.points.push(run_point(cfg, bench, rec, i, spec)?);
    }
    if cfg.convergence_check {
        if let (Some(spec), Some(pt)) = (specs.first(), report.points.first()) {
            let t = *cfg.gate_times_us.last().expect("validated");
            let p = *pt.series.y.last().expect("validated");
            report.convergence = Some(bench.convergence(0, t, p, &spec.overrides)?);
        }
    }
    Ok(())
}

fn fmt_num(v: f64) -> String {
    let s = format!("{v}");
    s.trim_end_matches(".0").to_string()
}

pub fn run_power_sweep(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    check_scenario(cfg, Scenario::PowerSweep)?;
    let (cal, rec) = calibration(cfg)?;
    let bench = Bench::new(cfg, cal, Frame::probed(&cfg.params))?;
    let specs: Vec<PointSpec> = cfg
        .powers_mw
        .iter()
        .map(|&p| PointSpec {
            label: format!("power_{}mw", fmt_num(p)),
            var: "power_mw",
            value: p,
            overrides: vec![("power", p), ("nu", cfg.rf_freq_mhz)],
            analysis: if p > 0.0 { Analysis::Oscillation } else { Analysis::Decay },
        })
        .collect();
    let mut report = empty_report(cfg, Some(rec));
    run_points(cfg, &bench, &rec, &specs, &mut report)?;

    let on: Vec<(f64, f64)> = specs
        .iter()
        .zip(&report.points)
        .filter(|(s, _)| s.value > 0.0)
        .filter_map(|(s, p)| p.omega_bs_khz.map(|w| (s.value, w)))
        .collect();
    let d = &mut report.derived;
    if let Some(&(p_top, w_top)) = on.iter().max_by(|a, b| a.0.total_cmp(&b.0)) {
        d.insert("top_power_mw".into(), p_top);
        d.insert("top_omega_bs_khz".into(), w_top);
        let dev = on
            .iter()
            .map(|&(p, w)| ((w / w_top) / (p / p_top) - 1.0).abs())
            .fold(0.0, f64::max);
        d.insert("max_linearity_deviation_rel".into(), dev);
    }
    for (s, p) in specs.iter().zip(&report.points) {
        if s.analysis == Analysis::Decay {
            if let Some(f) = &p.fit {
                if let Some(t2) = f.value("t2_us") {
                    d.insert("zero_power_t2_us".into(), t2);
                }
                if let Some(k) = f.value("k") {
                    d.insert("zero_power_k".into(), k);
                }
            }
        }
    }
    if on.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = on.iter().copied().unzip();
        let lf = linear_fit(&x, &y)?;
        for (key, name) in [
            ("slope_khz_per_mw", "slope_khz_per_mw"),
            ("intercept_khz", "intercept_khz"),
        ] {
            if let Some(v) = lf.value(name) {
                d.insert(key.into(), v);
            }
        }
        if let Some(r2) = lf.r_squared {
            d.insert("linear_r_squared".into(), r2);
        }
        report.linear_fit = Some(lf);
    }
    Ok(report)
}

pub fn run_freq_sweep(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    check_scenario(cfg, Scenario::FreqSweep)?;
    let (cal, rec) = calibration(cfg)?;
    let bench = Bench::new(cfg, cal, Frame::probed(&cfg.params))?;
    let specs: Vec<PointSpec> = cfg
        .frequencies_mhz
        .iter()
        .map(|&f| PointSpec {
            label: format!("freq_{}mhz", fmt_num(f)),
            var: "frequency_mhz",
            value: f,
            overrides: vec![("power", cfg.power_mw), ("nu", f)],
            analysis: Analysis::Oscillation,
        })
        .collect();
    let mut report = empty_report(cfg, Some(rec));
    run_points(cfg, &bench, &rec, &specs, &mut report)?;
    let w: Vec<f64> = report.points.iter().filter_map(|p| p.omega_bs_khz).collect();
    if !w.is_empty() {
        let max = w.iter().copied().fold(f64::MIN, f64::max);
        let min = w.iter().copied().fold(f64::MAX, f64::min);
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let d = &mut report.derived;
        d.insert("spread_rel".into(), max / min - 1.0);
        d.insert("mean_omega_bs_khz".into(), mean);
        let omega1 = rec.omega1_mhz * (cfg.power_mw / rec.p_ref_mw).sqrt();
        if let Ok(a) = bs_shift_analytic(omega1, cfg.params.esr_minus()) {
            d.insert("analytic_omega_bs_khz".into(), a);
            if a > 0.0 {
                d.insert("mean_over_analytic".into(), mean / a);
            }
        }
    }
    Ok(report)
}

pub fn run_on_resonance(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    check_scenario(cfg, Scenario::OnResonance)?;
    if cfg.model != ModelKind::Full9 && cfg.nuclear_drive {
        return Err(ExperimentError::Config("the nuclear drive needs the full9 model".into()));
    }
    let (cal, rec) = calibration(cfg)?;
    let mut cfg = cfg.clone();
    // nuclear Rabi frequency on the driven line at the reference power sets the
    // enhancement; the RF coupling element of I_x is γn·B1·enh/√2
    let enh = if cfg.nuclear_drive {
        let b1 = cal.b1(cfg.p_ref_mw);
        if !(b1 > 0.0) {
            return Err(ExperimentError::Config("nuclear drive needs a non-zero RF field".into()));
        }
        let enh = cfg.nuclear_rabi_khz * 1e-3 * std::f64::consts::SQRT_2 / (cfg.params.gamma_n * b1);
        cfg.params.enh = [enh; 4];
        enh
    } else {
        0.0
    };
    let bench = Bench::new(&cfg, cal, Frame::probed(&cfg.params))?;
    let specs = [PointSpec {
        label: format!("freq_{}mhz", fmt_num((cfg.rf_freq_mhz * 1e4).round() / 1e4)),
        var: "frequency_mhz",
        value: cfg.rf_freq_mhz,
        overrides: vec![("power", cfg.power_mw), ("nu", cfg.rf_freq_mhz)],
        analysis: Analysis::Oscillation,
    }];
    let mut report = empty_report(&cfg, Some(rec));
    run_points(&cfg, &bench, &rec, &specs, &mut report)?;
    let d = &mut report.derived;
    d.insert("rf_frequency_mhz".into(), cfg.rf_freq_mhz);
    d.insert("power_mw".into(), cfg.power_mw);
    d.insert("nuclear_enhancement".into(), enh);
    d.insert("reference_omega_bs_khz".into(), cfg.reference_khz);
    if let Some(w) = report.points[0].omega_bs_khz {
        let normalized = w * cfg.p_ref_mw / cfg.power_mw;
        d.insert("omega_bs_khz".into(), w);
        d.insert("normalized_omega_bs_khz".into(), normalized);
        d.insert("normalized_over_reference".into(), normalized / cfg.reference_khz);
        d.insert("expected_omega_bs_khz".into(), rec.shift_ref_khz * cfg.power_mw / rec.p_ref_mw);
    }
    Ok(report)
}

pub fn run_compensation(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    check_scenario(cfg, Scenario::Compensation)?;
    let (cal, rec) = calibration(cfg)?;
    let bench = Bench::new(cfg, cal, Frame::probed(&cfg.params))?;
    let base = |w3: f64, power: f64| vec![("power", power), ("nu", cfg.rf_freq_mhz), ("w3", w3)];
    let mut specs = vec![
        PointSpec {
            label: "rf_on".into(),
            var: "window3",
            value: cfg.window3,
            overrides: base(cfg.window3, cfg.power_mw),
            analysis: Analysis::Decay,
        },
        PointSpec {
            label: "rf_off".into(),
            var: "window3",
            value: cfg.window3,
            overrides: base(cfg.window3, 0.0),
            analysis: Analysis::Decay,
        },
    ];
    if let Some(w3) = cfg.perturbed_window3 {
        specs.push(PointSpec {
            label: format!("rf_on_w3_{}", fmt_num(w3)),
            var: "window3",
            value: w3,
            overrides: base(w3, cfg.power_mw),
            analysis: Analysis::Oscillation,
        });
    }
    let mut report = empty_report(cfg, Some(rec));
    run_points(cfg, &bench, &rec, &specs, &mut report)?;

    let coherent: Vec<f64> = report.points[0].series.y.iter().map(|p| 2.0 * p - 1.0).collect();
    let max = coherent.iter().copied().fold(f64::MIN, f64::max);
    let min = coherent.iter().copied().fold(f64::MAX, f64::min);
    let d = &mut report.derived;
    d.insert("residual_amplitude".into(), (max - min) / 2.0);
    for (key, p) in [("rf_on", &report.points[0]), ("rf_off", &report.points[1])] {
        if let Some(f) = &p.fit {
            if let Some(t2) = f.value("t2_us") {
                d.insert(format!("{key}_t2_us"), t2);
            }
            if let Some(k) = f.value("k") {
                d.insert(format!("{key}_k"), k);
            }
        }
    }
    if let Some(p) = report.points.get(2) {
        if let Some(c) = p.cosine_khz() {
            d.insert("perturbed_cosine_khz".into(), c);
        }
        if let Some(c) = p.ledger_cosine_khz {
            d.insert("perturbed_ledger_cosine_khz".into(), c);
        }
        if let Some(f) = p.ledger_fraction {
            d.insert("perturbed_ledger_fraction".into(), f);
        }
    }
    Ok(report)
}

pub fn run_spectrum(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    check_scenario(cfg, Scenario::Spectrum)?;
    let carrier = cfg.params.esr_minus() - cfg.carrier_offset_mhz;
    let frame = Frame::Rotating { carrier_mhz: carrier };
    let cal = RfCalibration::new(cfg.p_ref_mw, 0.0).map_err(|e| ExperimentError::Config(e.to_string()))?;
    let bench = Bench::new(cfg, cal, frame)?;
    let times: Vec<f64> = (0..cfg.fid_points).map(|k| k as f64 * cfg.fid_dt_us).collect();
    let (p0, _) = bench.sweep(&times, &[])?;
    let y = detect(cfg, &times, &p0, Envelope::None, 0);
    let series = with_meta(TimeSeries::new(times.clone(), p0)?, cfg, "delay_us", 0.0, &["p0"]);
    let signal = with_meta(TimeSeries::unchecked(times.clone(), y)?, cfg, "delay_us", 0.0, &["signal"]);
    let spec = fft_spectrum_windowed(&signal, cfg.zero_pad, Window::Hann)?.relative_to(cfg.carrier_offset_mhz);
    let peaks = find_peaks(&spec, 0.2);

    let table = transition_table(&cfg.params);
    let lines: Vec<_> = table.of_kind(TransitionKind::Esr).filter(|l| l.lower.0 == -1 || l.upper.0 == -1).collect();
    let rows: Vec<PeakRow> = peaks
        .iter()
        .map(|pk| {
            // a line at ν appears at |ν − carrier| before the origin shift
            let f_abs = pk.freq_mhz + cfg.carrier_offset_mhz;
            let best = lines
                .iter()
                .flat_map(|l| [(l, (carrier + f_abs - l.frequency_mhz)), (l, (carrier - f_abs - l.frequency_mhz))])
                .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()));
            let (label, line_mhz, dev) = match best {
                Some((l, dev)) => (
                    l.label.map(str::to_string).unwrap_or_else(|| {
                        format!("|{},{}>-|{},{}>", l.lower.0, l.lower.1, l.upper.0, l.upper.1)
                    }),
                    l.frequency_mhz,
                    dev,
                ),
                None => (String::new(), f64::NAN, f64::NAN),
            };
            PeakRow {
                freq_mhz: pk.freq_mhz,
                magnitude: pk.magnitude,
                line_label: label,
                line_mhz,
                deviation_mhz: dev,
                fwhm_mhz: peak_fwhm(&spec, pk),
            }
        })
        .collect();

    let mut report = empty_report(cfg, None);
    let d = &mut report.derived;
    d.insert("peak_count".into(), rows.len() as f64);
    d.insert("bin_mhz".into(), spec.bin_mhz);
    d.insert("resolution_mhz".into(), spec.resolution_mhz);
    d.insert("carrier_mhz".into(), carrier);
    if rows.len() >= 2 {
        let spacings: Vec<f64> = rows.windows(2).map(|w| w[1].freq_mhz - w[0].freq_mhz).collect();
        d.insert("min_spacing_mhz".into(), spacings.iter().copied().fold(f64::MAX, f64::min));
        d.insert("max_spacing_mhz".into(), spacings.iter().copied().fold(f64::MIN, f64::max));
        let mags: Vec<f64> = rows.iter().map(|r| r.magnitude).collect();
        let max = mags.iter().copied().fold(f64::MIN, f64::max);
        let min = mags.iter().copied().fold(f64::MAX, f64::min);
        d.insert("amplitude_spread_rel".into(), max / min - 1.0);
    }
    if let Some(w) = rows.iter().filter_map(|r| r.fwhm_mhz).next() {
        d.insert("fwhm_mhz".into(), w);
    }
    report.points.push(PointReport {
        index: 0,
        label: "fid".into(),
        series,
        signal,
        fit: None,
        ledger_fraction: None,
        omega_bs_khz: None,
        ledger_cosine_khz: None,
    });
    report.spectrum = Some(SpectrumReport { spectrum: spec, peaks: rows });
    Ok(report)
}

/// Dispatches on `cfg.scenario`.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    match cfg.scenario {
        Scenario::Spectrum => run_spectrum(cfg),
        Scenario::PowerSweep => run_power_sweep(cfg),
        Scenario::FreqSweep => run_freq_sweep(cfg),
        Scenario::OnResonance => run_on_resonance(cfg),
        Scenario::Compensation => run_compensation(cfg),
    }
}
