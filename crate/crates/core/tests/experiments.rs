use bssim::experiments::{run, Config, ExperimentConfig, Scenario};

fn quiet(s: Scenario) -> ExperimentConfig {
    let mut c = ExperimentConfig::reference(s);
    c.detection.noise_sigma = 0.0;
    c
}

#[test]
fn reports_are_deterministic() {
    let c = ExperimentConfig::reference(Scenario::PowerSweep);
    let a = run(&c).unwrap();
    let b = run(&c).unwrap();
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
    let mut other = c.clone();
    other.detection.seed += 1;
    let d = run(&other).unwrap();
    assert_ne!(a.points[0].signal.y, d.points[0].signal.y);
    assert_ne!(a.config_sha256, d.config_sha256);
}

#[test]
fn power_sweep_halves_with_power() {
    let r = run(&quiet(Scenario::PowerSweep)).unwrap();
    let w: Vec<f64> = r.points.iter().filter_map(|p| p.omega_bs_khz).collect();
    assert_eq!(w.len(), 3);
    for (got, want) in w.iter().zip([21.72, 10.86, 5.43]) {
        assert!((got / want - 1.0).abs() < 1e-2, "{got} vs {want}");
    }
    // zero-power trace is fitted with the stretched decay
    let zero = r.points.last().unwrap().fit.as_ref().unwrap();
    assert!((zero.t2_us().unwrap() / 1300.0 - 1.0).abs() < 1e-3);
    assert!(r.derived("slope_khz_per_mw").is_some());
}

#[test]
fn fitted_frequency_matches_ledger() {
    // noisy single-seed run: fit frequency vs ledger within 3 standard errors
    for s in [Scenario::PowerSweep, Scenario::FreqSweep] {
        let r = run(&ExperimentConfig::reference(s)).unwrap();
        for p in r.points.iter().filter(|p| p.omega_bs_khz.is_some()) {
            let fit = p.fit.as_ref().unwrap();
            let se = fit.stderr("omega_bs_khz").unwrap() / 2.0;
            let diff = (p.cosine_khz().unwrap() - p.ledger_cosine_khz.unwrap()).abs();
            assert!(diff <= 3.0 * se, "{s} {}: {diff} > 3 x {se}", p.label);
        }
    }
}

#[test]
fn single_frequency_has_zero_spread() {
    let mut c = quiet(Scenario::FreqSweep);
    c.frequencies_mhz = vec![7.0];
    let r = run(&c).unwrap();
    assert_eq!(r.derived("spread_rel"), Some(0.0));
    let m = r.derived("mean_over_analytic").unwrap();
    assert!((m - 1.0).abs() < 1e-2, "{m}");
}

#[test]
fn shorter_record_broadens_lines() {
    let full = run(&quiet(Scenario::Spectrum)).unwrap();
    let mut c = quiet(Scenario::Spectrum);
    c.fid_points /= 2;
    let half = run(&c).unwrap();
    let ratio = half.derived("fwhm_mhz").unwrap() / full.derived("fwhm_mhz").unwrap();
    assert!((ratio - 2.0).abs() < 0.05, "{ratio}");
}

#[test]
fn spectrum_peaks_map_to_hyperfine_lines() {
    let r = run(&quiet(Scenario::Spectrum)).unwrap();
    let s = r.spectrum.unwrap();
    assert_eq!(s.peaks.len(), 3);
    assert!(s.peaks.iter().any(|p| p.line_label == "nu1e"));
    for p in &s.peaks {
        assert!(p.deviation_mhz.abs() < s.spectrum.bin_mhz, "{p:?}");
    }
}

#[test]
fn on_resonance_normalizes_to_reference() {
    let r = run(&quiet(Scenario::OnResonance)).unwrap();
    let ratio = r.derived("normalized_over_reference").unwrap();
    assert!((ratio - 1.0).abs() < 5e-3, "{ratio}");
    // nuclear dynamics move the electron oscillation by less than 2 %
    let got = r.derived("omega_bs_khz").unwrap();
    let want = r.derived("expected_omega_bs_khz").unwrap();
    assert!((got / want - 1.0).abs() < 0.02, "{got} vs {want}");
}

#[test]
fn on_resonance_without_nuclear_drive_matches_off_resonant_run() {
    let mut c = quiet(Scenario::OnResonance);
    c.nuclear_drive = false;
    let on = run(&c).unwrap();
    let mut f = quiet(Scenario::FreqSweep);
    f.model = c.model;
    f.target_shift_khz = c.target_shift_khz;
    f.calibration_freq_mhz = c.calibration_freq_mhz;
    f.power_mw = c.power_mw;
    f.frequencies_mhz = vec![c.rf_freq_mhz];
    f.nuclear_drive = false;
    let off = run(&f).unwrap();
    let a = on.derived("omega_bs_khz").unwrap();
    let b = off.points[0].omega_bs_khz.unwrap();
    assert!((a / b - 1.0).abs() < 5e-3, "{a} vs {b}");
}

#[test]
fn perturbed_windows_leave_a_slow_ramp() {
    let r = run(&quiet(Scenario::Compensation)).unwrap();
    assert!(r.derived("residual_amplitude").unwrap() <= 1e-3);
    assert!((r.derived("perturbed_ledger_fraction").unwrap() - 0.025).abs() < 1e-12);
    let got = r.derived("perturbed_cosine_khz").unwrap();
    let want = 0.025 * 21.72;
    assert!((got / want - 1.0).abs() < 1e-2, "{got} vs {want}");
}

#[test]
fn envelope_and_noise_commute_in_expectation() {
    // mean over seeds of the noisy signal equals the noiseless enveloped signal
    let mut c = ExperimentConfig::reference(Scenario::Compensation);
    c.gate_times_us = bssim::experiments::linspace(0.0, 5000.0, 11);
    c.perturbed_window3 = None;
    c.convergence_check = false;
    let mut q = c.clone();
    q.detection.noise_sigma = 0.0;
    let clean = run(&q).unwrap().points[0].signal.y.clone();
    let n = 120;
    let mut mean = vec![0.0; clean.len()];
    for seed in 0..n {
        c.detection.seed = seed;
        let y = run(&c).unwrap().points[0].signal.y.clone();
        for (m, v) in mean.iter_mut().zip(y) {
            *m += v / n as f64;
        }
    }
    let tol = 4.0 * c.detection.noise_sigma / (n as f64).sqrt();
    for (m, y) in mean.iter().zip(&clean) {
        assert!((m - y).abs() < tol, "{m} vs {y}");
    }
}

#[test]
fn coarse_policy_is_refused() {
    let mut c = quiet(Scenario::PowerSweep);
    c.policy.steps_per_rf_period = 8;
    let e = run(&c).unwrap_err();
    assert!(e.is_refusal(), "{e}");
}

#[test]
fn report_serializes_derived_values() {
    let r = run(&quiet(Scenario::FreqSweep)).unwrap();
    let v = serde_json::to_value(&r).unwrap();
    assert_eq!(v["scenario"], "freq-sweep");
    let spread = v["derived"]["spread_rel"].as_f64().unwrap();
    assert_eq!(spread, r.derived("spread_rel").unwrap());
    assert_eq!(v["points"].as_array().unwrap().len(), r.points.len());
}

#[test]
fn shipped_config_matches_builtin_defaults() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.cfg");
    let cfg = Config::parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
    for s in Scenario::ALL {
        let got = ExperimentConfig::from_config(&cfg, s, path.parent()).unwrap();
        assert_eq!(format!("{got:?}"), format!("{:?}", ExperimentConfig::reference(s)), "{s}");
    }
}
