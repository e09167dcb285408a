//! `bssim` command-line front end.

mod output;
mod svg;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use bssim::analysis::{calibrate_power, decay_model, fit_bs_oscillation, fit_decay, oscillation_model, FitModel, FitResult, TimeSeries};
use bssim::dynamics::{
    floquet_shift_2level, floquet_shift_multilevel, BSPrediction, DynamicsError, ModelKind, MultilevelOptions,
    StepPolicy,
};
use bssim::experiments::{params_from_config, run, Config, ExperimentConfig, ExperimentError, ExperimentReport, Scenario};
use bssim::spin::{fit_field_from_esr, transition_table, NVParams};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use output::{csv_two_columns, fmt_g9, read_csv, OutputDir, RunManifest};

#[derive(Parser, Debug)]
#[command(name = "bssim", version, about = "Bloch–Siegert shift simulator for NV-centre spin registers")]
struct Cli {
    /// Configuration file.
    #[arg(short = 'c', long, global = true)]
    config: Option<PathBuf>,
    /// Output root directory.
    #[arg(short = 'o', long, global = true, env = "BSSIM_OUT")]
    out: Option<PathBuf>,
    /// Noise seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweep points.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Disable detection noise.
    #[arg(long, global = true)]
    no_noise: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Energy levels and transition table.
    Levels {
        /// Fit the field to this ESR line (MHz).
        #[arg(long, conflicts_with = "b")]
        esr: Option<f64>,
        /// Static field (mT).
        #[arg(long, allow_negative_numbers = true)]
        b: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        d: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        p: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        a: Option<f64>,
        /// Reference NMR lines nu1n..nu4n (MHz) for a comparison column.
        #[arg(long, value_delimiter = ',')]
        reference: Option<Vec<f64>>,
    },
    /// Run a scenario and write CSV, JSON and optional SVG output.
    Run {
        scenario: String,
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
        /// Also write one SVG plot per sweep point.
        #[arg(long)]
        svg: bool,
    },
    /// Fit external `t_us,y` data.
    Fit {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "bs")]
        model: FitArg,
        /// Reference shift (kHz) for converting the fitted shift into power.
        #[arg(long)]
        calibrate_against: Option<f64>,
        #[arg(long, default_value_t = 80.0)]
        p_ref: f64,
    },
    /// BS-shift predictions from the analytic law and Floquet theory.
    Predict {
        #[arg(long)]
        omega1: f64,
        /// Transition frequency (MHz); defaults to the probed line of the system.
        #[arg(long)]
        omega0: Option<f64>,
        /// RF frequency (MHz) for the Floquet calculations.
        #[arg(long, default_value_t = 6.0)]
        rf: f64,
        #[arg(long, value_enum, default_value = "floquet2")]
        model: PredictArg,
        /// Level model for `--model multilevel`.
        #[arg(long, value_enum, default_value = "three")]
        levels: ModelArg,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    Two,
    Three,
    Full9,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Two => ModelKind::TwoLevel,
            ModelArg::Three => ModelKind::ThreeLevel,
            ModelArg::Full9 => ModelKind::Full9,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FitArg {
    Decay,
    Bs,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
enum PredictArg {
    Analytic,
    Floquet2,
    Multilevel,
}

/// Failure classes with their exit codes.
#[derive(Debug)]
enum Failure {
    Config(String),
    Refused(String),
    NotConverged(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Refused(_) => 3,
            Failure::NotConverged(_) => 4,
            Failure::Io(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Refused(m) | Failure::NotConverged(m) | Failure::Io(m) => m,
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        if e.is_refusal() {
            Failure::Refused(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

impl From<DynamicsError> for Failure {
    fn from(e: DynamicsError) -> Self {
        ExperimentError::from(e).into()
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.cmd {
        Cmd::Levels { esr, b, d, p, a, reference } => cmd_levels(&cli, *esr, *b, *d, *p, *a, reference.as_deref()),
        Cmd::Run { scenario, model, svg } => cmd_run(&cli, scenario, *model, *svg),
        Cmd::Fit { file, model, calibrate_against, p_ref } => cmd_fit(file, *model, *calibrate_against, *p_ref),
        Cmd::Predict { omega1, omega0, rf, model, levels } => cmd_predict(&cli, *omega1, *omega0, *rf, *model, *levels),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn load_config(cli: &Cli) -> Result<Option<(Config, PathBuf)>, Failure> {
    let Some(path) = &cli.config else { return Ok(None) };
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
    let cfg = Config::parse(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    Ok(Some((cfg, path.clone())))
}

fn out_root(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn to_json<T: Serialize>(v: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Failure::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn write_manifest<P: Serialize>(
    dir: &mut OutputDir,
    command: String,
    config: Option<&Path>,
    parameters: &P,
    started: Instant,
) -> Result<(), Failure> {
    let files = dir.files().to_vec();
    let manifest = RunManifest {
        command,
        config_path: config.map(|p| p.display().to_string()),
        parameters,
        output_dir: dir.root().display().to_string(),
        tool_version: env!("CARGO_PKG_VERSION"),
        wall_clock_s: started.elapsed().as_secs_f64(),
        files: &files,
    };
    let text = to_json(&manifest)?;
    let path = dir.root().join("manifest.json");
    dir.write("manifest.json", text.as_bytes()).map_err(io_err(&path))
}

fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

fn cmd_levels(
    cli: &Cli,
    esr: Option<f64>,
    b: Option<f64>,
    d: Option<f64>,
    p: Option<f64>,
    a: Option<f64>,
    reference: Option<&[f64]>,
) -> Result<(), Failure> {
    let started = Instant::now();
    let loaded = load_config(cli)?;
    let mut params = match &loaded {
        Some((cfg, _)) => params_from_config(cfg).map_err(|e| Failure::Config(e.to_string()))?,
        None => NVParams::default(),
    };
    let refit = d.is_some() || esr.is_some();
    params.d = d.unwrap_or(params.d);
    params.p = p.unwrap_or(params.p);
    params.a = a.unwrap_or(params.a);
    if let Some(b) = b {
        params.b = b;
    } else if refit {
        let nu = esr.unwrap_or(bssim::spin::REFERENCE_ESR_MHZ);
        params.b = fit_field_from_esr(nu, &params).map_err(|e| Failure::Config(e.to_string()))?;
    }
    params.validate().map_err(|e| Failure::Config(e.to_string()))?;

    let table = transition_table(&params);
    let refs: BTreeMap<&str, f64> = match reference {
        Some(r) if r.len() != 4 => {
            return Err(Failure::Config(format!("--reference needs 4 values (nu1n..nu4n), got {}", r.len())))
        }
        Some(r) => ["nu1n", "nu2n", "nu3n", "nu4n"].into_iter().zip(r.iter().copied()).collect(),
        None => BTreeMap::new(),
    };
    println!("B = {} mT", fmt_g9(params.b));
    println!("{:<6} {:<5} {:>10} {:>10} {:>14} {:>12}", "label", "kind", "lower", "upper", "freq_mhz", "diff_khz");
    let mut csv = String::from("label,kind,m_s_lower,m_i_lower,m_s_upper,m_i_upper,frequency_mhz,reference_mhz,diff_khz\n");
    for l in &table.lines {
        let label = l.label.unwrap_or("-");
        let r = l.label.and_then(|x| refs.get(x).copied());
        let diff = r.map(|r| (l.frequency_mhz - r) * 1e3);
        println!(
            "{:<6} {:<5} {:>10} {:>10} {:>14.6} {:>12}",
            label,
            format!("{:?}", l.kind),
            format!("{:?}", l.lower),
            format!("{:?}", l.upper),
            l.frequency_mhz,
            diff.map(|d| format!("{d:.3}")).unwrap_or_default()
        );
        csv.push_str(&format!(
            "{},{:?},{},{},{},{},{},{},{}\n",
            label,
            l.kind,
            l.lower.0,
            l.lower.1,
            l.upper.0,
            l.upper.1,
            fmt_g9(l.frequency_mhz),
            r.map(fmt_g9).unwrap_or_default(),
            diff.map(fmt_g9).unwrap_or_default()
        ));
    }
    let root = out_root(cli).join("levels");
    let mut dir = OutputDir::create(root.clone()).map_err(io_err(&root))?;
    dir.write("transitions.csv", csv.as_bytes()).map_err(io_err(&root))?;
    write_manifest(&mut dir, command_line(), loaded.as_ref().map(|l| l.1.as_path()), &params, started)
}

fn cmd_run(cli: &Cli, scenario: &str, model: Option<ModelArg>, svg: bool) -> Result<(), Failure> {
    let started = Instant::now();
    let scenario: Scenario = scenario.parse().map_err(Failure::Config)?;
    let loaded = load_config(cli)?;
    let mut cfg = match &loaded {
        Some((c, path)) => ExperimentConfig::from_config(c, scenario, path.parent())
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?,
        None => ExperimentConfig::reference(scenario),
    };
    if let Some(s) = cli.seed {
        cfg.detection.seed = s;
    }
    if cli.no_noise {
        cfg.detection.noise_sigma = 0.0;
    }
    if let Some(m) = model {
        cfg.model = m.into();
    }
    cfg.validate().map_err(Failure::Config)?;

    let report = run(&cfg)?;
    let root = out_root(cli).join(scenario.name());
    let mut dir = OutputDir::create(root.clone()).map_err(io_err(&root))?;
    for p in &report.points {
        let csv = csv_two_columns(("t_us", "p0"), &p.signal.t, &p.signal.y);
        dir.write(&format!("point_{}.csv", p.index), csv.as_bytes()).map_err(io_err(&root))?;
    }
    if let Some(s) = &report.spectrum {
        let csv = csv_two_columns(("freq_mhz", "magnitude"), &s.spectrum.freq_mhz, &s.spectrum.magnitude);
        dir.write("spectrum.csv", csv.as_bytes()).map_err(io_err(&root))?;
    }
    dir.write("report.json", to_json(&report)?.as_bytes()).map_err(io_err(&root))?;
    if svg {
        for p in &report.points {
            let curve = p.fit.as_ref().and_then(|f| model_curve(f, &p.signal));
            let title = format!("{} {}", scenario, p.label);
            let text = svg::plot(&title, &p.signal.t, &p.signal.y, curve.as_deref());
            dir.write(&format!("plot_{}.svg", p.index), text.as_bytes()).map_err(io_err(&root))?;
        }
    }
    write_manifest(&mut dir, command_line(), loaded.as_ref().map(|l| l.1.as_path()), &cfg, started)?;
    print_summary(&report, dir.root());

    let bad = report.unconverged_fits();
    if !bad.is_empty() {
        return Err(Failure::NotConverged(format!("fits did not converge: {}", bad.join(", "))));
    }
    Ok(())
}

fn print_summary(report: &ExperimentReport, root: &Path) {
    println!("{} ({}) -> {}", report.scenario, report.model, root.display());
    for p in &report.points {
        match (p.omega_bs_khz, p.fit.as_ref().and_then(FitResult::t2_us)) {
            (Some(w), _) => println!("  {:<16} omega_bs_khz = {}", p.label, fmt_g9(w)),
            (None, Some(t2)) => println!("  {:<16} t2_us = {}", p.label, fmt_g9(t2)),
            _ => println!("  {}", p.label),
        }
    }
    for (k, v) in &report.derived {
        println!("  {k} = {}", fmt_g9(*v));
    }
}

fn model_curve(fit: &FitResult, data: &TimeSeries) -> Option<Vec<(f64, f64)>> {
    let (t0, t1) = (*data.t.first()?, *data.t.last()?);
    let (f, p): (fn(f64, &[f64]) -> f64, Vec<f64>) = match fit.model {
        FitModel::Decay => (decay_model, ["a", "b", "t2_us", "k"].iter().map(|n| fit.value(n)).collect::<Option<_>>()?),
        FitModel::BsOscillation => {
            (oscillation_model, ["a", "b", "omega_bs_khz", "t2_us"].iter().map(|n| fit.value(n)).collect::<Option<_>>()?)
        }
        FitModel::Linear => return None,
    };
    let n = 400;
    Some((0..=n).map(|i| t0 + (t1 - t0) * i as f64 / n as f64).map(|t| (t, f(t, &p))).collect())
}

#[derive(Serialize)]
struct PowerRow {
    measured_khz: f64,
    reference_khz: f64,
    p_ref_mw: f64,
    power_mw: f64,
    b1_scale: f64,
}

#[derive(Serialize)]
struct FitOutput<'a> {
    file: String,
    column: String,
    fit: &'a FitResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    calibration: Option<PowerRow>,
}

fn cmd_fit(file: &Path, model: FitArg, against: Option<f64>, p_ref: f64) -> Result<(), Failure> {
    let text = fs::read_to_string(file).map_err(|e| Failure::Config(format!("cannot read {}: {e}", file.display())))?;
    let data = read_csv(&text).map_err(|e| Failure::Config(format!("{}: {e}", file.display())))?;
    let column = data.header[1].clone();
    let series =
        TimeSeries::unchecked(data.x, data.y).map_err(|e| Failure::Config(format!("{}: {e}", file.display())))?;
    let fit = match model {
        FitArg::Decay => fit_decay(&series, None),
        FitArg::Bs => fit_bs_oscillation(&series, None),
    }
    .map_err(|e| Failure::Config(format!("{}: {e}", file.display())))?;
    let calibration = match against {
        Some(reference) => {
            let measured = fit
                .omega_bs_khz()
                .ok_or_else(|| Failure::Config("--calibrate-against needs the bs model".into()))?;
            let c = calibrate_power(measured, reference, p_ref).map_err(|e| Failure::Config(e.to_string()))?;
            Some(PowerRow { measured_khz: measured, reference_khz: reference, p_ref_mw: p_ref, power_mw: c.power_mw, b1_scale: c.b1_scale })
        }
        None => None,
    };
    let out = FitOutput { file: file.display().to_string(), column, fit: &fit, calibration };
    print!("{}", to_json(&out)?);
    if !fit.converged {
        return Err(Failure::NotConverged("fit did not converge; best-effort result printed".into()));
    }
    Ok(())
}

fn cmd_predict(
    cli: &Cli,
    omega1: f64,
    omega0: Option<f64>,
    rf: f64,
    model: PredictArg,
    levels: ModelArg,
) -> Result<(), Failure> {
    let params = match load_config(cli)? {
        Some((cfg, _)) => params_from_config(&cfg).map_err(|e| Failure::Config(e.to_string()))?,
        None => NVParams::default(),
    };
    let omega0 = omega0.unwrap_or_else(|| params.esr_minus());
    if !(omega0 > 0.0) || !omega1.is_finite() || !(rf > 0.0) {
        return Err(Failure::Config(format!("frequencies must be positive (omega0 = {omega0}, rf = {rf})")));
    }
    let policy = StepPolicy::default();
    let mut out: BTreeMap<&str, BSPrediction> = BTreeMap::new();
    out.insert("analytic", BSPrediction::analytic(omega1, omega0).map_err(|e| Failure::Config(e.to_string()))?);
    if model != PredictArg::Analytic {
        out.insert("floquet2", floquet_shift_2level(omega0, rf, omega1, &policy)?);
    }
    if model == PredictArg::Multilevel {
        let opts = MultilevelOptions { model: levels.into(), ..Default::default() };
        out.insert("multilevel", floquet_shift_multilevel(&params, omega1, rf, &policy, opts)?);
    }
    print!("{}", to_json(&out)?);
    Ok(())
}
