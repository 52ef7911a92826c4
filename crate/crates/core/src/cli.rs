//! Batch front end: config parsing, quench runs, mass tables, spectral
//! matching, self-verification and parameter sweeps.
//!
//! Exit codes: 0 ok, 1 verification failure, 2 usage or configuration error,
//! 3 numerical failure.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::confinement::quasiparticle_masses;
use crate::evolve::{run_quench, InitialState, QuenchConfig, TimeSeries, TimeSeriesRow};
use crate::lattice::Sublattice;
use crate::spectroscopy::{extract_peaks, fft_spectrum, match_masses, Channel};
use crate::verify::{run_verify, VerifyLevel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

enum CliError {
    Usage(String),
    Numerical(String),
    Verify,
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Verify => EXIT_VERIFY_FAILED,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) => m,
            CliError::Verify => "verification failed",
        }
    }
}

#[derive(Parser)]
#[command(
    name = "hexhadron",
    about = "Heavy-hex transverse-field Ising quenches with a message-passing tensor network",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a quench and write the observable time series as CSV.
    Quench(QuenchArgs),
    /// Print the quasiparticle masses and mass differences.
    Masses(MassesArgs),
    /// Fourier-transform a time series and match peaks to model lines.
    Spectrum(SpectrumArgs),
    /// Run the built-in cross-validation battery.
    Verify(VerifyArgs),
    /// Run one quench per swept parameter value.
    Sweep(SweepArgs),
}

#[derive(Args, Clone, Default)]
struct QuenchOverrides {
    /// Ising coupling J.
    #[arg(long)]
    j: Option<f64>,
    /// Transverse field h.
    #[arg(long)]
    h: Option<f64>,
    /// Initial product state: zplus or yplus.
    #[arg(long)]
    initial_state: Option<String>,
    /// Trotter step (defaults to 0.05/J).
    #[arg(long)]
    dt: Option<f64>,
    /// Evolution time (rounded down to a whole number of steps).
    #[arg(long)]
    t_max: Option<f64>,
    /// Relative truncation cutoff on squared singular values.
    #[arg(long)]
    cutoff: Option<f64>,
    /// Bond dimension cap; "unlimited" or an integer.
    #[arg(long)]
    chi_max: Option<String>,
    /// Message-passing convergence tolerance.
    #[arg(long)]
    bp_tol: Option<f64>,
    /// Message-passing iteration cap per call.
    #[arg(long)]
    bp_max_iters: Option<usize>,
    /// Record observables every this many steps.
    #[arg(long)]
    sample_every: Option<usize>,
    /// Largest correlator distance to record (0 disables).
    #[arg(long)]
    correlator_dmax: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct QuenchArgs {
    /// Flat key = value config file; flags override file keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: QuenchOverrides,
}

#[derive(Args)]
struct MassesArgs {
    #[arg(long, default_value_t = 1.0)]
    j: f64,
    #[arg(long, allow_hyphen_values = true)]
    h: f64,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Time series CSV produced by the quench subcommand.
    #[arg(long)]
    series: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    t_min: f64,
    #[arg(long, default_value_t = 100.0)]
    t_max: f64,
    #[arg(long, default_value_t = 1.0)]
    j: f64,
    #[arg(long, allow_hyphen_values = true)]
    h: f64,
    /// Channel to transform: mz_a, mz_b, mx_a, mx_b, my_a, my_b or s.
    #[arg(long, default_value = "mz_a")]
    channel: String,
    /// Relative peak threshold.
    #[arg(long, default_value_t = 0.05)]
    threshold: f64,
    /// Zero-padding factor.
    #[arg(long, default_value_t = 4)]
    pad_factor: usize,
    /// Matching tolerance; defaults to the window resolution 2 pi / T.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// quick or full.
    #[arg(long, default_value = "quick")]
    level: String,
}

#[derive(Args)]
struct SweepArgs {
    /// Base config file for every run.
    #[arg(long)]
    config: PathBuf,
    /// Config key to sweep (e.g. h or chi_max).
    #[arg(long)]
    key: String,
    /// Comma-separated values.
    #[arg(long)]
    values: String,
    #[arg(long)]
    out_dir: PathBuf,
}

/// Number formatting used in every CSV: 17 significant digits round-trip
/// exactly at double precision.
fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

#[derive(Serialize)]
struct RunManifest {
    config: BTreeMap<String, String>,
    started_at: String,
    finished_at: String,
    build: String,
    outputs: Vec<String>,
    warnings: Vec<String>,
}

fn build_id() -> String {
    format!(
        "{} {} ({})",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION"),
        option_env!("BUILD_GIT_HASH").unwrap_or("unreleased")
    )
}

/// Parses the flat `key = value` config format. Unknown keys are errors so
/// typos surface immediately.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, String> {
    const KNOWN: [&str; 12] = [
        "j",
        "h",
        "initial_state",
        "dt",
        "t_max",
        "cutoff",
        "chi_max",
        "bp_tol",
        "bp_max_iters",
        "sample_every",
        "correlator_dmax",
        "out_dir",
    ];
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("line {}: expected `key = value`", lineno + 1));
        };
        let key = key.trim().to_string();
        if !KNOWN.contains(&key.as_str()) {
            return Err(format!("line {}: unknown key `{}`", lineno + 1, key));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

fn parse_key<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, String>
where
    T::Err: std::fmt::Display,
{
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse::<T>()
            .map(Some)
            .map_err(|e| format!("key `{}`: cannot parse `{}` ({})", key, raw, e)),
    }
}

fn parse_chi_max(raw: &str) -> Result<Option<usize>, String> {
    match raw.to_ascii_lowercase().as_str() {
        "unlimited" | "none" | "inf" => Ok(None),
        other => other
            .parse::<usize>()
            .map(Some)
            .map_err(|e| format!("key `chi_max`: cannot parse `{}` ({})", other, e)),
    }
}

/// Merges config-file keys and CLI overrides into a validated QuenchConfig
/// (flags win).
fn assemble_config(
    file: Option<&Path>,
    overrides: &QuenchOverrides,
) -> Result<(QuenchConfig, PathBuf), CliError> {
    let map = match file {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {}", path.display(), e))
            })?;
            parse_config_text(&text).map_err(CliError::Usage)?
        }
        None => BTreeMap::new(),
    };
    let usage = CliError::Usage;

    let mut config = QuenchConfig::default();
    if let Some(j) = parse_key::<f64>(&map, "j").map_err(usage)? {
        config.j = j;
    }
    if let Some(j) = overrides.j {
        config.j = j;
    }
    if let Some(h) = parse_key::<f64>(&map, "h").map_err(CliError::Usage)? {
        config.h = h;
    }
    if let Some(h) = overrides.h {
        config.h = h;
    }
    if let Some(s) = map.get("initial_state") {
        config.initial_state = s
            .parse::<InitialState>()
            .map_err(|e| CliError::Usage(format!("key `initial_state`: {}", e)))?;
    }
    if let Some(s) = &overrides.initial_state {
        config.initial_state = s
            .parse::<InitialState>()
            .map_err(|e| CliError::Usage(format!("flag --initial-state: {}", e)))?;
    }
    let mut dt_given = false;
    if let Some(dt) = parse_key::<f64>(&map, "dt").map_err(CliError::Usage)? {
        config.dt = dt;
        dt_given = true;
    }
    if let Some(dt) = overrides.dt {
        config.dt = dt;
        dt_given = true;
    }
    if !dt_given {
        config.dt = 0.05 / config.j.abs().max(f64::MIN_POSITIVE);
    }
    if let Some(v) = parse_key::<f64>(&map, "t_max").map_err(CliError::Usage)? {
        config.t_max = v;
    }
    if let Some(v) = overrides.t_max {
        config.t_max = v;
    }
    if let Some(v) = parse_key::<f64>(&map, "cutoff").map_err(CliError::Usage)? {
        config.cutoff = v;
    }
    if let Some(v) = overrides.cutoff {
        config.cutoff = v;
    }
    if let Some(raw) = map.get("chi_max") {
        config.chi_max = parse_chi_max(raw).map_err(CliError::Usage)?;
    }
    if let Some(raw) = &overrides.chi_max {
        config.chi_max = parse_chi_max(raw).map_err(CliError::Usage)?;
    }
    if let Some(v) = parse_key::<f64>(&map, "bp_tol").map_err(CliError::Usage)? {
        config.bp_tol = v;
    }
    if let Some(v) = overrides.bp_tol {
        config.bp_tol = v;
    }
    if let Some(v) = parse_key::<usize>(&map, "bp_max_iters").map_err(CliError::Usage)? {
        config.bp_max_iters = v;
    }
    if let Some(v) = overrides.bp_max_iters {
        config.bp_max_iters = v;
    }
    if let Some(v) = parse_key::<usize>(&map, "sample_every").map_err(CliError::Usage)? {
        config.sample_every = v;
    }
    if let Some(v) = overrides.sample_every {
        config.sample_every = v;
    }
    if let Some(v) = parse_key::<usize>(&map, "correlator_dmax").map_err(CliError::Usage)? {
        config.correlator_dmax = v;
    }
    if let Some(v) = overrides.correlator_dmax {
        config.correlator_dmax = v;
    }
    let mut out_dir = PathBuf::from("hexhadron_out");
    if let Some(v) = map.get("out_dir") {
        out_dir = PathBuf::from(v);
    }
    if let Some(v) = &overrides.out_dir {
        out_dir = v.clone();
    }
    config.out_dir = Some(out_dir.clone());
    config
        .validate()
        .map_err(|e| CliError::Usage(format!("{}", e)))?;
    Ok((config, out_dir))
}

fn config_echo(config: &QuenchConfig) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    map.insert("j".into(), fmt_f64(config.j));
    map.insert("h".into(), fmt_f64(config.h));
    map.insert("initial_state".into(), config.initial_state.to_string());
    map.insert("dt".into(), fmt_f64(config.dt));
    map.insert("t_max".into(), fmt_f64(config.t_max));
    map.insert("cutoff".into(), fmt_f64(config.cutoff));
    map.insert(
        "chi_max".into(),
        config.chi_max.map_or("unlimited".into(), |v| v.to_string()),
    );
    map.insert("bp_tol".into(), fmt_f64(config.bp_tol));
    map.insert("bp_max_iters".into(), config.bp_max_iters.to_string());
    map.insert("sample_every".into(), config.sample_every.to_string());
    map.insert("correlator_dmax".into(), config.correlator_dmax.to_string());
    map.insert(
        "out_dir".into(),
        config
            .out_dir
            .as_ref()
            .map_or(String::new(), |p| p.display().to_string()),
    );
    map
}

pub const TIMESERIES_HEADER: &str =
    "t,mz_A,mz_B,mx_A,mx_B,my_A,my_B,s,chi_max,discarded_weight,bp_iters";

/// Serialises a time series in the fixed column order.
pub fn timeseries_to_csv(series: &TimeSeries) -> String {
    let mut out = String::from(TIMESERIES_HEADER);
    out.push('\n');
    for r in &series.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(r.t),
            fmt_f64(r.mz_a),
            fmt_f64(r.mz_b),
            fmt_f64(r.mx_a),
            fmt_f64(r.mx_b),
            fmt_f64(r.my_a),
            fmt_f64(r.my_b),
            fmt_f64(r.s),
            r.max_bond,
            fmt_f64(r.cum_discarded),
            r.bp_iters
        );
    }
    out
}

/// Parses a time series CSV back; the inverse of [`timeseries_to_csv`].
pub fn timeseries_from_csv(text: &str) -> Result<TimeSeries, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    if header.trim() != TIMESERIES_HEADER {
        return Err(format!("unexpected header `{}`", header));
    }
    let mut series = TimeSeries::default();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 11 {
            return Err(format!("line {}: expected 11 columns, got {}", lineno + 2, cols.len()));
        }
        let f = |i: usize| -> Result<f64, String> {
            cols[i]
                .parse::<f64>()
                .map_err(|e| format!("line {}: column {}: {}", lineno + 2, i + 1, e))
        };
        series.rows.push(TimeSeriesRow {
            t: f(0)?,
            mz_a: f(1)?,
            mz_b: f(2)?,
            mx_a: f(3)?,
            mx_b: f(4)?,
            my_a: f(5)?,
            my_b: f(6)?,
            s: f(7)?,
            max_bond: cols[8]
                .parse::<usize>()
                .map_err(|e| format!("line {}: column 9: {}", lineno + 2, e))?,
            cum_discarded: f(9)?,
            bp_iters: cols[10]
                .parse::<usize>()
                .map_err(|e| format!("line {}: column 11: {}", lineno + 2, e))?,
        });
    }
    Ok(series)
}

pub const CORRELATOR_HEADER: &str = "t,start_sublattice,d,C";

pub fn correlators_to_csv(series: &TimeSeries) -> String {
    let mut out = String::from(CORRELATOR_HEADER);
    out.push('\n');
    for r in &series.correlators {
        let tag = match r.start {
            Sublattice::A => "A",
            Sublattice::B => "B",
        };
        let _ = writeln!(out, "{},{},{},{}", fmt_f64(r.t), tag, r.d, fmt_f64(r.value));
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::Numerical(format!("cannot create {}: {}", parent.display(), e)))?;
    }
    fs::write(path, contents)
        .map_err(|e| CliError::Numerical(format!("cannot write {}: {}", path.display(), e)))
}

fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339()
}

fn map_run_error(e: crate::evolve::EvolveError) -> CliError {
    match e {
        crate::evolve::EvolveError::InvalidConfig(msg) => CliError::Usage(msg),
        other => CliError::Numerical(format!("{}", other)),
    }
}

/// Runs a quench and writes timeseries.csv, correlators.csv (when enabled)
/// and manifest.json into `out_dir`.
fn run_quench_to_dir(config: &QuenchConfig, out_dir: &Path) -> Result<(), CliError> {
    let started_at = now_rfc3339();
    let series = run_quench(config).map_err(map_run_error)?;

    let ts_path = out_dir.join("timeseries.csv");
    write_file(&ts_path, &timeseries_to_csv(&series))?;
    let mut outputs = vec![ts_path.display().to_string()];
    if config.correlator_dmax > 0 {
        let corr_path = out_dir.join("correlators.csv");
        write_file(&corr_path, &correlators_to_csv(&series))?;
        outputs.push(corr_path.display().to_string());
    }

    let manifest = RunManifest {
        config: config_echo(config),
        started_at,
        finished_at: now_rfc3339(),
        build: build_id(),
        outputs,
        warnings: series.warnings.clone(),
    };
    let manifest_path = out_dir.join("manifest.json");
    write_file(
        &manifest_path,
        &serde_json::to_string_pretty(&manifest).expect("manifest serialises"),
    )?;
    for w in &series.warnings {
        eprintln!("warning: {}", w);
    }
    println!("wrote {}", ts_path.display());
    Ok(())
}

fn cmd_quench(args: &QuenchArgs) -> Result<(), CliError> {
    let (config, out_dir) = assemble_config(args.config.as_deref(), &args.overrides)?;
    run_quench_to_dir(&config, &out_dir)
}

/// Masses plus differences in the documented two-block CSV layout.
pub fn masses_csv(j: f64, h: f64) -> Result<String, String> {
    let spectrum = quasiparticle_masses(j, h).map_err(|e| format!("{}", e))?;
    let mut out = String::from("index,mass\n");
    for (i, m) in spectrum.masses.iter().enumerate() {
        let _ = writeln!(out, "{},{}", i + 1, fmt_f64(*m));
    }
    out.push_str("i,j,abs_difference\n");
    for (i, j, d) in spectrum.differences() {
        let _ = writeln!(out, "{},{},{}", i, j, fmt_f64(d));
    }
    Ok(out)
}

fn cmd_masses(args: &MassesArgs) -> Result<(), CliError> {
    let csv = masses_csv(args.j, args.h).map_err(CliError::Usage)?;
    match &args.out {
        Some(path) => write_file(path, &csv)?,
        None => print!("{}", csv),
    }
    Ok(())
}

fn cmd_spectrum(args: &SpectrumArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.series).map_err(|e| {
        CliError::Usage(format!("cannot read series {}: {}", args.series.display(), e))
    })?;
    let series = timeseries_from_csv(&text).map_err(CliError::Usage)?;
    let channel: Channel = args.channel.parse().map_err(CliError::Usage)?;
    if !(args.threshold > 0.0 && args.threshold < 1.0) {
        return Err(CliError::Usage(format!(
            "threshold must lie in (0, 1), got {}",
            args.threshold
        )));
    }
    let spec = fft_spectrum(&series, channel, args.t_min, args.t_max, args.pad_factor)
        .map_err(|e| CliError::Usage(format!("{}", e)))?;
    let report = extract_peaks(&spec, args.threshold);
    let tol = args.tol.unwrap_or(report.omega_resolution);
    let masses = quasiparticle_masses(args.j, args.h)
        .map_err(|e| CliError::Usage(format!("{}", e)))?;
    let report = match_masses(report, &masses, tol);

    let mut spec_csv = String::from("omega,amp\n");
    for (w, a) in spec.omegas.iter().zip(spec.amps.iter()) {
        let _ = writeln!(spec_csv, "{},{}", fmt_f64(*w), fmt_f64(*a));
    }
    let spec_path = args.out_dir.join("spectrum.csv");
    write_file(&spec_path, &spec_csv)?;

    let mut peaks_csv = String::from("omega_peak,amplitude,model_line,delta\n");
    for p in &report.peaks {
        let (line, delta) = match (&p.matched, p.delta) {
            (Some(line), Some(d)) => (fmt_f64(line.omega), fmt_f64(d)),
            _ => (String::new(), String::new()),
        };
        let _ = writeln!(
            peaks_csv,
            "{},{},{},{}",
            fmt_f64(p.omega),
            fmt_f64(p.amplitude),
            line,
            delta
        );
    }
    let peaks_path = args.out_dir.join("peaks.csv");
    write_file(&peaks_path, &peaks_csv)?;
    println!("wrote {} and {}", spec_path.display(), peaks_path.display());
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), CliError> {
    let level: VerifyLevel = args.level.parse().map_err(CliError::Usage)?;
    let outcomes = run_verify(level);
    let mut all_ok = true;
    for o in &outcomes {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("{} {} - {}", tag, o.name, o.detail);
        all_ok &= o.passed;
    }
    if all_ok {
        println!("{} checks passed", outcomes.len());
        Ok(())
    } else {
        Err(CliError::Verify)
    }
}

fn parallelism_cap() -> usize {
    std::env::var("HEXHADRON_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let values: Vec<String> = args
        .values
        .split(',')
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        return Err(CliError::Usage("no sweep values given".into()));
    }
    let base_text = fs::read_to_string(&args.config).map_err(|e| {
        CliError::Usage(format!("cannot read config {}: {}", args.config.display(), e))
    })?;
    // validate early so a bad key fails before any run starts
    parse_config_text(&base_text).map_err(CliError::Usage)?;
    let known_key = [
        "j",
        "h",
        "initial_state",
        "dt",
        "t_max",
        "cutoff",
        "chi_max",
        "bp_tol",
        "bp_max_iters",
        "sample_every",
        "correlator_dmax",
    ]
    .contains(&args.key.as_str());
    if !known_key {
        return Err(CliError::Usage(format!("cannot sweep unknown key `{}`", args.key)));
    }

    // assemble one validated config per value up front
    let mut runs: Vec<(QuenchConfig, PathBuf, String)> = Vec::with_capacity(values.len());
    for value in &values {
        let run_dir = args.out_dir.join(format!("{}_{}", args.key, value));
        let mut text = base_text.clone();
        let _ = writeln!(text, "\n{} = {}", args.key, value);
        let _ = writeln!(text, "out_dir = {}", run_dir.display());
        let tmp = std::env::temp_dir().join(format!(
            "hexhadron_sweep_{}_{}.conf",
            std::process::id(),
            runs.len()
        ));
        fs::write(&tmp, &text)
            .map_err(|e| CliError::Numerical(format!("cannot write temp config: {}", e)))?;
        let assembled = assemble_config(Some(&tmp), &QuenchOverrides::default());
        let _ = fs::remove_file(&tmp);
        let (config, dir) = assembled?;
        runs.push((config, dir, value.clone()));
    }

    let cap = parallelism_cap().max(1);
    let mut failures: Vec<String> = Vec::new();
    for chunk in runs.chunks(cap) {
        let handles: Vec<_> = chunk
            .iter()
            .map(|(config, dir, value)| {
                let config = config.clone();
                let dir = dir.clone();
                let value = value.clone();
                std::thread::spawn(move || -> Result<(), String> {
                    run_quench_to_dir(&config, &dir).map_err(|e| {
                        format!("value {}: {}", value, e.message())
                    })
                })
            })
            .collect();
        for handle in handles {
            match handle.join() {
                Ok(Ok(())) => {}
                Ok(Err(msg)) => failures.push(msg),
                Err(_) => failures.push("sweep worker panicked".to_string()),
            }
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(failures.join("; ")))
    }
}

/// Parses argv and runs one subcommand, returning the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own help/version output with code 0
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Quench(args) => cmd_quench(args),
        Command::Masses(args) => cmd_masses(args),
        Command::Spectrum(args) => cmd_spectrum(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_round_trip() {
        let text = "# comment\nj = 1.0\nh = 0.2\nchi_max = unlimited\n\nt_max = 10\n";
        let map = parse_config_text(text).unwrap();
        assert_eq!(map["j"], "1.0");
        assert_eq!(map["chi_max"], "unlimited");
        assert_eq!(map.len(), 4);
    }

    #[test]
    fn unknown_config_key_is_named() {
        let err = parse_config_text("jj = 1.0\n").unwrap_err();
        assert!(err.contains("jj"), "{}", err);
    }

    #[test]
    fn timeseries_csv_round_trip() {
        let mut series = TimeSeries::default();
        for k in 0..5 {
            series.rows.push(TimeSeriesRow {
                t: k as f64 * 0.05,
                mz_a: (k as f64).sin(),
                mz_b: -0.25,
                mx_a: 1.0 / 3.0,
                mx_b: 0.0,
                my_a: 1e-17,
                my_b: -1.0,
                s: 0.125,
                max_bond: k + 1,
                cum_discarded: 1e-13 * k as f64,
                bp_iters: 3 * k,
            });
        }
        let csv = timeseries_to_csv(&series);
        let back = timeseries_from_csv(&csv).unwrap();
        assert_eq!(back.rows.len(), 5);
        for (a, b) in series.rows.iter().zip(back.rows.iter()) {
            assert_eq!(a.t.to_bits(), b.t.to_bits());
            assert_eq!(a.mz_a.to_bits(), b.mz_a.to_bits());
            assert_eq!(a.my_a.to_bits(), b.my_a.to_bits());
            assert_eq!(a.max_bond, b.max_bond);
            assert_eq!(a.bp_iters, b.bp_iters);
        }
    }

    #[test]
    fn masses_csv_shape() {
        let csv = masses_csv(1.0, 0.2).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 5 + 1 + 10);
        assert_eq!(lines[0], "index,mass");
        assert_eq!(lines[6], "i,j,abs_difference");
    }

    #[test]
    fn masses_are_even_in_h() {
        let plus = masses_csv(1.0, 0.2).unwrap();
        let minus = masses_csv(1.0, -0.2).unwrap();
        assert_eq!(plus, minus);
    }
}
