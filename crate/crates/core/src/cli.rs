//! Command-line front end: `run`, `sweep`, `predict` and `validate`.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::analysis::{
    auto_window, compare_models, fit_decay, incoherent_control, sweep_experiment, validate_pipeline, Engine,
    DEFAULT_SWEEP_POINTS, MIN_FIT_ROWS,
};
use crate::analytic::{delay_for_ratio, predicted_echo_intensity};
use crate::config::{RunConfig, Scales};
use crate::observables::detect_echo;
use crate::propagator::run_schedule;

pub const TIMESERIES_HEADER: &str = "t,re_P,im_P,abs_P2,pop_g,pop_e,x_g,p_g,x_e,p_e,norm";
pub const SWEEP_HEADER: &str = "tau,intensity,t_peak,flag";
pub const PREDICT_HEADER: &str = "tau,intensity_ratio";
const PREDICT_POINTS: usize = 51;

#[derive(Debug, Parser)]
#[command(name = "catecho", version, about = "Two-pulse vibrational cat-state echo simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Propagate one two-pulse experiment and write timeseries.csv and echo.json.
    Run(CommonArgs),
    /// Sweep the delay and fit the echo decay; writes sweep.csv and fit.json.
    Sweep(CommonArgs),
    /// Tabulate the predicted decay law into predict.csv.
    Predict(CommonArgs),
    /// Run the self-checks; exit status 1 if any fails.
    Validate(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Comma-separated delays in the config's time unit.
    #[arg(long, value_delimiter = ',')]
    pub tau: Option<Vec<f64>>,
    #[arg(long, default_value = "full")]
    pub engine: Engine,
}

/// Failure classes, mapped to exit codes 2 and 1.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    RunConfig::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

fn write_out(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| failed(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    write_atomic(&path, bytes).map_err(|e| failed(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(failed)?;
    text.push('\n');
    write_out(dir, name, text.as_bytes())
}

/// Shortest round-trip decimal; scientific notation outside `[1e-5, 1e16)`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn format_opt(x: Option<f64>, scale: f64) -> String {
    x.map_or_else(|| "nan".to_string(), |v| format_float(v / scale))
}

fn single_tau(config: &RunConfig, tau: &Option<Vec<f64>>) -> Result<RunConfig, CliError> {
    let mut config = config.clone();
    match tau.as_deref() {
        None => {}
        Some([t]) if t.is_finite() && *t > 0.0 => config.tau = Some(*t),
        Some([t]) => return Err(CliError::Config(format!("tau must be positive, got {t}"))),
        Some(list) => return Err(CliError::Config(format!("expected one delay, got {}", list.len()))),
    }
    Ok(config)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EchoReport {
    pub t0: f64,
    pub tau: f64,
    pub t_peak: f64,
    pub intensity: f64,
    pub intensity_at_echo: f64,
    pub background: f64,
    pub no_echo: bool,
    pub rows: usize,
    pub config: RunConfig,
}

pub fn cmd_run(config: &RunConfig, tau: &Option<Vec<f64>>, out_dir: &Path) -> Result<EchoReport, CliError> {
    let config = single_tau(config, tau)?;
    let exp = config.experiment(&[]).map_err(|e| CliError::Config(e.to_string()))?;
    let s = config.preset().scales();
    let schedule = exp.schedule().map_err(|e| CliError::Config(e.to_string()))?;
    let grid = exp.grid().map_err(|e| CliError::Config(e.to_string()))?;
    let series = run_schedule(&exp.params, &schedule, &grid).map_err(failed)?;
    let m = detect_echo(&series, 0.0, exp.tau).map_err(failed)?;

    let mut csv = String::with_capacity(200 * series.len());
    csv.push_str(TIMESERIES_HEADER);
    csv.push('\n');
    for i in 0..series.len() {
        let p = series.polarization[i];
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{}",
            format_float(series.times[i] / s.time),
            format_float(p.re),
            format_float(p.im),
            format_float(p.norm_sqr()),
            format_float(series.pop_g[i]),
            format_float(series.pop_e[i]),
            format_opt(series.x_g[i], s.length),
            format_opt(series.p_g[i], s.momentum),
            format_opt(series.x_e[i], s.length),
            format_opt(series.p_e[i], s.momentum),
            format_float(series.norm[i]),
        );
    }
    write_out(out_dir, "timeseries.csv", csv.as_bytes())?;
    let report = EchoReport {
        t0: 0.0,
        tau: exp.tau / s.time,
        t_peak: m.t_peak / s.time,
        intensity: m.intensity,
        intensity_at_echo: m.intensity_at_echo,
        background: m.background,
        no_echo: m.no_echo,
        rows: series.len(),
        config: config.echo(&exp),
    };
    write_json(out_dir, "echo.json", &report)?;
    Ok(report)
}

fn sweep_taus(config: &RunConfig, tau: &Option<Vec<f64>>, s: &Scales) -> Result<Vec<f64>, CliError> {
    let taus = match tau {
        Some(list) => list.iter().map(|t| t * s.time).collect(),
        None => auto_window(&config.params(), DEFAULT_SWEEP_POINTS).map_err(|e| CliError::Config(e.to_string()))?,
    };
    if taus.len() < MIN_FIT_ROWS {
        return Err(CliError::Config(format!("too few rows: {} delays, need at least {MIN_FIT_ROWS}", taus.len())));
    }
    if taus.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(CliError::Config("delays must be positive".into()));
    }
    if taus.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Config("delays must be strictly increasing".into()));
    }
    Ok(taus)
}

pub fn cmd_sweep(
    config: &RunConfig,
    tau: &Option<Vec<f64>>,
    engine: Engine,
    out_dir: &Path,
) -> Result<serde_json::Value, CliError> {
    let s = config.preset().scales();
    let taus = sweep_taus(config, tau, &s)?;
    let exp = config.experiment(&taus).map_err(|e| CliError::Config(e.to_string()))?;
    let sweep = sweep_experiment(&exp, &taus, engine).map_err(failed)?;

    let mut csv = String::new();
    csv.push_str(SWEEP_HEADER);
    csv.push('\n');
    for r in &sweep.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            format_float(r.tau / s.time),
            format_float(r.intensity),
            format_float(r.t_peak / s.time),
            r.flag.as_str()
        );
    }
    write_out(out_dir, "sweep.csv", csv.as_bytes())?;

    let predicted = exp.params.echo_coefficient();
    let mut report = json!({
        "engine": engine,
        "units": config.preset(),
        "predicted_coefficient": predicted / s.time.powi(4),
        "warnings": sweep.warnings,
        "config": config.echo(&exp),
    });
    let fit = fit_decay(&sweep).and_then(|fit| Ok((fit, compare_models(&sweep)?)));
    let outcome = match &fit {
        Ok((fit, selection)) => {
            let q = fit.q.unwrap_or(4.0);
            let extra = json!({
                "I0": fit.i0,
                "c": fit.c * s.time.powf(q),
                "q": fit.q,
                "c_fixed_q4": fit.c_fixed_q4 * s.time.powi(4),
                "residual": fit.residual,
                "residual_fixed_q4": fit.residual_fixed_q4,
                "rows_used": fit.rows_used,
                "unimodal": fit.unimodal,
                "indeterminate": fit.indeterminate,
                "ratio": if predicted > 0.0 { Some(fit.c_fixed_q4 / predicted) } else { None },
                "model_selection": selection,
            });
            merge(&mut report, extra);
            Ok(())
        }
        Err(e) => {
            merge(&mut report, json!({ "error": e.to_string() }));
            Err(failed(e))
        }
    };
    write_json(out_dir, "fit.json", &report)?;
    outcome.map(|_| report)
}

fn merge(into: &mut serde_json::Value, extra: serde_json::Value) {
    if let (Some(a), serde_json::Value::Object(b)) = (into.as_object_mut(), extra) {
        a.extend(b);
    }
}

pub fn cmd_predict(config: &RunConfig, tau: &Option<Vec<f64>>, out_dir: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let s = config.preset().scales();
    let params = config.params();
    let taus: Vec<f64> = match tau {
        Some(list) => list.clone(),
        None => {
            let hi = delay_for_ratio(0.01, &params)
                .ok_or_else(|| CliError::Config("decay coefficient is zero; pass --tau".into()))?;
            (0..PREDICT_POINTS).map(|i| hi * i as f64 / (PREDICT_POINTS - 1) as f64 / s.time).collect()
        }
    };
    let rows = taus
        .iter()
        .map(|&t| {
            predicted_echo_intensity(t * s.time, &params)
                .map(|p| (t, p.intensity_ratio))
                .map_err(|e| CliError::Config(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = String::new();
    csv.push_str(PREDICT_HEADER);
    csv.push('\n');
    for (t, r) in &rows {
        let _ = writeln!(csv, "{},{}", format_float(*t), format_float(*r));
    }
    write_out(out_dir, "predict.csv", csv.as_bytes())?;
    Ok(rows)
}

pub fn cmd_validate(config: &RunConfig, tau: &Option<Vec<f64>>, out_dir: &Path) -> Result<serde_json::Value, CliError> {
    let config = single_tau(config, tau)?;
    let exp = config.experiment(&[]).map_err(|e| CliError::Config(e.to_string()))?;
    let report = validate_pipeline(&exp);
    let control = incoherent_control(&exp);
    let value = json!({
        "passed": report.passed(),
        "checks": report.checks,
        "incoherent_control": control.as_ref().ok(),
        "config": config.echo(&exp),
    });
    write_json(out_dir, "validate.json", &value)?;
    for c in &report.checks {
        let v = c.value.map_or_else(|| "-".to_string(), format_float);
        println!("{:<24} {:<4} {v} (limit {})", c.name, if c.passed { "ok" } else { "FAIL" }, format_float(c.limit));
    }
    if report.passed() {
        Ok(value)
    } else {
        Err(CliError::Failed("validation failed".into()))
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(a) => {
            let r = cmd_run(&load_config(&a.config)?, &a.tau, &a.out_dir)?;
            println!(
                "echo at t = {} intensity {}{}",
                format_float(r.t_peak),
                format_float(r.intensity),
                if r.no_echo { " (no echo)" } else { "" }
            );
        }
        Command::Sweep(a) => {
            let r = cmd_sweep(&load_config(&a.config)?, &a.tau, a.engine, &a.out_dir)?;
            println!("q = {} c_fixed_q4 = {} ratio = {}", r["q"], r["c_fixed_q4"], r["ratio"]);
        }
        Command::Predict(a) => {
            let rows = cmd_predict(&load_config(&a.config)?, &a.tau, &a.out_dir)?;
            println!("{} rows", rows.len());
        }
        Command::Validate(a) => {
            cmd_validate(&load_config(&a.config)?, &a.tau, &a.out_dir)?;
        }
    }
    Ok(())
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
