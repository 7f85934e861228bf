//! Acceptance criteria. Run with `cargo test --test acceptance -- --nocapture`
//! to see one PASS/FAIL line per criterion.

use std::f64::consts::PI;
use std::fs;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use catecho::analysis::{
    auto_window, fit_points, incoherent_control, sweep_experiment, validate_pipeline, Engine, ExperimentSpec,
    PulseSpec, RowFlag,
};
use catecho::analytic::{cat_with_phases, evolve_impulsive, peak_weight, predicted_echo_intensity};
use catecho::cli::cmd_sweep;
use catecho::config::RunConfig;
use catecho::model::{PulseEvent, Schedule};
use catecho::observables::detect_echo;
use catecho::propagator::{final_state, run_schedule};
use catecho::state::{ground_gaussian, Representation};
use catecho::{make_grid, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn verdict(n: u32, name: &str, pass: bool, detail: String) {
    println!("[criterion {n}] {} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

const DECAY_CONFIG: &str = r#"{
  "model": { "mass": 1.0, "omega": 1.0, "force": 6.0, "kinetic_enabled": true },
  "pulse": { "phi": 1.5707963267948966 },
  "grid": { "n": 4096 }
}"#;

struct SweepRun {
    _dir: TempDir,
    out: PathBuf,
    report: serde_json::Value,
    elapsed: Duration,
}

/// The full-engine decay sweep shared by criteria 4, 5 and 9.
fn decay_sweep() -> &'static SweepRun {
    static RUN: OnceLock<SweepRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let out = dir.path().join("first");
        let config = RunConfig::parse(DECAY_CONFIG).unwrap();
        let start = Instant::now();
        let report = cmd_sweep(&config, &None, Engine::Full, &out).unwrap();
        SweepRun { elapsed: start.elapsed(), _dir: dir, out, report }
    })
}

#[test]
fn criterion_1_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let phi = if rng.gen::<bool>() { PI / 3.0 } else { PI / 2.0 };
    let tau = rng.gen_range(1.0..2.0);
    let sp = 0.5_f64.sqrt();
    let force = rng.gen_range(6.0..9.0) * sp / tau;
    let params = ModelParams { force, v_e0: rng.gen_range(-2.0..2.0), kinetic_enabled: false, ..Default::default() };
    let (th1, th2) = (rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI));
    let dt = tau / 2000.0;
    let schedule = Schedule {
        pulses: vec![PulseEvent::delta(-tau, phi, th1), PulseEvent::delta(0.0, phi, th2)],
        t_start: -tau,
        t_end: 1.5 * tau,
        dt,
        record_stride: 5000,
    };
    assert_eq!(schedule.n_steps(), 5000);
    let grid = make_grid(4096, 40.0).unwrap();
    let start = Instant::now();
    let numeric = final_state(&params, &schedule, &grid).unwrap();
    let elapsed = start.elapsed();
    let s0 = ground_gaussian(&grid, 1.0, 1.0, 0.0, 0.0).unwrap();
    let oracle = evolve_impulsive(&s0, -tau, &schedule.pulses, 1.5 * tau, &params).unwrap();
    let dev = numeric.max_deviation(&oracle).unwrap();
    let pass = dev <= 1e-8 && elapsed < Duration::from_secs(1);
    verdict(
        1,
        "oracle equivalence",
        pass,
        format!(
            "phi = {phi:.4}, F tau = {:.2} sigma_p, max deviation {dev:.3e} (limit 1e-8), {:.3} s for 5000 steps at n = 4096",
            force * tau / sp,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_2_echo_existence_and_timing() {
    let params = ModelParams { force: 3.0, kinetic_enabled: false, ..Default::default() };
    let exp = ExperimentSpec::new(params, PulseSpec::default(), 2.0).resolve(&[]).unwrap();
    let schedule = exp.schedule().unwrap();
    let series = run_schedule(&params, &schedule, &exp.grid().unwrap()).unwrap();
    let m = detect_echo(&series, 0.0, 2.0).unwrap();
    let i = series.index_near(m.t_peak).unwrap();
    let a = |k: usize| series.polarization[k].norm();
    let local_max = a(i) >= a(i - 1) && a(i) >= a(i + 1);
    let expected = (PI / 4.0).sin().powi(3) * (PI / 4.0).cos();
    let amp = a(i);
    let pass = local_max && (m.t_peak - 2.0).abs() <= 2.0 * schedule.dt && (amp - 0.25).abs() <= 0.01 && !m.no_echo;
    verdict(
        2,
        "echo existence and timing",
        pass,
        format!(
            "t_peak = {} (t0 + tau = 2, dt = {}), |P| = {amp:.6} (expected {expected:.6} +- 0.01), local max {local_max}",
            m.t_peak, schedule.dt
        ),
    );
}

#[test]
fn criterion_3_cat_state_weights() {
    let params = ModelParams { force: 3.0, kinetic_enabled: false, ..Default::default() };
    let tau = 2.0;
    let grid = make_grid(4096, 60.0).unwrap();
    let cat = cat_with_phases(PI / 3.0, 0.0, 0.0, tau, 0.0, &params, &grid).unwrap();
    let w0 = peak_weight(cat.ground(), 0.0, &params, &grid).unwrap();
    let w1 = peak_weight(cat.ground(), params.force * tau, &params, &grid).unwrap();
    // the propagated state at t0 carries the same weights
    let schedule = Schedule {
        pulses: vec![PulseEvent::delta(-tau, PI / 3.0, 0.0), PulseEvent::delta(0.0, PI / 3.0, 0.0)],
        t_start: -tau,
        t_end: 0.0,
        dt: 0.01,
        record_stride: 10,
    };
    let numeric = final_state(&params, &schedule, &grid).unwrap().to_representation(Representation::Momentum);
    let n0 = peak_weight(numeric.ground(), 0.0, &params, &grid).unwrap();
    let n1 = peak_weight(numeric.ground(), params.force * tau, &params, &grid).unwrap();
    let pass = [w0, n0].iter().all(|w| (w - 0.75).abs() <= 1e-4) && [w1, n1].iter().all(|w| (w - 0.25).abs() <= 1e-4);
    verdict(
        3,
        "cat-state momentum weights",
        pass,
        format!("p = 0: {w0:.6} (numeric {n0:.6}), p = F tau: {w1:.6} (numeric {n1:.6}); expected 0.75 and 0.25 +- 1e-4"),
    );
}

#[test]
fn criterion_4_quartic_exponent() {
    let run = decay_sweep();
    let r = &run.report;
    let q = r["q"].as_f64().unwrap_or(f64::NAN);
    let sel = &r["model_selection"];
    let residual = |exp: f64| {
        sel["candidates"].as_array().unwrap().iter().find(|c| c["q"] == exp).unwrap()["residual"].as_f64().unwrap()
    };
    let (r1, r2, r4) = (residual(1.0), residual(2.0), residual(4.0));
    let margin = r1.min(r2) / r4;
    let rows = fs::read_to_string(run.out.join("sweep.csv")).unwrap().lines().count() - 1;
    let pass = (3.7..=4.3).contains(&q)
        && sel["winner"] == 4.0
        && margin >= 2.0
        && rows >= 8
        && r["rows_used"].as_u64() == Some(rows as u64)
        && run.elapsed < Duration::from_secs(120);
    verdict(
        4,
        "quartic exponent",
        pass,
        format!(
            "q = {q:.4} (window [3.7, 4.3]), residuals q1 {r1:.4} q2 {r2:.4} q4 {r4:.4} (margin {margin:.1}x), {rows} rows, {:.1} s",
            run.elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_5_decay_coefficient() {
    let run = decay_sweep();
    let r = &run.report;
    let c4 = r["c_fixed_q4"].as_f64().unwrap();
    let predicted = ModelParams { force: 6.0, ..Default::default() }.echo_coefficient();
    let ratio = c4 / predicted;
    let on_disk: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.out.join("fit.json")).unwrap()).unwrap();
    let verbatim = on_disk["ratio"].as_f64() == Some(ratio);
    let pass = (0.25..=4.0).contains(&ratio) && verbatim;
    verdict(
        5,
        "decay coefficient",
        pass,
        format!("c_fixed_q4 = {c4:.4}, F^2 Omega / 2m = {predicted}, ratio {ratio:.4} (band [0.25, 4]), in fit.json: {verbatim}"),
    );
}

#[test]
fn criterion_6_no_decay_without_kinetic_term() {
    let params = ModelParams { force: 6.0, kinetic_enabled: false, ..Default::default() };
    let taus = auto_window(&ModelParams { kinetic_enabled: true, ..params }, 10).unwrap();
    let exp = ExperimentSpec::new(params, PulseSpec::default(), taus[0]).resolve(&taus).unwrap();
    let sweep = sweep_experiment(&exp, &taus, Engine::Full).unwrap();
    let values: Vec<f64> = sweep.rows.iter().map(|r| r.intensity).collect();
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    let spread = (max - min) / max;
    let pass = spread < 1e-6 && sweep.rows.iter().all(|r| r.flag == RowFlag::Ok);
    verdict(
        6,
        "no decay with kinetic term off",
        pass,
        format!("relative spread {spread:.3e} over tau in [{:.4}, {:.4}] (limit 1e-6)", taus[0], taus[9]),
    );
}

#[test]
fn criterion_7_incoherent_control() {
    let params = ModelParams { force: 3.0, kinetic_enabled: false, ..Default::default() };
    let exp = ExperimentSpec::new(params, PulseSpec::default(), 2.0).resolve(&[]).unwrap();
    let c = incoherent_control(&exp).unwrap();
    verdict(
        7,
        "cat-state interference control",
        c.suppression >= 20.0,
        format!(
            "coherent peak {:.6e}, 64-phase incoherent peak {:.6e}, suppression {:.1}x (limit 20x)",
            c.coherent, c.incoherent, c.suppression
        ),
    );
}

#[test]
fn criterion_8_numerical_hygiene() {
    // norm over 10^4 steps with both pulses and the kinetic term
    let params = ModelParams { force: 3.0, ..Default::default() };
    let tau = 1.0;
    let dt = 2.6 * tau / 10_000.0;
    let schedule = Schedule::two_pulse(tau, PI / 2.0, 0.0, catecho::PulseShape::Delta, 1.6 * tau, dt, 1).unwrap();
    let grid = make_grid(4096, params.auto_extent(schedule.duration())).unwrap();
    let series = run_schedule(&params, &schedule, &grid).unwrap();
    let drift = series.norm.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max);
    let steps = schedule.n_steps();

    let exp = ExperimentSpec::new(params, PulseSpec::default(), 2.0).resolve(&[]).unwrap();
    let report = validate_pipeline(&exp);
    let fidelity = report.get("coherent_period").unwrap().value.unwrap();
    let factor = report.get("step_halving").unwrap().value.unwrap();

    let taus: Vec<f64> = (0..10).map(|i| 0.6 + 0.08 * i as f64).collect();
    let p = ModelParams { force: 1.0, mass: 1.0, omega: 1.0, ..Default::default() };
    let truth = p.echo_coefficient();
    let pts: Vec<(f64, f64)> =
        taus.iter().map(|&t| (t, predicted_echo_intensity(t, &p).unwrap().intensity_ratio)).collect();
    let fit = fit_points(&pts).unwrap();
    let q_err = (fit.q.unwrap() - 4.0).abs();
    let c_err = ((fit.c - truth) / truth).abs();

    let pass = drift < 1e-9 && steps >= 10_000 && fidelity > 1.0 - 1e-6 && factor >= 3.5 && q_err < 1e-3 && c_err < 1e-6;
    verdict(
        8,
        "numerical hygiene",
        pass,
        format!(
            "norm drift {drift:.2e} over {steps} steps, period fidelity {fidelity:.12}, halving factor {factor:.3}, fit recovery |dq| {q_err:.1e} |dc/c| {c_err:.1e}"
        ),
    );
}

#[test]
fn criterion_9_determinism() {
    let first = decay_sweep();
    let second = first.out.with_file_name("second");
    let config = RunConfig::parse(DECAY_CONFIG).unwrap();
    cmd_sweep(&config, &None, Engine::Full, &second).unwrap();
    let same = |name: &str| fs::read(first.out.join(name)).unwrap() == fs::read(second.join(name)).unwrap();
    let pass = same("sweep.csv") && same("fit.json");
    verdict(9, "determinism", pass, format!("sweep.csv identical: {}, fit.json identical: {}", same("sweep.csv"), same("fit.json")));
}
