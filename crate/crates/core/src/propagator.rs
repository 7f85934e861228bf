//! Symmetric split-operator propagation of the two-surface Hamiltonian.
//!
//! One step is `exp(-iT dt/2) exp(-iV dt) exp(-iT dt/2)` with `T = p^2/2m`
//! diagonal in momentum and `V` diagonal in position on each surface. Delta
//! pulses act on step boundaries; finite pulses replace the potential factor
//! by the exact 2x2 exponential of the coupled potential matrix in the frame
//! rotating at `V_E0`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{rotate, ModelParams, PulseShape, Schedule};
use crate::observables::{combine_phase_cycle, polarization, EchoSignal, PolarizationTrace, PHASE_CYCLE};
use crate::state::{check_resolution, dot, ground_gaussian, Representation, VibronicState};

/// Edge probability above which a run is aborted.
pub const WRAPAROUND_LIMIT: f64 = 1e-8;

/// Observables recorded by [`run_schedule`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub polarization: Vec<Complex64>,
    pub pop_g: Vec<f64>,
    pub pop_e: Vec<f64>,
    pub x_g: Vec<Option<f64>>,
    pub p_g: Vec<Option<f64>>,
    pub x_e: Vec<Option<f64>>,
    pub p_e: Vec<Option<f64>>,
    pub norm: Vec<f64>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(&mut self, t: f64, state: &VibronicState) {
        let ex = state.expectations();
        self.times.push(t);
        self.polarization.push(polarization(state));
        self.pop_g.push(ex.pop_g);
        self.pop_e.push(ex.pop_e);
        self.x_g.push(ex.x_g);
        self.p_g.push(ex.p_g);
        self.x_e.push(ex.x_e);
        self.p_e.push(ex.p_e);
        self.norm.push(ex.pop_g + ex.pop_e);
    }

    /// Index of the sample closest to `t`.
    pub fn index_near(&self, t: f64) -> Option<usize> {
        (0..self.times.len()).min_by(|&a, &b| (self.times[a] - t).abs().total_cmp(&(self.times[b] - t).abs()))
    }
}

impl EchoSignal for TimeSeries {
    fn times(&self) -> &[f64] {
        &self.times
    }
    fn polarization(&self) -> &[Complex64] {
        &self.polarization
    }
}

/// Precomputed phase factors for repeated steps of one size.
#[derive(Debug, Clone)]
pub struct SplitStepper {
    grid: Grid,
    params: ModelParams,
    dt: f64,
    kinetic_half: Option<Vec<Complex64>>,
    potential_g: Vec<Complex64>,
    potential_e: Vec<Complex64>,
    v_g: Vec<f64>,
    v_e_rotating: Vec<f64>,
}

impl SplitStepper {
    pub fn new(params: &ModelParams, grid: &Grid, dt: f64) -> Result<Self> {
        params.validate()?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Schedule(format!("dt must be positive, got {dt}")));
        }
        let kinetic_half = params.kinetic_enabled.then(|| {
            grid.momenta()
                .map(|p| Complex64::from_polar(1.0, -p * p / (2.0 * params.mass) * 0.5 * dt))
                .collect()
        });
        let v_g: Vec<f64> = grid.positions().map(|x| params.effective_ground(x)).collect();
        let v_e: Vec<f64> = grid.positions().map(|x| params.effective_excited(x)).collect();
        let phase = |v: &[f64]| v.iter().map(|&v| Complex64::from_polar(1.0, -v * dt)).collect();
        Ok(Self {
            grid: grid.clone(),
            params: *params,
            dt,
            kinetic_half,
            potential_g: phase(&v_g),
            potential_e: phase(&v_e),
            v_e_rotating: v_e.iter().map(|v| v - params.v_e0).collect(),
            v_g,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn kinetic(&self, state: &mut VibronicState) {
        if let Some(k) = &self.kinetic_half {
            let grid = &self.grid;
            let (g, e) = state.surfaces_mut();
            for amp in [g, e] {
                grid.forward(amp);
                amp.iter_mut().zip(k).for_each(|(z, f)| *z *= f);
                grid.inverse(amp);
            }
        }
    }

    /// One uncoupled step; `state` must be in position representation.
    pub fn step(&self, state: &mut VibronicState) {
        debug_assert_eq!(state.representation(), Representation::Position);
        self.kinetic(state);
        let (g, e) = state.surfaces_mut();
        g.iter_mut().zip(&self.potential_g).for_each(|(z, f)| *z *= f);
        e.iter_mut().zip(&self.potential_e).for_each(|(z, f)| *z *= f);
        self.kinetic(state);
    }

    /// One step with Rabi field `field` in the rotating frame.
    pub fn rotating_coupled_step(&self, state: &mut VibronicState, field: Complex64) {
        self.kinetic(state);
        let (g, e) = state.surfaces_mut();
        coupled_potential(g, e, &self.v_g, &self.v_e_rotating, field, self.dt);
        self.kinetic(state);
    }

    /// Laboratory-frame step starting at time `t` with Rabi field `field`.
    pub fn coupled_step(&self, state: &mut VibronicState, field: Complex64, t: f64) {
        let v0 = self.params.v_e0;
        let into = Complex64::from_polar(1.0, v0 * t);
        state.excited_mut().iter_mut().for_each(|z| *z *= into);
        self.rotating_coupled_step(state, field);
        let out = Complex64::from_polar(1.0, -v0 * (t + self.dt));
        state.excited_mut().iter_mut().for_each(|z| *z *= out);
    }
}

/// Applies `exp(-i H dt)` with `H = [[v_g, -f/2], [-conj(f)/2, v_e]]` at each node.
fn coupled_potential(g: &mut [Complex64], e: &mut [Complex64], v_g: &[f64], v_e: &[f64], field: Complex64, dt: f64) {
    let w = -0.5 * field;
    let w_abs2 = w.norm_sqr();
    for j in 0..g.len() {
        let mean = 0.5 * (v_g[j] + v_e[j]);
        let half_split = 0.5 * (v_g[j] - v_e[j]);
        let omega = (half_split * half_split + w_abs2).sqrt();
        let (sin, cos) = (omega * dt).sin_cos();
        let sinc = if omega > 0.0 { sin / omega } else { dt };
        let global = Complex64::from_polar(1.0, -mean * dt);
        let i = Complex64::i();
        let u_gg = global * (cos - i * sinc * half_split);
        let u_ee = global * (cos + i * sinc * half_split);
        let u_ge = global * (-i * sinc * w);
        let u_eg = global * (-i * sinc * w.conj());
        let (a, b) = (g[j], e[j]);
        g[j] = u_gg * a + u_ge * b;
        e[j] = u_eg * a + u_ee * b;
    }
}

/// One split-operator step of size `dt`.
pub fn split_step(state: &VibronicState, dt: f64, params: &ModelParams) -> Result<VibronicState> {
    state.require(Representation::Position)?;
    let bound = params.max_step(dt);
    if dt > bound {
        return Err(Error::Schedule(format!("dt = {dt} exceeds the stability bound {bound}")));
    }
    let mut out = state.clone();
    SplitStepper::new(params, state.grid(), dt)?.step(&mut out);
    Ok(out)
}

/// One step with the coupled potential in the frame rotating at `V_E0`.
pub fn finite_pulse_step(state: &VibronicState, dt: f64, field: Complex64, params: &ModelParams) -> Result<VibronicState> {
    state.require(Representation::Position)?;
    let mut out = state.clone();
    SplitStepper::new(params, state.grid(), dt)?.rotating_coupled_step(&mut out, field);
    Ok(out)
}

/// Cross sums `sum conj(E_x) G_y` for a run split into two branches after the
/// first pulse: branch `a` holds what stayed on the ground surface, branch `b`
/// what was excited.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BranchTrace {
    pub times: Vec<f64>,
    pub p_aa: Vec<Complex64>,
    pub p_bb: Vec<Complex64>,
    pub p_ab: Vec<Complex64>,
    pub p_ba: Vec<Complex64>,
}

impl BranchTrace {
    /// Polarization of the coherent superposition `a + b`.
    pub fn coherent(&self) -> PolarizationTrace {
        self.with_relative_phases(&[0.0])
    }

    /// Polarization averaged over relative branch phases `chi`, i.e. of the
    /// mixture `a + exp(i chi) b`.
    pub fn with_relative_phases(&self, phases: &[f64]) -> PolarizationTrace {
        let n = phases.len() as f64;
        let values = (0..self.times.len())
            .map(|i| {
                phases
                    .iter()
                    .map(|&chi| {
                        let r = Complex64::from_polar(1.0, chi);
                        self.p_aa[i] + self.p_bb[i] + r * self.p_ab[i] + r.conj() * self.p_ba[i]
                    })
                    .sum::<Complex64>()
                    / n
            })
            .collect();
        PolarizationTrace { times: self.times.clone(), values }
    }
}

struct Plan {
    n_steps: usize,
    record: Vec<bool>,
    delta_at: Vec<Vec<usize>>,
}

fn plan(schedule: &Schedule) -> Plan {
    let n_steps = schedule.n_steps();
    let mut record: Vec<bool> = (0..=n_steps).map(|k| k % schedule.record_stride == 0).collect();
    record[n_steps] = true;
    let mut delta_at = vec![Vec::new(); n_steps + 1];
    for (i, p) in schedule.pulses.iter().enumerate() {
        let k = schedule.snap(p.t_center).min(n_steps);
        record[k] = true;
        if p.shape == PulseShape::Delta {
            delta_at[k].push(i);
        }
    }
    for t in schedule.echo_times() {
        if t <= schedule.t_end + 0.5 * schedule.dt {
            record[schedule.snap(t).min(n_steps)] = true;
        }
    }
    Plan { n_steps, record, delta_at }
}

fn check_edges(t: f64, states: &[VibronicState]) -> Result<()> {
    let edge_mass: f64 = states.iter().map(VibronicState::edge_mass).sum();
    if edge_mass > WRAPAROUND_LIMIT {
        return Err(Error::Wraparound { t, edge_mass });
    }
    Ok(())
}

/// Steps `states` through `schedule`. `on_pulse` runs after each delta pulse
/// and may restructure the bundle; `record` sees the post-pulse states at
/// each recording boundary.
fn drive(
    params: &ModelParams,
    schedule: &Schedule,
    grid: &Grid,
    mut states: Vec<VibronicState>,
    on_pulse: &mut dyn FnMut(usize, &mut Vec<VibronicState>),
    record: &mut dyn FnMut(f64, &[VibronicState]),
) -> Result<Vec<VibronicState>> {
    let stepper = SplitStepper::new(params, grid, schedule.dt)?;
    let plan = plan(schedule);
    let finite: Vec<_> = schedule.pulses.iter().filter(|p| p.shape != PulseShape::Delta).collect();
    for s in &mut states {
        s.transform_to(Representation::Position);
    }
    for k in 0..=plan.n_steps {
        let t = schedule.time_of(k);
        for &i in &plan.delta_at[k] {
            let p = &schedule.pulses[i];
            for s in states.iter_mut() {
                let (g, e) = s.surfaces_mut();
                rotate(g, e, p.area, p.phase);
            }
            on_pulse(i, &mut states);
        }
        if plan.record[k] {
            check_edges(t, &states)?;
            record(t, &states);
        }
        if k == plan.n_steps {
            break;
        }
        let mid = t + 0.5 * schedule.dt;
        let field: Complex64 = finite
            .iter()
            .filter(|p| {
                let (lo, hi) = p.support();
                mid >= lo && mid <= hi
            })
            .map(|p| p.field(mid))
            .sum();
        for s in states.iter_mut() {
            if field == Complex64::default() {
                stepper.step(s);
            } else {
                stepper.coupled_step(s, field, t);
            }
        }
    }
    Ok(states)
}

fn prepare(params: &ModelParams, schedule: &Schedule, grid: &Grid) -> Result<VibronicState> {
    schedule.validate(params)?;
    check_resolution(grid, params.mass, params.omega, 0.0)?;
    ground_gaussian(grid, params.mass, params.omega, 0.0, 0.0)
}

/// Full run from the ground vibronic state, recording every observable.
pub fn run_schedule(params: &ModelParams, schedule: &Schedule, grid: &Grid) -> Result<TimeSeries> {
    let initial = prepare(params, schedule, grid)?;
    let mut series = TimeSeries::default();
    drive(params, schedule, grid, vec![initial], &mut |_, _| {}, &mut |t, s| series.push(t, &s[0]))?;
    Ok(series)
}

/// Run recording only the polarization.
pub fn run_polarization(params: &ModelParams, schedule: &Schedule, grid: &Grid) -> Result<PolarizationTrace> {
    let initial = prepare(params, schedule, grid)?;
    let mut trace = PolarizationTrace::default();
    drive(params, schedule, grid, vec![initial], &mut |_, _| {}, &mut |t, s| {
        trace.times.push(t);
        trace.values.push(polarization(&s[0]));
    })?;
    Ok(trace)
}

/// State at the end of the schedule.
pub fn final_state(params: &ModelParams, schedule: &Schedule, grid: &Grid) -> Result<VibronicState> {
    let initial = prepare(params, schedule, grid)?;
    let mut out = drive(params, schedule, grid, vec![initial], &mut |_, _| {}, &mut |_, _| {})?;
    Ok(out.remove(0))
}

/// Evolves an arbitrary initial state through `schedule`.
pub fn evolve(params: &ModelParams, schedule: &Schedule, initial: &VibronicState) -> Result<VibronicState> {
    schedule.validate(params)?;
    evolve_unchecked(params, schedule, initial)
}

/// Like [`evolve`] but without the step-size bound, for convergence studies.
pub fn evolve_unchecked(
    params: &ModelParams,
    schedule: &Schedule,
    initial: &VibronicState,
) -> Result<VibronicState> {
    params.validate()?;
    schedule.validate_structure()?;
    let grid = initial.grid().clone();
    let mut out = drive(params, schedule, &grid, vec![initial.clone()], &mut |_, _| {}, &mut |_, _| {})?;
    Ok(out.remove(0))
}

/// Rephasing polarization from four runs with the first pulse phase cycled
/// through [`PHASE_CYCLE`].
pub fn run_rephasing(params: &ModelParams, schedule: &Schedule, grid: &Grid) -> Result<PolarizationTrace> {
    if schedule.pulses.is_empty() {
        return Err(Error::Schedule("phase cycling needs at least one pulse".into()));
    }
    let traces = PHASE_CYCLE
        .par_iter()
        .map(|&theta| {
            let mut s = schedule.clone();
            s.pulses[0].phase += theta;
            run_polarization(params, &s, grid)
        })
        .collect::<Result<Vec<_>>>()?;
    let times = traces[0].times.clone();
    let values = combine_phase_cycle(&traces.into_iter().map(|t| t.values).collect::<Vec<_>>());
    Ok(PolarizationTrace { times, values })
}

/// Run whose state is split after the first (delta) pulse into the
/// ground-path and excited-path branches, which are then propagated
/// separately.
pub fn run_branches(params: &ModelParams, schedule: &Schedule, grid: &Grid) -> Result<BranchTrace> {
    match schedule.pulses.first() {
        Some(p) if p.shape == PulseShape::Delta => {}
        _ => return Err(Error::Schedule("branch split needs a delta first pulse".into())),
    }
    let initial = prepare(params, schedule, grid)?;
    let mut trace = BranchTrace::default();
    let mut split = |i: usize, states: &mut Vec<VibronicState>| {
        if i == 0 {
            let mut a = states[0].clone();
            let mut b = states[0].clone();
            a.excited_mut().iter_mut().for_each(|z| *z = Complex64::default());
            b.ground_mut().iter_mut().for_each(|z| *z = Complex64::default());
            *states = vec![a, b];
        }
    };
    drive(params, schedule, grid, vec![initial], &mut split, &mut |t, s| {
        trace.times.push(t);
        if s.len() == 1 {
            let p = polarization(&s[0]);
            trace.p_aa.push(p);
            trace.p_bb.push(Complex64::default());
            trace.p_ab.push(Complex64::default());
            trace.p_ba.push(Complex64::default());
        } else {
            let (a, b) = (&s[0], &s[1]);
            let w = a.weight();
            trace.p_aa.push(dot(a.excited(), a.ground()) * w);
            trace.p_bb.push(dot(b.excited(), b.ground()) * w);
            trace.p_ab.push(dot(a.excited(), b.ground()) * w);
            trace.p_ba.push(dot(b.excited(), a.ground()) * w);
        }
    })?;
    Ok(trace)
}
