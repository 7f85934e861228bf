//! Impulsive-limit model: between pulses the ground packet is frozen and the
//! excited packet is rigidly accelerated by the linear excited potential.
//! Everything here is exact for that Hamiltonian and serves as the oracle for
//! kinetic-off numeric propagation.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{apply_impulse, rotate, ModelParams, PulseEvent, PulseShape};
use crate::observables::{self, polarization};
use crate::state::{ground_gaussian, GaussianSpec, Representation, VibronicState};

/// Predicted echo intensity ratio from the quartic decay law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EchoPrediction {
    pub tau: f64,
    pub intensity_ratio: f64,
    pub coefficient: f64,
}

/// Multiplies the excited amplitudes (position representation) by the exact
/// impulsive-limit propagator `exp(-i (V_E0 - F x) dt)`.
pub(crate) fn accelerate_excited(grid: &Grid, excited: &mut [Complex64], dt: f64, params: &ModelParams) {
    let kick = params.force * dt;
    let offset = -params.v_e0 * dt;
    for (z, x) in excited.iter_mut().zip(grid.positions()) {
        *z *= Complex64::from_polar(1.0, offset + kick * x);
    }
}

/// Momentum-space shift evolution over `dt`: ground unchanged, excited
/// `psi_E(p) -> exp(-i V_E0 dt) psi_E(p - F dt)`. The shift is realized as a
/// position-space phase ramp, so it is not rounded to the momentum lattice.
pub fn shift_evolve(state: &VibronicState, dt: f64, params: &ModelParams) -> Result<VibronicState> {
    state.require(Representation::Momentum)?;
    if !(dt >= 0.0) {
        return Err(Error::NegativeDelay(dt));
    }
    let mut out = state.clone();
    if dt == 0.0 {
        return Ok(out);
    }
    let grid = state.grid().clone();
    let e = out.excited_mut();
    grid.inverse(e);
    accelerate_excited(&grid, e, dt, params);
    grid.forward(e);
    Ok(out)
}

/// Impulsive evolution of `initial` (position representation) through delta
/// pulses, ending at `t_end`. Pulses are taken as instantaneous regardless of
/// their declared shape. Returns a position-representation state.
pub fn evolve_impulsive(
    initial: &VibronicState,
    t_start: f64,
    pulses: &[PulseEvent],
    t_end: f64,
    params: &ModelParams,
) -> Result<VibronicState> {
    initial.require(Representation::Position)?;
    let grid = initial.grid().clone();
    let mut state = initial.clone();
    let mut t = t_start;
    for p in pulses {
        if p.t_center < t || p.t_center > t_end {
            return Err(Error::Schedule(format!("pulse at {} outside [{t}, {t_end}]", p.t_center)));
        }
        accelerate_excited(&grid, state.excited_mut(), p.t_center - t, params);
        let (g, e) = state.surfaces_mut();
        rotate(g, e, p.area, p.phase);
        t = p.t_center;
    }
    accelerate_excited(&grid, state.excited_mut(), t_end - t, params);
    Ok(state)
}

/// Two-pulse cat state with individual pulse phases; `t` is measured from the
/// second pulse. Returned in momentum representation.
pub fn cat_with_phases(
    phi: f64,
    theta1: f64,
    theta2: f64,
    tau: f64,
    t: f64,
    params: &ModelParams,
    grid: &Grid,
) -> Result<VibronicState> {
    if !(tau > 0.0) {
        return Err(Error::NegativeDelay(tau));
    }
    if !(t >= 0.0) {
        return Err(Error::Schedule(format!("time {t} precedes the second pulse")));
    }
    params.validate()?;
    let s = ground_gaussian(grid, params.mass, params.omega, 0.0, 0.0)?;
    let s = apply_impulse(&s, phi, theta1)?;
    let s = shift_evolve(&s.to_representation(Representation::Momentum), tau, params)?;
    let s = apply_impulse(&s.to_representation(Representation::Position), phi, theta2)?;
    shift_evolve(&s.to_representation(Representation::Momentum), t, params)
}

/// State after pulses of area `phi` at `t0 - tau` and `t0`, evaluated at
/// `t0 + t`, in momentum representation.
pub fn cat_after_two_pulses(phi: f64, tau: f64, t: f64, params: &ModelParams, grid: &Grid) -> Result<VibronicState> {
    cat_with_phases(phi, 0.0, 0.0, tau, t, params, grid)
}

/// Total polarization at the echo time `t0 + tau`.
pub fn echo_amplitude_impulsive(phi: f64, tau: f64, params: &ModelParams, grid: &Grid) -> Result<Complex64> {
    Ok(polarization(&cat_after_two_pulses(phi, tau, tau, params, grid)?))
}

/// Rephasing (echo-direction) component of the polarization at `t0 + tau`,
/// isolated by four-step cycling of the first pulse phase.
pub fn rephasing_amplitude_impulsive(phi: f64, tau: f64, params: &ModelParams, grid: &Grid) -> Result<Complex64> {
    let samples = observables::PHASE_CYCLE
        .iter()
        .map(|&theta| Ok(vec![polarization(&cat_with_phases(phi, theta, 0.0, tau, tau, params, grid)?)]))
        .collect::<Result<Vec<_>>>()?;
    Ok(observables::combine_phase_cycle(&samples)[0])
}

/// Quartic decay law `I/I0 = exp(-F^2 Omega tau^4 / (2 m))`.
pub fn predicted_echo_intensity(tau: f64, params: &ModelParams) -> Result<EchoPrediction> {
    if !(tau >= 0.0) {
        return Err(Error::NegativeDelay(tau));
    }
    let coefficient = params.echo_coefficient();
    Ok(EchoPrediction { tau, intensity_ratio: (-coefficient * tau.powi(4)).exp(), coefficient })
}

/// Delay at which the predicted intensity falls to `ratio`.
pub fn delay_for_ratio(ratio: f64, params: &ModelParams) -> Option<f64> {
    let c = params.echo_coefficient();
    (c > 0.0 && ratio > 0.0 && ratio <= 1.0).then(|| (-ratio.ln() / c).powf(0.25))
}

/// Weight of a displaced ground-state packet centered at momentum `center`
/// inside one surface's momentum amplitudes, by projection onto the
/// reference packet restricted to a window of +-3 sigma_p.
pub fn peak_weight(amplitudes: &[Complex64], center: f64, params: &ModelParams, grid: &Grid) -> Result<f64> {
    if amplitudes.len() != grid.n() {
        return Err(Error::Length { expected: grid.n(), found: amplitudes.len() });
    }
    let mut reference = crate::state::gaussian_amplitudes(grid, params.mass, params.omega, GaussianSpec { x0: 0.0, p0: center });
    grid.forward(&mut reference);
    let half = 3.0 * params.sigma_p();
    let (mut proj, mut norm) = (Complex64::default(), 0.0);
    for k in 0..grid.n() {
        if (grid.p(k) - center).abs() <= half {
            proj += reference[k].conj() * amplitudes[k];
            norm += reference[k].norm_sqr();
        }
    }
    if norm == 0.0 {
        return Err(Error::UnderResolved(format!("no momentum nodes within 3 sigma_p of {center}")));
    }
    Ok(proj.norm() / norm)
}

/// Declared-shape-independent view of a two-pulse schedule for comparisons.
pub fn impulsive_pulses(tau: f64, phi: f64, theta1: f64, theta2: f64) -> [PulseEvent; 2] {
    [
        PulseEvent { t_center: -tau, area: phi, phase: theta1, shape: PulseShape::Delta },
        PulseEvent { t_center: 0.0, area: phi, phase: theta2, shape: PulseShape::Delta },
    ]
}
