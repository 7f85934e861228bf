//! Potential surfaces, pulse events, schedules and the instantaneous
//! electronic rotation produced by an impulsive pulse.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::state::{self, Representation, VibronicState};

/// Physical parameters of the two-surface model (internal units, ħ = 1).
///
/// The excited surface is `V_E(x) = v_e0 - force*x + m*omega_e^2*x^2/2`, so a
/// positive `force` accelerates excited packets toward positive momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub mass: f64,
    pub omega: f64,
    pub force: f64,
    pub v_e0: f64,
    pub omega_e: f64,
    /// When false the propagator uses the linearized impulsive-limit
    /// Hamiltonian: no kinetic term, `V_G = 0`, `V_E = v_e0 - force*x`.
    pub kinetic_enabled: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { mass: 1.0, omega: 1.0, force: 3.0, v_e0: 0.0, omega_e: 0.0, kinetic_enabled: true }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::Params(format!("{what} = {v}")));
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return bad("mass must be positive, got", self.mass);
        }
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return bad("omega must be positive, got", self.omega);
        }
        if !(self.omega_e.is_finite() && self.omega_e >= 0.0) {
            return bad("omega_e must be non-negative, got", self.omega_e);
        }
        if !self.force.is_finite() {
            return bad("force must be finite, got", self.force);
        }
        if !self.v_e0.is_finite() {
            return bad("v_e0 must be finite, got", self.v_e0);
        }
        Ok(())
    }

    pub fn with_kinetic(self, kinetic_enabled: bool) -> Self {
        Self { kinetic_enabled, ..self }
    }

    pub fn sigma_x(&self) -> f64 {
        state::sigma_x(self.mass, self.omega)
    }

    pub fn sigma_p(&self) -> f64 {
        state::sigma_p(self.mass, self.omega)
    }

    pub fn potential_ground(&self, x: f64) -> f64 {
        0.5 * self.mass * self.omega * self.omega * x * x
    }

    pub fn potential_excited(&self, x: f64) -> f64 {
        self.v_e0 - self.force * x + 0.5 * self.mass * self.omega_e * self.omega_e * x * x
    }

    /// Ground potential seen by the propagator.
    pub fn effective_ground(&self, x: f64) -> f64 {
        if self.kinetic_enabled {
            self.potential_ground(x)
        } else {
            0.0
        }
    }

    /// Excited potential seen by the propagator.
    pub fn effective_excited(&self, x: f64) -> f64 {
        if self.kinetic_enabled {
            self.potential_excited(x)
        } else {
            self.v_e0 - self.force * x
        }
    }

    /// Decay coefficient `F^2 Omega / (2 m)` of the quartic echo law.
    pub fn echo_coefficient(&self) -> f64 {
        self.force * self.force * self.omega / (2.0 * self.mass)
    }

    /// Largest momentum a run of length `duration` can populate.
    pub fn momentum_band(&self, duration: f64) -> f64 {
        self.force.abs() * duration + 8.0 * self.sigma_p()
    }

    /// Default grid extent for a run of length `duration`: twice the larger of
    /// `6 sigma_x` plus the free-acceleration excursion `|F| T^2 / 2m`, with a
    /// 50% margin.
    pub fn auto_extent(&self, duration: f64) -> f64 {
        let excursion = self.force.abs() * duration * duration / (2.0 * self.mass);
        3.0 * (6.0 * self.sigma_x() + excursion)
    }

    /// Step-size bound: 1/20 of the fastest period among the vibrational
    /// frequencies and the kinetic phase rate of the populated momentum band.
    pub fn max_step(&self, duration: f64) -> f64 {
        let kinetic = if self.kinetic_enabled {
            let p = self.momentum_band(duration);
            p * p / (2.0 * self.mass)
        } else {
            0.0
        };
        let fastest = self.omega.max(self.omega_e).max(kinetic);
        2.0 * PI / (20.0 * fastest)
    }
}

pub fn potential_ground(params: &ModelParams, x: f64) -> f64 {
    params.potential_ground(x)
}

pub fn potential_excited(params: &ModelParams, x: f64) -> f64 {
    params.potential_excited(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseShape {
    Delta,
    /// Gaussian Rabi envelope with full width at half maximum `fwhm`.
    Gaussian { fwhm: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseEvent {
    pub t_center: f64,
    pub area: f64,
    pub phase: f64,
    pub shape: PulseShape,
}

impl PulseEvent {
    pub fn delta(t_center: f64, area: f64, phase: f64) -> Self {
        Self { t_center, area, phase, shape: PulseShape::Delta }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t_center.is_finite() {
            return Err(Error::Pulse(format!("center time {} not finite", self.t_center)));
        }
        if !(0.0..=2.0 * PI).contains(&self.area) {
            return Err(Error::Pulse(format!("area {} outside [0, 2pi]", self.area)));
        }
        if !self.phase.is_finite() {
            return Err(Error::Pulse(format!("phase {} not finite", self.phase)));
        }
        if let PulseShape::Gaussian { fwhm } = self.shape {
            if !(fwhm.is_finite() && fwhm > 0.0) {
                return Err(Error::Pulse(format!("fwhm must be positive, got {fwhm}")));
            }
        }
        Ok(())
    }

    /// Real Rabi envelope at time `t`; its time integral equals `area`.
    /// Zero for delta pulses.
    pub fn envelope(&self, t: f64) -> f64 {
        match self.shape {
            PulseShape::Delta => 0.0,
            PulseShape::Gaussian { fwhm } => {
                let a = 4.0 * LN_2 / (fwhm * fwhm);
                let d = t - self.t_center;
                self.area * (a / PI).sqrt() * (-a * d * d).exp()
            }
        }
    }

    /// Time interval outside which the envelope is treated as zero.
    pub fn support(&self) -> (f64, f64) {
        match self.shape {
            PulseShape::Delta => (self.t_center, self.t_center),
            PulseShape::Gaussian { fwhm } => (self.t_center - 4.0 * fwhm, self.t_center + 4.0 * fwhm),
        }
    }

    /// Complex Rabi field `envelope * exp(i phase)`.
    pub fn field(&self, t: f64) -> Complex64 {
        Complex64::from_polar(self.envelope(t), self.phase)
    }
}

/// Pulse sequence and time stepping for one propagation run.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub pulses: Vec<PulseEvent>,
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    pub record_stride: usize,
}

impl Schedule {
    /// Two identical pulses at `-tau` and `0` (so `t0 = 0`), running until
    /// `t_after` beyond the second pulse. The step is shrunk from `dt_max` so
    /// that `tau` is a whole number of steps, which puts both pulses and the
    /// echo time `+tau` on step boundaries.
    pub fn two_pulse(
        tau: f64,
        area: f64,
        phase: f64,
        shape: PulseShape,
        t_after: f64,
        dt_max: f64,
        record_stride: usize,
    ) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::Schedule(format!("delay must be positive, got {tau}")));
        }
        if !(dt_max.is_finite() && dt_max > 0.0) {
            return Err(Error::Schedule(format!("step must be positive, got {dt_max}")));
        }
        let steps = (tau / dt_max).ceil().max(1.0);
        let dt = tau / steps;
        let lead = match shape {
            PulseShape::Delta => 0.0,
            PulseShape::Gaussian { fwhm } => (4.0 * fwhm / dt).ceil() * dt,
        };
        let pulse = |t| PulseEvent { t_center: t, area, phase, shape };
        Ok(Self {
            pulses: vec![pulse(-tau), pulse(0.0)],
            t_start: -tau - lead,
            t_end: (t_after.max(0.0) / dt).ceil() * dt,
            dt,
            record_stride,
        })
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn n_steps(&self) -> usize {
        (self.duration() / self.dt).round() as usize
    }

    pub fn time_of(&self, step: usize) -> f64 {
        self.t_start + step as f64 * self.dt
    }

    /// Step boundary closest to `t`.
    pub fn snap(&self, t: f64) -> usize {
        ((t - self.t_start) / self.dt).round().max(0.0) as usize
    }

    /// Echo times `2 t_{k+1} - t_k` for consecutive pulse pairs.
    pub fn echo_times(&self) -> Vec<f64> {
        self.pulses.windows(2).map(|w| 2.0 * w[1].t_center - w[0].t_center).collect()
    }

    /// Structural checks that do not depend on the model.
    pub fn validate_structure(&self) -> Result<()> {
        let err = |m: String| Err(Error::Schedule(m));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return err(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_start.is_finite() && self.t_end.is_finite() && self.t_end > self.t_start) {
            return err(format!("empty time range [{}, {}]", self.t_start, self.t_end));
        }
        if self.record_stride == 0 {
            return err("record_stride must be at least 1".into());
        }
        for p in &self.pulses {
            p.validate()?;
            if p.t_center < self.t_start || p.t_center > self.t_end {
                return err(format!("pulse at {} outside [{}, {}]", p.t_center, self.t_start, self.t_end));
            }
        }
        if self.pulses.windows(2).any(|w| w[1].t_center <= w[0].t_center) {
            return err("pulses must be strictly ordered in time".into());
        }
        Ok(())
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        params.validate()?;
        self.validate_structure()?;
        let bound = params.max_step(self.duration());
        if self.dt > bound {
            return Err(Error::Schedule(format!("dt = {} exceeds the stability bound {bound}", self.dt)));
        }
        Ok(())
    }
}

/// Pointwise electronic rotation of area `phi` and phase `theta`.
pub(crate) fn rotate(g: &mut [Complex64], e: &mut [Complex64], phi: f64, theta: f64) {
    let c = (0.5 * phi).cos();
    let s = (0.5 * phi).sin();
    let to_g = Complex64::i() * Complex64::from_polar(s, theta);
    let to_e = Complex64::i() * Complex64::from_polar(s, -theta);
    for (a, b) in g.iter_mut().zip(e.iter_mut()) {
        let (ga, eb) = (*a, *b);
        *a = ga * c + to_g * eb;
        *b = to_e * ga + eb * c;
    }
}

/// Instantaneous pulse: `g' = cos(phi/2) g + i e^{i theta} sin(phi/2) e` and
/// `e' = i e^{-i theta} sin(phi/2) g + cos(phi/2) e` at every node.
pub fn apply_impulse(state: &VibronicState, phi: f64, theta: f64) -> Result<VibronicState> {
    state.require(Representation::Position)?;
    let mut out = state.clone();
    let (g, e) = out.surfaces_mut();
    rotate(g, e, phi, theta);
    Ok(out)
}
