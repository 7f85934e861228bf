//! JSON experiment configuration: parsing, unit presets, defaults and
//! resolution into an [`Experiment`].

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analysis::{Experiment, ExperimentSpec, PulseSpec};
use crate::model::{ModelParams, PulseEvent, PulseShape};
use crate::units::{UnitSystem, AMU_SI, ANGSTROM, EV_SI, FEMTOSECOND, HBAR_SI};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// `hbar = m = Omega = 1` style inputs, used as is.
    #[default]
    Dimensionless,
    /// Times in fs, angular frequencies in rad/fs, masses in amu, forces in
    /// eV/Å, energies in eV, lengths in Å, momenta in ħ/Å.
    Femtosecond,
}

/// Multiplicative factors from preset units to internal units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scales {
    pub time: f64,
    pub length: f64,
    pub mass: f64,
    pub frequency: f64,
    pub force: f64,
    pub energy: f64,
    pub momentum: f64,
}

impl Preset {
    pub fn scales(self) -> Scales {
        match self {
            Preset::Dimensionless => {
                Scales { time: 1.0, length: 1.0, mass: 1.0, frequency: 1.0, force: 1.0, energy: 1.0, momentum: 1.0 }
            }
            Preset::Femtosecond => {
                let u = UnitSystem::femtosecond();
                Scales {
                    time: u.time_to_internal(FEMTOSECOND),
                    length: u.length_to_internal(ANGSTROM),
                    mass: u.mass_to_internal(AMU_SI),
                    frequency: u.frequency_to_internal(1.0 / FEMTOSECOND),
                    force: u.force_to_internal(EV_SI / ANGSTROM),
                    energy: u.energy_to_internal(EV_SI),
                    momentum: HBAR_SI / ANGSTROM / u.momentum_unit(),
                }
            }
        }
    }

    fn defaults(self) -> Defaults {
        match self {
            Preset::Dimensionless => Defaults { mass: 1.0, omega: 1.0, force: 3.0, tau: 2.0 },
            // illustrative molecular numbers: tau = 20 fs, Omega tau = 0.4
            Preset::Femtosecond => Defaults { mass: 127.0, omega: 0.02, force: 3.0, tau: 20.0 },
        }
    }
}

struct Defaults {
    mass: f64,
    omega: f64,
    force: f64,
    tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

/// A number or the string `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AutoOr {
    Auto(AutoTag),
    Value(f64),
}

impl Default for AutoOr {
    fn default() -> Self {
        AutoOr::Auto(AutoTag::Auto)
    }
}

impl AutoOr {
    pub fn value(self) -> Option<f64> {
        match self {
            AutoOr::Auto(_) => None,
            AutoOr::Value(v) => Some(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeName {
    #[default]
    Delta,
    Gaussian,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub mass: Option<f64>,
    pub omega: Option<f64>,
    pub force: Option<f64>,
    pub v_e0: Option<f64>,
    pub omega_e: Option<f64>,
    pub kinetic_enabled: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub phi: Option<f64>,
    pub theta: Option<f64>,
    pub shape: Option<ShapeName>,
    pub fwhm: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: Option<usize>,
    pub extent: Option<AutoOr>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    /// End of the run after the second pulse.
    pub t_end: Option<AutoOr>,
    pub dt: Option<AutoOr>,
    pub record_stride: Option<usize>,
}

/// Experiment configuration as written by the user. Every field may be
/// omitted; [`RunConfig::resolved`] materializes the defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub units: Option<Preset>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub pulse: PulseConfig,
    pub tau: Option<f64>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
}

/// 1-based line of the first occurrence of `"key"` used as an object key.
pub fn key_line(text: &str, key: &str) -> Option<usize> {
    let quoted = format!("\"{key}\"");
    text.lines().position(|line| {
        line.match_indices(&quoted).any(|(i, _)| line[i + quoted.len()..].trim_start().starts_with(':'))
    })
    .map(|i| i + 1)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = serde_json::from_str(text)
            .map_err(|e| ConfigError { line: (e.line() > 0).then_some(e.line()), message: strip_position(&e) })?;
        config.check().map_err(|(key, message)| ConfigError { line: key_line(text, key), message })?;
        Ok(config)
    }

    pub fn preset(&self) -> Preset {
        self.units.unwrap_or_default()
    }

    /// Copy with every default filled in. `auto` entries are kept.
    pub fn resolved(&self) -> RunConfig {
        let preset = self.preset();
        let d = preset.defaults();
        let m = &self.model;
        let shape = self.pulse.shape.unwrap_or_default();
        RunConfig {
            units: Some(preset),
            model: ModelConfig {
                mass: Some(m.mass.unwrap_or(d.mass)),
                omega: Some(m.omega.unwrap_or(d.omega)),
                force: Some(m.force.unwrap_or(d.force)),
                v_e0: Some(m.v_e0.unwrap_or(0.0)),
                omega_e: Some(m.omega_e.unwrap_or(0.0)),
                kinetic_enabled: Some(m.kinetic_enabled.unwrap_or(true)),
            },
            pulse: PulseConfig {
                phi: Some(self.pulse.phi.unwrap_or(PI / 2.0)),
                theta: Some(self.pulse.theta.unwrap_or(0.0)),
                shape: Some(shape),
                fwhm: self.pulse.fwhm,
            },
            tau: Some(self.tau.unwrap_or(d.tau)),
            grid: GridConfig {
                n: Some(self.grid.n.unwrap_or(crate::analysis::DEFAULT_POINTS)),
                extent: Some(self.grid.extent.unwrap_or_default()),
            },
            schedule: ScheduleConfig {
                t_end: Some(self.schedule.t_end.unwrap_or_default()),
                dt: Some(self.schedule.dt.unwrap_or_default()),
                record_stride: Some(self.schedule.record_stride.unwrap_or(1)),
            },
        }
    }

    /// Field-level validation; returns the offending key with the message.
    fn check(&self) -> Result<(), (&'static str, String)> {
        let r = self.resolved();
        let positive = |key: &'static str, v: Option<f64>| match v {
            Some(v) if !(v.is_finite() && v > 0.0) => Err((key, format!("{key} must be positive, got {v}"))),
            _ => Ok(()),
        };
        let finite = |key: &'static str, v: Option<f64>| match v {
            Some(v) if !v.is_finite() => Err((key, format!("{key} must be finite, got {v}"))),
            _ => Ok(()),
        };
        positive("mass", r.model.mass)?;
        positive("omega", r.model.omega)?;
        finite("force", r.model.force)?;
        finite("v_e0", r.model.v_e0)?;
        if let Some(w) = r.model.omega_e {
            if !(w.is_finite() && w >= 0.0) {
                return Err(("omega_e", format!("omega_e must be non-negative, got {w}")));
            }
        }
        let phi = r.pulse.phi.unwrap_or_default();
        if !(0.0..=2.0 * PI).contains(&phi) {
            return Err(("phi", format!("phi must lie in [0, 2 pi], got {phi}")));
        }
        finite("theta", r.pulse.theta)?;
        match (r.pulse.shape, r.pulse.fwhm) {
            (Some(ShapeName::Gaussian), None) => return Err(("shape", "gaussian pulses need fwhm".into())),
            (Some(ShapeName::Delta), Some(_)) => return Err(("fwhm", "fwhm is only valid with shape gaussian".into())),
            _ => {}
        }
        positive("fwhm", r.pulse.fwhm)?;
        positive("tau", r.tau)?;
        let n = r.grid.n.unwrap_or_default();
        if n < crate::grid::MIN_POINTS || !n.is_power_of_two() {
            return Err(("n", format!("n must be a power of two >= {}, got {n}", crate::grid::MIN_POINTS)));
        }
        positive("extent", r.grid.extent.and_then(AutoOr::value))?;
        positive("t_end", r.schedule.t_end.and_then(AutoOr::value))?;
        positive("dt", r.schedule.dt.and_then(AutoOr::value))?;
        if r.schedule.record_stride == Some(0) {
            return Err(("record_stride", "record_stride must be at least 1".into()));
        }
        Ok(())
    }

    /// Model parameters in internal units.
    pub fn params(&self) -> ModelParams {
        let r = self.resolved();
        let s = r.preset().scales();
        let m = r.model;
        ModelParams {
            mass: m.mass.unwrap_or_default() * s.mass,
            omega: m.omega.unwrap_or_default() * s.frequency,
            force: m.force.unwrap_or_default() * s.force,
            v_e0: m.v_e0.unwrap_or_default() * s.energy,
            omega_e: m.omega_e.unwrap_or_default() * s.frequency,
            kinetic_enabled: m.kinetic_enabled.unwrap_or(true),
        }
    }

    /// Delay in internal units.
    pub fn tau(&self) -> f64 {
        self.resolved().tau.unwrap_or_default() * self.preset().scales().time
    }

    pub fn spec(&self) -> ExperimentSpec {
        let r = self.resolved();
        let s = r.preset().scales();
        let shape = match r.pulse.shape.unwrap_or_default() {
            ShapeName::Delta => PulseShape::Delta,
            ShapeName::Gaussian => PulseShape::Gaussian { fwhm: r.pulse.fwhm.unwrap_or_default() * s.time },
        };
        ExperimentSpec {
            params: self.params(),
            pulse: PulseSpec { phi: r.pulse.phi.unwrap_or_default(), theta: r.pulse.theta.unwrap_or_default(), shape },
            tau: self.tau(),
            n: r.grid.n.unwrap_or_default(),
            extent: r.grid.extent.and_then(AutoOr::value).map(|v| v * s.length),
            dt: r.schedule.dt.and_then(AutoOr::value).map(|v| v * s.time),
            t_end: r.schedule.t_end.and_then(AutoOr::value).map(|v| v * s.time),
            record_stride: r.schedule.record_stride.unwrap_or(1),
        }
    }

    /// Resolves the experiment and validates it against the model-level
    /// invariants.
    pub fn experiment(&self, sweep_taus: &[f64]) -> Result<Experiment, ConfigError> {
        let spec = self.spec();
        let exp = spec.resolve(sweep_taus).map_err(|e| ConfigError { line: None, message: e.to_string() })?;
        let probe = PulseEvent { t_center: 0.0, area: exp.pulse.phi, phase: exp.pulse.theta, shape: exp.pulse.shape };
        probe.validate().map_err(|e| ConfigError { line: None, message: e.to_string() })?;
        exp.grid().map_err(|e| ConfigError { line: None, message: e.to_string() })?;
        exp.schedule().map_err(|e| ConfigError { line: None, message: e.to_string() })?;
        Ok(exp)
    }

    /// The resolved config with `auto` entries replaced by the values chosen
    /// for `exp`, expressed in the preset's units.
    pub fn echo(&self, exp: &Experiment) -> RunConfig {
        let mut r = self.resolved();
        let s = r.preset().scales();
        r.grid.n = Some(exp.n);
        r.grid.extent = Some(AutoOr::Value(exp.extent / s.length));
        r.schedule.dt = Some(AutoOr::Value(exp.dt / s.time));
        r.schedule.t_end = Some(AutoOr::Value(exp.t_end / s.time));
        r
    }
}

/// serde_json appends " at line L column C"; the line is reported separately.
fn strip_position(e: &serde_json::Error) -> String {
    let text = e.to_string();
    match text.rfind(" at line ") {
        Some(i) => text[..i].to_string(),
        None => text,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let c = RunConfig::parse("{}").unwrap();
        let p = c.params();
        assert_eq!(p, ModelParams::default());
        assert_eq!(c.tau(), 2.0);
        let r = c.resolved();
        assert_eq!(r.pulse.phi, Some(PI / 2.0));
        assert_eq!(r.grid.n, Some(4096));
        assert_eq!(r.schedule.dt, Some(AutoOr::default()));
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let text = "{\n  \"model\": {\n    \"mass\": 1.0,\n    \"frce\": 2.0\n  }\n}";
        let err = RunConfig::parse(text).unwrap_err();
        assert_eq!(err.line, Some(4));
        assert!(err.message.contains("frce"), "{}", err.message);
        let err = RunConfig::parse("{\"tau\": 1,\n\"bogus\": 3}").unwrap_err();
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn invalid_values_report_their_line() {
        let text = "{\n  \"tau\": 1.0,\n  \"model\": {\n    \"mass\": -1.0\n  }\n}";
        let err = RunConfig::parse(text).unwrap_err();
        assert_eq!(err.line, Some(4));
        assert!(err.message.contains("mass"));
        let err = RunConfig::parse("{\"grid\": {\n\"n\": 1000}}").unwrap_err();
        assert_eq!(err.line, Some(2));
        let err = RunConfig::parse("{\"pulse\": {\"shape\": \"gaussian\"}}").unwrap_err();
        assert!(err.message.contains("fwhm"));
        assert!(RunConfig::parse("{\"pulse\": {\"phi\": 7.0}}").is_err());
        assert!(RunConfig::parse("{\"schedule\": {\"dt\": \"fast\"}}").is_err());
        assert!(RunConfig::parse("{\"units\": \"atomic\"}").is_err());
    }

    #[test]
    fn auto_or_number() {
        let c = RunConfig::parse(r#"{"grid": {"extent": 50.0}, "schedule": {"dt": "auto", "t_end": 3}}"#).unwrap();
        let spec = c.spec();
        assert_eq!(spec.extent, Some(50.0));
        assert_eq!(spec.dt, None);
        assert_eq!(spec.t_end, Some(3.0));
    }

    #[test]
    fn femtosecond_preset_conversions() {
        let c = RunConfig::parse(r#"{"units": "femtosecond"}"#).unwrap();
        let p = c.params();
        // 20 fs is two internal time units; Omega tau is preserved
        assert!((c.tau() - 2.0).abs() < 1e-12);
        assert!((p.omega * c.tau() - 0.4).abs() < 1e-12);
        assert!((p.mass - 127.0).abs() < 1e-12);
        let s = Preset::Femtosecond.scales();
        // 1 eV/Å times 1 Å is 1 eV
        assert!((s.force * s.length - s.energy).abs() < 1e-12 * s.energy);
        // hbar/Å over 1 amu is a velocity of hbar/(amu Å) ~ 0.635 Å/fs
        let v = s.momentum / s.mass; // internal velocity
        let v_a_per_fs = v / s.length * s.time;
        assert!((v_a_per_fs - HBAR_SI / (AMU_SI * ANGSTROM) * FEMTOSECOND / ANGSTROM).abs() < 1e-9);
    }

    #[test]
    fn echo_round_trips() {
        let c = RunConfig::parse(r#"{"model": {"force": 6.0}, "tau": 0.4}"#).unwrap();
        let exp = c.experiment(&[]).unwrap();
        let echo = c.echo(&exp);
        let text = serde_json::to_string_pretty(&echo).unwrap();
        let again = RunConfig::parse(&text).unwrap();
        assert_eq!(again.experiment(&[]).unwrap(), exp);
    }

    #[test]
    fn key_lines() {
        let text = "{\n \"tau\": 2,\n \"model\": {\"mass\": 1}\n}";
        assert_eq!(key_line(text, "tau"), Some(2));
        assert_eq!(key_line(text, "mass"), Some(3));
        assert_eq!(key_line(text, "omega"), None);
    }
}
