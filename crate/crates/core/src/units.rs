//! Conversion between SI quantities and the internal unit system, in which
//! the reduced Planck constant is exactly one.

use crate::error::{Error, Result};

pub const HBAR_SI: f64 = 1.054_571_817e-34;
pub const AMU_SI: f64 = 1.660_539_066_60e-27;
pub const EV_SI: f64 = 1.602_176_634e-19;
pub const FEMTOSECOND: f64 = 1e-15;
pub const ANGSTROM: f64 = 1e-10;

/// Scale factors from one internal unit to SI.
///
/// Time and mass are chosen freely; the length unit follows from requiring
/// `mass_unit * length_unit^2 / time_unit = hbar`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSystem {
    time_unit: f64,
    length_unit: f64,
    mass_unit: f64,
}

impl UnitSystem {
    pub fn new(time_unit: f64, mass_unit: f64) -> Result<Self> {
        if !(time_unit.is_finite() && time_unit > 0.0 && mass_unit.is_finite() && mass_unit > 0.0) {
            return Err(Error::Params(format!(
                "unit scales must be positive, got time {time_unit}, mass {mass_unit}"
            )));
        }
        let length_unit = (HBAR_SI * time_unit / mass_unit).sqrt();
        Ok(Self { time_unit, length_unit, mass_unit })
    }

    /// Identity scaling: every internal unit is one SI unit of ħ-derived size.
    pub fn dimensionless() -> Self {
        Self { time_unit: 1.0, length_unit: 1.0, mass_unit: 1.0 }
    }

    /// One internal time unit is 10 fs, one internal mass unit is 1 amu.
    pub fn femtosecond() -> Self {
        Self::new(10.0 * FEMTOSECOND, AMU_SI).expect("positive constants")
    }

    pub fn time_unit(&self) -> f64 {
        self.time_unit
    }

    pub fn length_unit(&self) -> f64 {
        self.length_unit
    }

    pub fn mass_unit(&self) -> f64 {
        self.mass_unit
    }

    pub fn energy_unit(&self) -> f64 {
        self.mass_unit * self.length_unit * self.length_unit / (self.time_unit * self.time_unit)
    }

    pub fn force_unit(&self) -> f64 {
        self.energy_unit() / self.length_unit
    }

    pub fn momentum_unit(&self) -> f64 {
        self.mass_unit * self.length_unit / self.time_unit
    }

    pub fn time_to_internal(&self, seconds: f64) -> f64 {
        seconds / self.time_unit
    }
    pub fn time_from_internal(&self, t: f64) -> f64 {
        t * self.time_unit
    }
    pub fn length_to_internal(&self, meters: f64) -> f64 {
        meters / self.length_unit
    }
    pub fn length_from_internal(&self, x: f64) -> f64 {
        x * self.length_unit
    }
    pub fn mass_to_internal(&self, kg: f64) -> f64 {
        kg / self.mass_unit
    }
    pub fn mass_from_internal(&self, m: f64) -> f64 {
        m * self.mass_unit
    }
    pub fn energy_to_internal(&self, joules: f64) -> f64 {
        joules / self.energy_unit()
    }
    pub fn energy_from_internal(&self, e: f64) -> f64 {
        e * self.energy_unit()
    }
    /// Angular frequency in rad/s.
    pub fn frequency_to_internal(&self, rad_per_s: f64) -> f64 {
        rad_per_s * self.time_unit
    }
    pub fn frequency_from_internal(&self, w: f64) -> f64 {
        w / self.time_unit
    }
    pub fn force_to_internal(&self, newtons: f64) -> f64 {
        newtons / self.force_unit()
    }
    pub fn force_from_internal(&self, f: f64) -> f64 {
        f * self.force_unit()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn hbar_is_one_internally() {
        let u = UnitSystem::femtosecond();
        assert!(rel(u.energy_unit() * u.time_unit(), HBAR_SI) < 1e-12);
    }

    #[test]
    fn femtosecond_preset_scales() {
        let u = UnitSystem::femtosecond();
        assert!(rel(u.time_to_internal(20.0 * FEMTOSECOND), 2.0) < 1e-12);
        // 1 amu, 10 fs => length ~0.252 Angstrom
        let l = u.length_unit() / ANGSTROM;
        assert!((l - 0.2520).abs() < 1e-3, "length unit {l}");
    }

    #[test]
    fn round_trips() {
        let u = UnitSystem::femtosecond();
        for v in [1e-30, 3.7e-15, 1.0, 42.0e5] {
            assert!(rel(u.time_from_internal(u.time_to_internal(v)), v) < 1e-12);
            assert!(rel(u.length_from_internal(u.length_to_internal(v)), v) < 1e-12);
            assert!(rel(u.mass_from_internal(u.mass_to_internal(v)), v) < 1e-12);
            assert!(rel(u.energy_from_internal(u.energy_to_internal(v)), v) < 1e-12);
            assert!(rel(u.frequency_from_internal(u.frequency_to_internal(v)), v) < 1e-12);
            assert!(rel(u.force_from_internal(u.force_to_internal(v)), v) < 1e-12);
        }
    }

    #[test]
    fn rejects_non_positive_scales() {
        assert!(UnitSystem::new(0.0, 1.0).is_err());
        assert!(UnitSystem::new(1.0, -1.0).is_err());
        assert!(UnitSystem::new(f64::NAN, 1.0).is_err());
    }
}
