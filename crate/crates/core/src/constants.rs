//! Physical constants, ion species and RF drive parameters.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// CODATA 2018 values in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Reduced Planck constant (J s).
    pub hbar: f64,
    /// Elementary charge (C).
    pub elementary_charge: f64,
    /// Unified atomic mass unit (kg).
    pub atomic_mass_unit: f64,
    /// Proton mass (kg).
    pub proton_mass: f64,
    /// Vacuum permittivity (F/m).
    pub epsilon_0: f64,
}

/// The single table every module reads its constants from.
pub const CODATA: PhysicalConstants = PhysicalConstants {
    hbar: 1.054_571_817e-34,
    elementary_charge: 1.602_176_634e-19,
    atomic_mass_unit: 1.660_539_066_60e-27,
    proton_mass: 1.672_621_923_69e-27,
    epsilon_0: 8.854_187_812_8e-12,
};

/// Coulomb constant 1/(4 π ε0) in V m / C.
pub fn coulomb_constant() -> f64 {
    1.0 / (4.0 * PI * CODATA.epsilon_0)
}

/// A single trapped ion: mass, charge and a label used in file headers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IonSpecies {
    /// Mass in kg.
    pub mass: f64,
    /// Charge in C.
    pub charge: f64,
    pub label: String,
}

impl IonSpecies {
    pub fn new(label: impl Into<String>, mass: f64, charge: f64) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::invalid(format!("ion mass must be positive, got {mass}")));
        }
        if charge == 0.0 || !charge.is_finite() {
            return Err(Error::invalid("ion charge must be non-zero"));
        }
        Ok(Self { mass, charge, label: label.into() })
    }

    /// Singly charged ion whose mass is `mass_number` nucleon masses.
    ///
    /// The built-in species use this nominal mass (A times the proton mass);
    /// [`IonSpecies::from_atomic_mass`] takes an exact isotope mass instead.
    pub fn singly_charged(label: impl Into<String>, mass_number: u32) -> Self {
        Self {
            mass: mass_number as f64 * CODATA.proton_mass,
            charge: CODATA.elementary_charge,
            label: label.into(),
        }
    }

    /// Singly charged ion with a mass given in unified atomic mass units.
    pub fn from_atomic_mass(label: impl Into<String>, mass_u: f64) -> Result<Self> {
        Self::new(label, mass_u * CODATA.atomic_mass_unit, CODATA.elementary_charge)
    }

    /// ⁴⁰Ca⁺
    pub fn calcium40() -> Self {
        Self::singly_charged("ca40", 40)
    }

    /// ⁹Be⁺
    pub fn beryllium9() -> Self {
        Self::singly_charged("be9", 9)
    }

    /// Looks up a built-in species by its label (`ca40`, `be9`).
    pub fn builtin(label: &str) -> Result<Self> {
        match label.to_ascii_lowercase().as_str() {
            "ca40" | "ca" | "40ca" => Ok(Self::calcium40()),
            "be9" | "be" | "9be" => Ok(Self::beryllium9()),
            other => Err(Error::invalid(format!("unknown ion species '{other}' (expected ca40 or be9)"))),
        }
    }
}

/// RF drive: zero-peak amplitude on the RF electrode group and angular frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    /// Zero-peak amplitude (V).
    pub rf_amplitude: f64,
    /// Angular drive frequency Ω (rad/s).
    pub rf_omega: f64,
}

impl DriveConfig {
    pub fn new(rf_amplitude: f64, rf_omega: f64) -> Result<Self> {
        if !(rf_amplitude >= 0.0) {
            return Err(Error::invalid(format!("RF amplitude must be >= 0, got {rf_amplitude}")));
        }
        if !(rf_omega > 0.0) {
            return Err(Error::invalid(format!("RF angular frequency must be > 0, got {rf_omega}")));
        }
        Ok(Self { rf_amplitude, rf_omega })
    }

    /// Drive specified by amplitude and ordinary frequency in MHz (Ω = 2π f).
    pub fn from_mhz(rf_amplitude: f64, freq_mhz: f64) -> Result<Self> {
        Self::new(rf_amplitude, 2.0 * PI * freq_mhz * 1e6)
    }

    /// RF period in seconds.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.rf_omega
    }
}

/// Converts an angular frequency (rad/s) to Hz.
pub fn omega_to_hz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

/// Converts an ordinary frequency in MHz to rad/s.
pub fn mhz_to_omega(mhz: f64) -> f64 {
    2.0 * PI * mhz * 1e6
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_species_are_singly_charged() {
        let ca = IonSpecies::calcium40();
        assert_eq!(ca.charge, CODATA.elementary_charge);
        assert!((ca.mass / CODATA.atomic_mass_unit - 40.29).abs() < 0.01);
        assert_eq!(IonSpecies::builtin("Be9").unwrap(), IonSpecies::beryllium9());
        assert!(IonSpecies::builtin("yb171").is_err());
    }

    #[test]
    fn rejects_invalid_inputs() {
        assert!(IonSpecies::new("x", 0.0, 1.0).is_err());
        assert!(IonSpecies::new("x", 1.0, 0.0).is_err());
        assert!(DriveConfig::new(-1.0, 1.0).is_err());
        assert!(DriveConfig::new(1.0, 0.0).is_err());
        let d = DriveConfig::from_mhz(200.0, 36.0).unwrap();
        assert!((omega_to_hz(d.rf_omega) - 36e6).abs() < 1e-6);
    }
}
