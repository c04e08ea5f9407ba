//! Conversions between trap measurements and the quantities they probe:
//! heating rate and electric-field noise, micromotion modulation index and
//! axial RF field, sideband ratios and modulation index.
//!
//! All inputs and outputs are SI.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{IonSpecies, CODATA};
use crate::error::{Error, Result};

/// First zero of J₀; J₁/J₀ grows without bound as β approaches it.
const J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;

/// Electric-field noise S_E (V²/(m²·Hz)) at angular frequency `omega` (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpectralDensity {
    pub s_e: f64,
    pub omega: f64,
}

impl NoiseSpectralDensity {
    pub fn new(s_e: f64, omega: f64) -> Result<Self> {
        if !(s_e >= 0.0) || !s_e.is_finite() {
            return Err(Error::invalid(format!("noise spectral density must be >= 0, got {s_e}")));
        }
        check_frequency(omega)?;
        Ok(Self { s_e, omega })
    }
}

/// Probe laser used for micromotion sideband spectroscopy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserGeometry {
    /// m
    pub wavelength: f64,
    /// Angle between the beam and the trap axis, degrees.
    pub angle_deg: f64,
}

impl LaserGeometry {
    pub fn new(wavelength: f64, angle_deg: f64) -> Result<Self> {
        if !(wavelength > 0.0) || !wavelength.is_finite() {
            return Err(Error::invalid(format!("wavelength must be > 0, got {wavelength}")));
        }
        if !(0.0..=90.0).contains(&angle_deg) {
            return Err(Error::invalid(format!("laser angle must lie in [0, 90] degrees, got {angle_deg}")));
        }
        Ok(Self { wavelength, angle_deg })
    }

    /// Projection of the wavevector on the trap axis (1/m).
    pub fn axial_wavevector(&self) -> f64 {
        2.0 * PI / self.wavelength * self.angle_deg.to_radians().cos()
    }
}

/// Micromotion modulation index β along a labelled axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicromotionIndex {
    pub beta: f64,
    pub axis: String,
}

impl MicromotionIndex {
    pub fn new(beta: f64, axis: impl Into<String>) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::invalid(format!("modulation index must be >= 0, got {beta}")));
        }
        Ok(Self { beta, axis: axis.into() })
    }

    pub fn axial(beta: f64) -> Result<Self> {
        Self::new(beta, "axial")
    }
}

fn check_frequency(omega: f64) -> Result<()> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::invalid(format!("angular frequency must be > 0, got {omega}")));
    }
    Ok(())
}

/// Motional heating rate (quanta/s) from field noise at the mode frequency:
/// Γ = Q² S_E / (4 m ħ ω).
pub fn heating_rate(noise: &NoiseSpectralDensity, species: &IonSpecies, omega: f64) -> Result<f64> {
    check_frequency(omega)?;
    let q = species.charge;
    Ok(q * q * noise.s_e / (4.0 * species.mass * CODATA.hbar * omega))
}

/// Inverse of [`heating_rate`].
pub fn noise_from_heating(rate: f64, species: &IonSpecies, omega: f64) -> Result<NoiseSpectralDensity> {
    check_frequency(omega)?;
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(Error::invalid(format!("heating rate must be >= 0, got {rate}")));
    }
    let q = species.charge;
    NoiseSpectralDensity::new(rate * 4.0 * species.mass * CODATA.hbar * omega / (q * q), omega)
}

fn axial_k(laser: &LaserGeometry) -> Result<f64> {
    let k = laser.axial_wavevector();
    if laser.angle_deg >= 90.0 || k.abs() < 1e-12 * 2.0 * PI / laser.wavelength {
        return Err(Error::invalid("a beam at 90 degrees has no axial projection; the axial field is undefined"));
    }
    Ok(k)
}

/// Axial RF field amplitude (V/m) that produces modulation index β:
/// E = m Ω² β / (k Q) with k the axial projection of the wavevector.
pub fn micromotion_field(beta: &MicromotionIndex, species: &IonSpecies, rf_omega: f64, laser: &LaserGeometry) -> Result<f64> {
    check_frequency(rf_omega)?;
    let k = axial_k(laser)?;
    Ok(species.mass * rf_omega * rf_omega * beta.beta / (k * species.charge))
}

/// Inverse of [`micromotion_field`].
pub fn beta_from_field(field: f64, species: &IonSpecies, rf_omega: f64, laser: &LaserGeometry) -> Result<MicromotionIndex> {
    check_frequency(rf_omega)?;
    let k = axial_k(laser)?;
    MicromotionIndex::axial(field.abs() * k * species.charge / (species.mass * rf_omega * rf_omega))
}

/// Power series of the Bessel function Jₙ, accurate to rounding for |x| < 3.
fn bessel_j(n: u32, x: f64) -> f64 {
    let h = 0.5 * x;
    let mut term = h.powi(n as i32) / (1..=n).map(f64::from).product::<f64>();
    let mut sum = term;
    for k in 1..60 {
        term *= -h * h / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// First-sideband to carrier ratio J₁(β)/J₀(β).
pub fn sideband_ratio(beta: f64) -> f64 {
    bessel_j(1, beta) / bessel_j(0, beta)
}

/// Solves J₁(β)/J₀(β) = `ratio` for β. For small ratios β ≈ 2·ratio.
pub fn beta_from_sideband_ratio(ratio: f64) -> Result<MicromotionIndex> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::invalid(format!("sideband-to-carrier ratio must lie in [0, 1), got {ratio}")));
    }
    if ratio == 0.0 {
        return MicromotionIndex::axial(0.0);
    }
    // the ratio rises monotonically from 0 to infinity on [0, first zero of J₀)
    let (mut lo, mut hi) = (0.0, J0_FIRST_ZERO);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sideband_ratio(mid) < ratio {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi {
            break;
        }
    }
    MicromotionIndex::axial(0.5 * (lo + hi))
}

/// Modulation index of another species in the same field, drive and beam:
/// β scales as 1/m.
pub fn rescale_beta(beta: &MicromotionIndex, from: &IonSpecies, to: &IonSpecies) -> MicromotionIndex {
    let scale = (from.mass / to.mass) * (to.charge / from.charge);
    MicromotionIndex { beta: beta.beta * scale, axis: beta.axis.clone() }
}
