//! Design and analysis toolkit for segmented three-dimensional Paul traps.
//!
//! The pipeline runs from parametric electrode layouts ([`geometry`]) through a
//! constant-charge panel boundary-element solver ([`field`]) to trap metrics
//! ([`analysis`]), transport waveform synthesis ([`waveform`]), time-domain
//! verification ([`dynamics`]) and the measurement conversion formulas in
//! [`diagnostics`].
//!
//! Lengths inside geometry and at every evaluation point are in micrometres.
//! Potentials are volts, fields V/m, energies are reported in eV unless a
//! function says otherwise, and angular frequencies are rad/s.

pub mod analysis;
pub mod constants;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod geometry;
pub mod hashing;
pub mod scenario;
pub mod table;
pub mod waveform;

pub use constants::{DriveConfig, IonSpecies, PhysicalConstants, CODATA};
pub use error::{Error, Result};

/// Point in micrometres.
pub type Point = nalgebra::Point3<f64>;
/// Free vector; the unit depends on context (µm for displacements, V/m for fields).
pub type Vec3 = nalgebra::Vector3<f64>;
