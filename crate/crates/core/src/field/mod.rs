//! Electrostatic basis fields.
//!
//! Each electrode has a unit-voltage basis solution (1 V on that electrode,
//! all others grounded). Any voltage assignment is the superposition of the
//! bases. The main implementation is the panel boundary-element solver in
//! [`FieldBasis`]; analytic bases and interpolated grids implement the same
//! [`ElectrodeBasis`] trait so analysis code runs on any of them.

mod bem;
mod grid;
pub mod kernel;
mod storage;
mod synthetic;

use thiserror::Error;

use crate::{Point, Vec3};

pub use bem::{solve_basis, FieldBasis, SolverConfig};
pub use grid::{eval_grid, FieldGrid, GridBasis, GridChannels, GridSpec};
pub use storage::{read_basis, write_basis, BasisCache};
pub(crate) use storage::write_atomic;
pub use synthetic::{sphere_mesh, FnBasis};

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("mesh has no panels")]
    EmptyMesh,
    #[error("singular collocation system: {message} (panels {panels:?})")]
    Singular { panels: Vec<usize>, message: String },
    #[error("point ({:.3}, {:.3}, {:.3}) µm lies inside or on electrode '{electrode}'", point.x, point.y, point.z)]
    InsideConductor { electrode: String, point: Point },
    #[error("unknown electrode '{0}'")]
    UnknownElectrode(String),
    #[error("voltage vector has {got} entries, basis has {expected} electrodes")]
    VoltageLength { expected: usize, got: usize },
    #[error("grid specification is empty or invalid: {0}")]
    BadGrid(String),
    #[error("point ({:.3}, {:.3}, {:.3}) µm is outside the interpolation grid", point.x, point.y, point.z)]
    OutsideGrid { point: Point },
    #[error("boundary residual {residual:.3e} V exceeds tolerance {tolerance:.1e} V on electrode '{electrode}'")]
    Residual { electrode: String, residual: f64, tolerance: f64 },
}

impl FieldError {
    pub fn is_config(&self) -> bool {
        !matches!(self, FieldError::Singular { .. } | FieldError::Residual { .. })
    }
}

/// Potential (V) and field (V/m) of one unit-voltage basis at a point.
pub type BasisValue = (f64, Vec3);

/// A set of unit-voltage electrode basis fields.
pub trait ElectrodeBasis: Send + Sync {
    fn electrode_names(&self) -> &[String];

    /// Index of the RF electrode, if the basis has one.
    fn rf_index(&self) -> Option<usize>;

    /// Potential and field of every basis at `p` (µm).
    fn eval_all(&self, p: &Point) -> Result<Vec<BasisValue>, FieldError>;

    /// Potential and field for a full voltage vector.
    fn eval(&self, voltages: &[f64], p: &Point) -> Result<BasisValue, FieldError> {
        self.check_voltages(voltages)?;
        let all = self.eval_all(p)?;
        let mut phi = 0.0;
        let mut e = Vec3::zeros();
        for (v, (bp, be)) in voltages.iter().zip(&all) {
            phi += v * bp;
            e += *v * be;
        }
        Ok((phi, e))
    }

    /// Distance (µm) from `p` to electrode `e`, used to weight regularization.
    fn electrode_distance(&self, e: usize, p: &Point) -> f64;

    /// Stable identifier of the basis content, used as a cache key.
    fn content_hash(&self) -> String;

    fn n_electrodes(&self) -> usize {
        self.electrode_names().len()
    }

    fn electrode_index(&self, name: &str) -> Result<usize, FieldError> {
        self.electrode_names()
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| FieldError::UnknownElectrode(name.to_string()))
    }

    fn check_voltages(&self, voltages: &[f64]) -> Result<(), FieldError> {
        if voltages.len() != self.n_electrodes() {
            return Err(FieldError::VoltageLength { expected: self.n_electrodes(), got: voltages.len() });
        }
        Ok(())
    }

    fn potential(&self, voltages: &[f64], p: &Point) -> Result<f64, FieldError> {
        Ok(self.eval(voltages, p)?.0)
    }

    fn field(&self, voltages: &[f64], p: &Point) -> Result<Vec3, FieldError> {
        Ok(self.eval(voltages, p)?.1)
    }
}
