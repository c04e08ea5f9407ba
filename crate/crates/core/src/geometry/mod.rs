//! Electrode layouts, controlled imperfections and surface panelization.
//!
//! A [`TrapLayout`] is a list of named [`Electrode`]s built from flat plates,
//! parallelepiped blocks and extruded polygons, all in micrometres. Parametric
//! builders produce the linear multi-segment trap and the X-junction; each
//! remembers its [`Recipe`] so shape perturbations can rebuild it.
//!
//! Misalignments are stored as a rigid placement per surface. Panels are
//! generated at the nominal position and moved afterwards, so a tiny
//! tilt changes panel positions smoothly instead of re-meshing.

mod builders;
mod io;
mod mesh;
mod perturb;
pub mod polygon;
mod primitive;

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Matrix3, Rotation3, Unit};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{Point, Vec3};

pub use builders::{build_linear_trap, build_x_junction, enclosure, JunctionParams, LinearTrapParams, Recipe, Shaping};
pub use io::{read_layout, write_layout, LayoutDocument, LAYOUT_SCHEMA_VERSION};
pub use mesh::{panelize, MeshConfig, Panel, PanelMesh, Refinement};
pub use perturb::{apply_perturbation, Perturbation};
pub use primitive::{Face, Primitive};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate surface on electrode '{electrode}': {reason}")]
    Degenerate { electrode: String, reason: String },
    #[error("duplicate electrode name '{0}'")]
    DuplicateName(String),
    #[error("layout must contain exactly one RF electrode, found {0}")]
    RfCount(usize),
    #[error("frame vectors are not orthonormal")]
    Frame,
    #[error("electrodes '{0}' and '{1}' intersect")]
    Intersecting(String, String),
    #[error("perturbation not applicable: {0}")]
    Inapplicable(String),
    #[error("mesh needs about {estimate} panels, over the budget of {budget}; raise the panel size or the budget")]
    PanelBudget { estimate: usize, budget: usize },
    #[error("unknown landmark '{name}' (available: {available})")]
    UnknownLandmark { name: String, available: String },
}

impl GeometryError {
    pub fn is_config(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Rf,
    DcControl,
    DcShim,
    Ground,
}

impl Role {
    pub fn is_dc(self) -> bool {
        matches!(self, Role::DcControl | Role::DcShim)
    }
}

/// Which trapping wafer an electrode sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wafer {
    Top,
    Bottom,
}

/// Proper rigid motion `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vec3::zeros() }
    }

    pub fn translation(t: Vec3) -> Self {
        Self { rotation: Matrix3::identity(), translation: t }
    }

    /// Rotation by `angle` (rad) about `axis` through `pivot`.
    pub fn rotation_about(axis: Vec3, pivot: Point, angle: f64) -> Self {
        let rotation = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle).into_inner();
        let translation = pivot.coords - rotation * pivot.coords;
        Self { rotation, translation }
    }

    pub fn is_identity(&self) -> bool {
        self.rotation == Matrix3::identity() && self.translation == Vec3::zeros()
    }

    pub fn apply_point(&self, p: &Point) -> Point {
        Point::from(self.rotation * p.coords + self.translation)
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn inverse_point(&self, p: &Point) -> Point {
        Point::from(self.rotation.transpose() * (p.coords - self.translation))
    }

    /// `other` applied after `self`.
    pub fn then(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: other.rotation * self.rotation,
            translation: other.rotation * self.translation + other.translation,
        }
    }
}

/// One primitive of an electrode, with the wafer it belongs to and its rigid
/// placement relative to the nominal (as-built) position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    #[serde(flatten)]
    pub primitive: Primitive,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wafer: Option<Wafer>,
    #[serde(default, skip_serializing_if = "RigidTransform::is_identity")]
    pub placement: RigidTransform,
}

impl Surface {
    pub fn new(primitive: Primitive, wafer: Option<Wafer>) -> Self {
        Self { primitive, wafer, placement: RigidTransform::identity() }
    }

    /// Faces in the layout frame.
    pub fn placed_faces(&self) -> Vec<Face> {
        self.primitive.faces().into_iter().map(|f| f.transformed(&self.placement)).collect()
    }

    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        self.primitive.contains(&self.placement.inverse_point(p), tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Electrode {
    pub name: String,
    pub role: Role,
    pub surfaces: Vec<Surface>,
}

impl Electrode {
    /// Electrode whose primitives all sit on one wafer (or none).
    pub fn new(name: impl Into<String>, role: Role, wafer: Option<Wafer>, primitives: Vec<Primitive>) -> Self {
        Self { name: name.into(), role, surfaces: primitives.into_iter().map(|p| Surface::new(p, wafer)).collect() }
    }

    /// Wafer shared by all surfaces, if any.
    pub fn wafer(&self) -> Option<Wafer> {
        let first = self.surfaces.first()?.wafer;
        self.surfaces.iter().all(|s| s.wafer == first).then_some(first).flatten()
    }

    /// Analytic surface area of all primitives (µm²).
    pub fn area(&self) -> f64 {
        self.surfaces.iter().map(|s| s.primitive.area()).sum()
    }

    /// True if `p` lies inside or within `tol` of the conductor.
    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        self.surfaces.iter().any(|s| s.contains(p, tol))
    }

    /// Distance from `p` to the nearest face.
    pub fn distance_to(&self, p: &Point) -> f64 {
        self.surfaces
            .iter()
            .flat_map(|s| s.placed_faces())
            .map(|f| f.distance_to(p))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn faces(&self) -> Vec<Face> {
        self.surfaces.iter().flat_map(|s| s.placed_faces()).collect()
    }

    pub fn vertices(&self) -> Vec<Point> {
        self.faces().into_iter().flat_map(|f| f.vertices).collect()
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in self.vertices() {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }
}

/// Orthonormal trap frame: `axial` is the trap axis (z), `leg` the junction leg
/// axis (x) and `normal` the wafer normal (y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub origin: Point,
    pub leg: Vec3,
    pub normal: Vec3,
    pub axial: Vec3,
}

impl Default for Frame {
    fn default() -> Self {
        Self { origin: Point::origin(), leg: Vec3::x(), normal: Vec3::y(), axial: Vec3::z() }
    }
}

impl Frame {
    pub fn is_orthonormal(&self, tol: f64) -> bool {
        let v = [self.leg, self.normal, self.axial];
        for i in 0..3 {
            if (v[i].norm() - 1.0).abs() > tol {
                return false;
            }
            for j in (i + 1)..3 {
                if v[i].dot(&v[j]).abs() > tol {
                    return false;
                }
            }
        }
        true
    }
}

/// Default ion–electrode distance (µm).
pub const DEFAULT_ION_ELECTRODE_DISTANCE: f64 = 185.0;
/// Default vertical separation of the two trapping wafers (µm).
pub const DEFAULT_WAFER_SEPARATION: f64 = 220.0;
/// Default wafer (and electrode) thickness (µm).
pub const DEFAULT_WAFER_THICKNESS: f64 = 300.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapLayout {
    pub electrodes: Vec<Electrode>,
    pub frame: Frame,
    /// µm
    pub ion_electrode_distance: f64,
    /// µm
    pub wafer_separation: f64,
    #[serde(default)]
    pub landmarks: BTreeMap<String, Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recipe: Option<Recipe>,
}

impl TrapLayout {
    /// Checks the structural invariants of a layout.
    pub fn validate(&self) -> Result<(), GeometryError> {
        let mut names = BTreeSet::new();
        for e in &self.electrodes {
            if !names.insert(e.name.as_str()) {
                return Err(GeometryError::DuplicateName(e.name.clone()));
            }
            if e.surfaces.is_empty() {
                return Err(GeometryError::Degenerate { electrode: e.name.clone(), reason: "no surfaces".into() });
            }
            for s in &e.surfaces {
                if let Err(reason) = s.primitive.check() {
                    return Err(GeometryError::Degenerate { electrode: e.name.clone(), reason });
                }
            }
        }
        let rf = self.electrodes.iter().filter(|e| e.role == Role::Rf).count();
        if rf != 1 {
            return Err(GeometryError::RfCount(rf));
        }
        if !self.frame.is_orthonormal(1e-9) {
            return Err(GeometryError::Frame);
        }
        self.check_intersections()
    }

    /// Vertex-in-solid test between every pair of electrodes with overlapping
    /// bounding boxes. Shared boundaries are allowed; interpenetration is not.
    fn check_intersections(&self) -> Result<(), GeometryError> {
        let boxes: Vec<_> = self.electrodes.iter().map(Electrode::bounding_box).collect();
        let probes: Vec<Vec<Point>> = self
            .electrodes
            .iter()
            .map(|e| {
                let faces = e.faces();
                let mut pts: Vec<Point> = faces.iter().map(Face::centroid).collect();
                pts.extend(faces.into_iter().flat_map(|f| f.vertices));
                pts
            })
            .collect();
        for i in 0..self.electrodes.len() {
            for j in (i + 1)..self.electrodes.len() {
                let (a_lo, a_hi) = boxes[i];
                let (b_lo, b_hi) = boxes[j];
                if (0..3).any(|k| a_hi[k] < b_lo[k] || b_hi[k] < a_lo[k]) {
                    continue;
                }
                let hit = probes[i].iter().any(|p| self.electrodes[j].contains(p, -1e-6))
                    || probes[j].iter().any(|p| self.electrodes[i].contains(p, -1e-6));
                if hit {
                    return Err(GeometryError::Intersecting(
                        self.electrodes[i].name.clone(),
                        self.electrodes[j].name.clone(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn electrode(&self, name: &str) -> Option<&Electrode> {
        self.electrodes.iter().find(|e| e.name == name)
    }

    pub fn electrode_index(&self, name: &str) -> Option<usize> {
        self.electrodes.iter().position(|e| e.name == name)
    }

    pub fn rf_index(&self) -> Option<usize> {
        self.electrodes.iter().position(|e| e.role == Role::Rf)
    }

    pub fn landmark(&self, name: &str) -> Result<Point, GeometryError> {
        self.landmarks.get(name).copied().ok_or_else(|| GeometryError::UnknownLandmark {
            name: name.to_string(),
            available: self.landmarks.keys().cloned().collect::<Vec<_>>().join(", "),
        })
    }

    /// Name of the electrode containing `p` (within `tol` µm), if any.
    pub fn conductor_at(&self, p: &Point, tol: f64) -> Option<&str> {
        self.electrodes.iter().find(|e| e.contains(p, tol)).map(|e| e.name.as_str())
    }

    /// Pairs electrodes mapped onto each other by the rigid motion `map`
    /// (matched by transformed vertex sets). Electrodes mapped to themselves
    /// pair with themselves; electrodes with no image are left out.
    pub fn symmetry_pairs(&self, map: impl Fn(&Point) -> Point, tol: f64) -> Vec<(usize, usize)> {
        let centroids: Vec<(Point, f64)> = self
            .electrodes
            .iter()
            .map(|e| {
                let v = e.vertices();
                let n = v.len().max(1) as f64;
                let c = Point::from(v.iter().fold(Vec3::zeros(), |a, p| a + p.coords) / n);
                (c, e.area())
            })
            .collect();
        let mut pairs = Vec::new();
        for (i, (c, area)) in centroids.iter().enumerate() {
            let image = map(c);
            let found = centroids.iter().enumerate().find(|(j, (cj, aj))| {
                self.electrodes[*j].role == self.electrodes[i].role
                    && (cj - image).norm() < tol
                    && (aj - area).abs() <= 1e-6 * area.max(1.0)
            });
            if let Some((j, _)) = found {
                pairs.push((i, j));
            }
        }
        pairs
    }
}
