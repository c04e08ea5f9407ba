use serde::{Deserialize, Serialize};

use super::{GeometryError, Recipe, RigidTransform, TrapLayout, Wafer};
use crate::{Point, Vec3};

/// Controlled imperfection of a layout. Lengths in µm, angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    /// Top wafer translated by `l` along z.
    LinearShift { l: f64 },
    /// Top wafer rotated by `theta_deg` about x through its own centre.
    Tilt { theta_deg: f64 },
    /// DC gaps of width `w` cut `d` deep into the wafer.
    DcGap { w: f64, d: f64 },
    /// Slots of depth `d` in the RF rail mirroring the DC gaps.
    RfMirroredGap { d: f64 },
    /// Circular recess of sagitta `depth` across each DC finger face.
    CurvedEdge { depth: f64 },
    /// Circular notch of chord `w` and sagitta `d` centred on each DC finger face.
    Indentation { w: f64, d: f64 },
}

impl Perturbation {
    fn magnitudes(&self) -> Vec<(&'static str, f64)> {
        match *self {
            Perturbation::LinearShift { l } => vec![("l", l)],
            Perturbation::Tilt { theta_deg } => vec![("theta", theta_deg)],
            Perturbation::DcGap { w, d } => vec![("w", w), ("d", d)],
            Perturbation::RfMirroredGap { d } => vec![("d", d)],
            Perturbation::CurvedEdge { depth } => vec![("depth", depth)],
            Perturbation::Indentation { w, d } => vec![("w", w), ("d", d)],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.magnitudes().iter().any(|(_, v)| *v == 0.0)
    }
}

/// Returns a perturbed copy of `layout`. A zero magnitude returns an exact
/// clone.
pub fn apply_perturbation(layout: &TrapLayout, p: &Perturbation) -> Result<TrapLayout, GeometryError> {
    for (name, v) in p.magnitudes() {
        if !v.is_finite() || v < 0.0 {
            return Err(GeometryError::InvalidParameter(format!("perturbation {name} must be non-negative, got {v}")));
        }
    }
    if p.is_zero() {
        return Ok(layout.clone());
    }
    match *p {
        Perturbation::LinearShift { l } => move_top_wafer(layout, RigidTransform::translation(Vec3::new(0.0, 0.0, l))),
        Perturbation::Tilt { theta_deg } => {
            let (lo, hi) = top_wafer_extent(layout)?;
            let pivot = Point::new(0.0, 0.5 * (lo + hi), 0.0);
            move_top_wafer(layout, RigidTransform::rotation_about(Vec3::x(), pivot, theta_deg.to_radians()))
        }
        _ => rebuild(layout, p),
    }
}

fn top_wafer_extent(layout: &TrapLayout) -> Result<(f64, f64), GeometryError> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut has_bottom = false;
    for e in &layout.electrodes {
        for s in &e.surfaces {
            match s.wafer {
                Some(Wafer::Top) => {
                    for f in s.primitive.faces() {
                        for v in f.vertices {
                            lo = lo.min(v.y);
                            hi = hi.max(v.y);
                        }
                    }
                }
                Some(Wafer::Bottom) => has_bottom = true,
                None => {}
            }
        }
    }
    if !lo.is_finite() || !has_bottom {
        return Err(GeometryError::Inapplicable("wafer misalignment needs a two-wafer layout".into()));
    }
    Ok((lo, hi))
}

fn move_top_wafer(layout: &TrapLayout, t: RigidTransform) -> Result<TrapLayout, GeometryError> {
    top_wafer_extent(layout)?;
    let mut out = layout.clone();
    for e in &mut out.electrodes {
        for s in &mut e.surfaces {
            if s.wafer == Some(Wafer::Top) {
                s.placement = s.placement.then(&t);
            }
        }
    }
    Ok(out)
}

fn rebuild(layout: &TrapLayout, p: &Perturbation) -> Result<TrapLayout, GeometryError> {
    let recipe = layout
        .recipe
        .as_ref()
        .ok_or_else(|| GeometryError::Inapplicable("shape perturbations need a parametric layout".into()))?;
    let recipe = match (recipe, *p) {
        (Recipe::LinearTrap(lp), _) => {
            let mut lp = lp.clone();
            match *p {
                Perturbation::DcGap { w, d } => {
                    lp.gap_width = w;
                    lp.dc_depth = d;
                }
                Perturbation::RfMirroredGap { d } => lp.shaping.rf_gap_depth = Some(d),
                Perturbation::CurvedEdge { depth } => {
                    lp.shaping.curved_edge = Some(depth);
                    lp.shaping.indentation = None;
                }
                Perturbation::Indentation { w, d } => {
                    lp.shaping.indentation = Some((w, d));
                    lp.shaping.curved_edge = None;
                }
                _ => unreachable!(),
            }
            Recipe::LinearTrap(lp)
        }
        (Recipe::XJunction(jp), Perturbation::DcGap { w, d }) => {
            let mut jp = jp.clone();
            if d < jp.junction_dc_width {
                return Err(GeometryError::Inapplicable(
                    "junction DC gaps always run through the full finger depth".into(),
                ));
            }
            jp.gap_width = w;
            Recipe::XJunction(jp)
        }
        (Recipe::XJunction(_), _) => {
            return Err(GeometryError::Inapplicable("edge shaping is only defined for the linear trap".into()))
        }
    };
    let mut out = recipe.build()?;
    // carry over misalignments of the input
    for e in &mut out.electrodes {
        if let Some(old) = layout.electrode(&e.name) {
            for s in &mut e.surfaces {
                if let Some(o) = old.surfaces.iter().find(|o| o.wafer == s.wafer) {
                    s.placement = o.placement;
                }
            }
        }
    }
    out.landmarks = layout.landmarks.clone();
    Ok(out)
}
