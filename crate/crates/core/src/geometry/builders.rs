//! Parametric reconstructions of the two-wafer trap geometries.
//!
//! Both wafers carry electrodes on the walls of a slot along z. The top wafer
//! has the RF rail on +x and the DC fingers on -x; the bottom wafer is the
//! point reflection of the top through the trap axis, which gives the usual
//! diagonal RF/DC arrangement of a 3D wafer trap.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use super::polygon::{self, P2};
use super::{Electrode, Frame, GeometryError, Primitive, RigidTransform, Role, Surface, TrapLayout, Wafer};
use super::{DEFAULT_ION_ELECTRODE_DISTANCE, DEFAULT_WAFER_SEPARATION, DEFAULT_WAFER_THICKNESS};
use crate::{Point, Vec3};

const ARC_SEGMENTS: usize = 16;

/// Optional edge shaping of the linear trap.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Shaping {
    /// Depth of slots cut into the RF rails opposite each DC gap (µm).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rf_gap_depth: Option<f64>,
    /// Circular notch (chord, sagitta) centred on each DC finger face (µm).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indentation: Option<(f64, f64)>,
    /// Sagitta of a circular recess across the full DC finger face (µm).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curved_edge: Option<f64>,
}

impl Shaping {
    pub fn is_none(&self) -> bool {
        self.rf_gap_depth.is_none() && self.indentation.is_none() && self.curved_edge.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearTrapParams {
    pub n_segments: usize,
    pub segment_width: f64,
    pub gap_width: f64,
    pub ion_electrode_distance: f64,
    pub wafer_separation: f64,
    /// Extra length added outward to the two outermost segments (µm).
    pub outer_elongation: f64,
    pub wafer_thickness: f64,
    /// Extent of the DC fingers (and of the gaps between them) into the wafer.
    pub dc_depth: f64,
    /// Extent of the RF rail into the wafer.
    pub rf_depth: f64,
    #[serde(default, skip_serializing_if = "Shaping::is_none")]
    pub shaping: Shaping,
    /// Clearance of a grounded box enclosing the electrodes (µm); none for
    /// open boundaries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enclosure_margin: Option<f64>,
}

impl LinearTrapParams {
    /// Seven 160 µm segments with 20 µm gaps. The two outer segments extend
    /// 800 µm further so the trap ends do not reach the central segments.
    pub fn appendix_seven_segment() -> Self {
        Self::new(7, 160.0, 20.0, DEFAULT_ION_ELECTRODE_DISTANCE, DEFAULT_WAFER_SEPARATION, 800.0)
    }

    pub fn new(
        n_segments: usize,
        segment_width: f64,
        gap_width: f64,
        ion_electrode_distance: f64,
        wafer_separation: f64,
        outer_elongation: f64,
    ) -> Self {
        Self {
            n_segments,
            segment_width,
            gap_width,
            ion_electrode_distance,
            wafer_separation,
            outer_elongation,
            wafer_thickness: DEFAULT_WAFER_THICKNESS,
            dc_depth: 300.0,
            rf_depth: 400.0,
            shaping: Shaping::default(),
            enclosure_margin: None,
        }
    }

    pub fn pitch(&self) -> f64 {
        self.segment_width + self.gap_width
    }

    /// Axial centre of segment `k` (0-based from -z).
    pub fn segment_center(&self, k: usize) -> f64 {
        (k as f64 - (self.n_segments as f64 - 1.0) / 2.0) * self.pitch()
    }

    /// Half length of the rails along z.
    pub fn half_length(&self) -> f64 {
        self.segment_center(self.n_segments - 1) + 0.5 * self.segment_width + self.outer_elongation
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JunctionParams {
    /// Distance between opposing RF protrusion tips (µm); 0 closes the bridge.
    pub bridge_gap: f64,
    /// Height of the protrusion underside above the trap plane (µm).
    pub bridge_height: f64,
    /// Width of the protrusions across the diagonal (µm).
    pub bridge_width: f64,
    pub junction_dc_width: f64,
    /// Widths of the DC fingers along each arm, from the junction outward.
    pub arm_dc_widths: Vec<f64>,
    pub ion_electrode_distance: f64,
    pub wafer_separation: f64,
    pub wafer_thickness: f64,
    pub gap_width: f64,
    pub outer_elongation: f64,
    /// Index of the arm finger whose centre marks the experimental zone.
    pub experimental_finger: usize,
}

impl JunctionParams {
    pub fn final_design() -> Self {
        Self::new(230.0, 240.0, 140.0, vec![160.0; 4], DEFAULT_ION_ELECTRODE_DISTANCE)
    }

    pub fn closed_bridge() -> Self {
        Self { bridge_gap: 0.0, ..Self::final_design() }
    }

    pub fn new(
        bridge_gap: f64,
        bridge_height: f64,
        junction_dc_width: f64,
        arm_dc_widths: Vec<f64>,
        ion_electrode_distance: f64,
    ) -> Self {
        Self {
            bridge_gap,
            bridge_height,
            bridge_width: 100.0,
            junction_dc_width,
            arm_dc_widths,
            ion_electrode_distance,
            wafer_separation: DEFAULT_WAFER_SEPARATION,
            wafer_thickness: DEFAULT_WAFER_THICKNESS,
            gap_width: 20.0,
            outer_elongation: 160.0,
            experimental_finger: 2,
        }
    }

    /// Half width of the slot in each wafer.
    pub fn slot_half_width(&self) -> f64 {
        slot_half_width(self.ion_electrode_distance, self.wafer_separation)
    }

    /// Largest admissible bridge gap: the diagonal of the central aperture.
    pub fn max_bridge_gap(&self) -> f64 {
        2.0 * SQRT_2 * self.slot_half_width()
    }

    /// Start and end of each arm finger measured from the junction centre.
    fn arm_fingers(&self) -> Vec<(f64, f64)> {
        let x0 = self.slot_half_width();
        let mut start = x0 + self.junction_dc_width + self.gap_width;
        let n = self.arm_dc_widths.len();
        let mut out = Vec::with_capacity(n);
        for (k, w) in self.arm_dc_widths.iter().enumerate() {
            let end = start + w + if k + 1 == n { self.outer_elongation } else { 0.0 };
            out.push((start, end));
            start = end + self.gap_width;
        }
        out
    }

    /// Outer end of the arms measured from the junction centre.
    pub fn arm_extent(&self) -> f64 {
        self.arm_fingers().last().map_or(self.slot_half_width() + self.junction_dc_width, |f| f.1)
    }

    pub fn experimental_zone(&self) -> f64 {
        let f = self.arm_fingers();
        let k = self.experimental_finger.min(f.len().saturating_sub(1));
        f.get(k).map_or(0.0, |(a, _)| a + 0.5 * self.arm_dc_widths[k])
    }
}

/// How a layout was built, kept so shape perturbations can rebuild it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Recipe {
    LinearTrap(LinearTrapParams),
    XJunction(JunctionParams),
}

impl Recipe {
    pub fn build(&self) -> Result<TrapLayout, GeometryError> {
        match self {
            Recipe::LinearTrap(p) => build_linear_trap(p),
            Recipe::XJunction(p) => build_x_junction(p),
        }
    }
}

fn slot_half_width(distance: f64, separation: f64) -> f64 {
    let y0 = 0.5 * separation;
    (distance * distance - y0 * y0).max(0.0).sqrt()
}

fn positive(name: &str, v: f64) -> Result<(), GeometryError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(GeometryError::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

fn invalid(msg: String) -> GeometryError {
    GeometryError::InvalidParameter(msg)
}

/// Prism over a (z, x) outline lying in the plane y = `y0`, extruded by `t`
/// along +y, cut into slabs along z.
fn zx_prism(outline: &[P2], y0: f64, t: f64) -> Primitive {
    let outline = polygon::simplify(outline);
    Primitive::Prism {
        outline: outline.iter().map(|q| Point::new(q[1], y0, q[0])).collect(),
        extrude: Vec3::new(0.0, t, 0.0),
        slab_axis: Vec3::z(),
    }
}

/// Point reflection through the trap axis, mapping the top wafer onto the
/// bottom wafer.
fn flip_xy() -> RigidTransform {
    RigidTransform::rotation_about(Vec3::z(), Point::origin(), std::f64::consts::PI)
}

/// Outline of a top-wafer DC finger spanning `[za, zb]` whose ion-facing
/// face lies at x = -x0 and which extends to x = -x0 - depth.
fn dc_finger_outline(za: f64, zb: f64, x0: f64, depth: f64, shaping: &Shaping, center: f64) -> Vec<P2> {
    let back = -x0 - depth;
    let mut out = vec![[za, back], [zb, back], [zb, -x0]];
    // face traversed from zb to za; notches carve toward -x
    let notch = if let Some((w, d)) = shaping.indentation {
        Some((center - 0.5 * w, center + 0.5 * w, d))
    } else {
        shaping.curved_edge.map(|d| (za, zb, d))
    };
    if let Some((u0, u1, d)) = notch {
        out.push([u1, -x0]);
        let mut arc = polygon::circular_segment_arc(u0, u1, -x0, d, ARC_SEGMENTS);
        arc.reverse();
        out.extend(arc);
        out.push([u0, -x0]);
    }
    out.push([za, -x0]);
    out
}

/// Grounded hollow box made of six plates.
pub fn enclosure(lo: Point, hi: Point) -> Electrode {
    let d = hi - lo;
    let (ex, ey, ez) = (Vec3::new(d.x, 0.0, 0.0), Vec3::new(0.0, d.y, 0.0), Vec3::new(0.0, 0.0, d.z));
    let surfaces = [(lo, ey, ez), (lo + ex, ey, ez), (lo, ez, ex), (lo + ey, ez, ex), (lo, ex, ey), (lo + ez, ex, ey)]
        .into_iter()
        .map(|(corner, edge_u, edge_v)| Surface::new(Primitive::Plate { corner, edge_u, edge_v }, None))
        .collect();
    Electrode { name: "enclosure".into(), role: Role::Ground, surfaces }
}

pub fn build_linear_trap(p: &LinearTrapParams) -> Result<TrapLayout, GeometryError> {
    if p.n_segments < 3 || p.n_segments % 2 == 0 {
        return Err(invalid(format!("n_segments must be odd and at least 3, got {}", p.n_segments)));
    }
    for (name, v) in [
        ("segment_width", p.segment_width),
        ("gap_width", p.gap_width),
        ("ion_electrode_distance", p.ion_electrode_distance),
        ("wafer_separation", p.wafer_separation),
        ("outer_elongation", p.outer_elongation),
        ("wafer_thickness", p.wafer_thickness),
        ("dc_depth", p.dc_depth),
        ("rf_depth", p.rf_depth),
    ] {
        positive(name, v)?;
    }
    if p.gap_width >= p.segment_width {
        return Err(invalid(format!(
            "gap_width ({}) must be smaller than segment_width ({})",
            p.gap_width, p.segment_width
        )));
    }
    let y0 = 0.5 * p.wafer_separation;
    if p.ion_electrode_distance <= y0 {
        return Err(invalid(format!(
            "ion_electrode_distance ({}) must exceed half the wafer separation ({y0})",
            p.ion_electrode_distance
        )));
    }
    let s = &p.shaping;
    if let Some(d) = s.rf_gap_depth {
        positive("rf_gap_depth", d)?;
        if d >= p.rf_depth {
            return Err(invalid(format!("RF gap depth {d} must be below the RF rail depth {}", p.rf_depth)));
        }
    }
    if let Some((w, d)) = s.indentation {
        positive("indentation width", w)?;
        positive("indentation depth", d)?;
        if w >= p.segment_width {
            return Err(invalid(format!("indentation width {w} must be below the segment width {}", p.segment_width)));
        }
        if d >= p.dc_depth || d > 0.5 * w {
            return Err(invalid(format!("indentation depth {d} is deeper than the finger allows")));
        }
    }
    if let Some(d) = s.curved_edge {
        positive("curved edge depth", d)?;
        if d >= p.dc_depth || d > 0.5 * p.segment_width {
            return Err(invalid(format!("curved edge depth {d} is deeper than the finger allows")));
        }
    }

    let x0 = slot_half_width(p.ion_electrode_distance, p.wafer_separation);
    let t = p.wafer_thickness;
    let half = p.half_length();
    let flip = flip_xy();

    let rf_top = {
        let mut out = vec![[-half, x0 + p.rf_depth], [half, x0 + p.rf_depth], [half, x0]];
        if let Some(d) = s.rf_gap_depth {
            for k in (0..p.n_segments - 1).rev() {
                let zc = p.segment_center(k) + 0.5 * p.pitch();
                let (a, b) = (zc - 0.5 * p.gap_width, zc + 0.5 * p.gap_width);
                out.extend([[b, x0], [b, x0 + d], [a, x0 + d], [a, x0]]);
            }
        }
        out.push([-half, x0]);
        if s.rf_gap_depth.is_some() {
            zx_prism(&out, y0, t)
        } else {
            Primitive::aabb(Point::new(x0, y0, -half), Point::new(x0 + p.rf_depth, y0 + t, half))
        }
    };
    let rf = Electrode {
        name: "rf".into(),
        role: Role::Rf,
        surfaces: vec![
            Surface::new(rf_top.transformed(&flip), Some(Wafer::Bottom)),
            Surface::new(rf_top, Some(Wafer::Top)),
        ],
    };

    let mut electrodes = vec![rf];
    for (wafer, tag) in [(Wafer::Top, "t"), (Wafer::Bottom, "b")] {
        for k in 0..p.n_segments {
            let c = p.segment_center(k);
            let mut za = c - 0.5 * p.segment_width;
            let mut zb = c + 0.5 * p.segment_width;
            if k == 0 {
                za -= p.outer_elongation;
            }
            if k + 1 == p.n_segments {
                zb += p.outer_elongation;
            }
            let top = if s.indentation.is_some() || s.curved_edge.is_some() {
                zx_prism(&dc_finger_outline(za, zb, x0, p.dc_depth, s, c), y0, t)
            } else {
                Primitive::aabb(Point::new(-x0 - p.dc_depth, y0, za), Point::new(-x0, y0 + t, zb))
            };
            let prim = match wafer {
                Wafer::Top => top,
                Wafer::Bottom => top.transformed(&flip),
            };
            electrodes.push(Electrode::new(format!("dc_{tag}{}", k + 1), Role::DcControl, Some(wafer), vec![prim]));
        }
    }
    if let Some(m) = p.enclosure_margin {
        positive("enclosure_margin", m)?;
        let xr = x0 + p.rf_depth.max(p.dc_depth) + m;
        let yr = y0 + t + m;
        electrodes.push(enclosure(Point::new(-xr, -yr, -half - m), Point::new(xr, yr, half + m)));
    }
    let mut landmarks = BTreeMap::new();
    landmarks.insert("trap_center".to_string(), Point::origin());
    landmarks.insert("experimental_zone".to_string(), Point::origin());
    let layout = TrapLayout {
        electrodes,
        frame: Frame::default(),
        ion_electrode_distance: p.ion_electrode_distance,
        wafer_separation: p.wafer_separation,
        landmarks,
        recipe: Some(Recipe::LinearTrap(p.clone())),
    };
    layout.validate()?;
    Ok(layout)
}

/// Symmetry generator of the junction: quarter turn about y followed by
/// y -> -y. Maps top-wafer RF quadrants onto bottom-wafer RF quadrants.
fn junction_generator() -> nalgebra::Matrix3<f64> {
    // (x, y, z) -> (z, -y, -x)
    nalgebra::Matrix3::new(0.0, 0.0, 1.0, 0.0, -1.0, 0.0, -1.0, 0.0, 0.0)
}

fn linear_map(m: nalgebra::Matrix3<f64>) -> RigidTransform {
    RigidTransform { rotation: m, translation: Vec3::zeros() }
}

fn quadrant_label(wafer: Wafer, c: &Point) -> String {
    let w = if wafer == Wafer::Top { "t" } else { "b" };
    let sx = if c.x >= 0.0 { "p" } else { "m" };
    let sz = if c.z >= 0.0 { "p" } else { "m" };
    format!("{w}x{sx}z{sz}")
}

pub fn build_x_junction(p: &JunctionParams) -> Result<TrapLayout, GeometryError> {
    for (name, v) in [
        ("bridge_height", p.bridge_height),
        ("bridge_width", p.bridge_width),
        ("junction_dc_width", p.junction_dc_width),
        ("ion_electrode_distance", p.ion_electrode_distance),
        ("wafer_separation", p.wafer_separation),
        ("wafer_thickness", p.wafer_thickness),
        ("gap_width", p.gap_width),
        ("outer_elongation", p.outer_elongation),
    ] {
        positive(name, v)?;
    }
    for w in &p.arm_dc_widths {
        positive("arm_dc_widths entry", *w)?;
    }
    if !(p.bridge_gap.is_finite() && p.bridge_gap >= 0.0) {
        return Err(invalid(format!("bridge_gap must be non-negative, got {}", p.bridge_gap)));
    }
    let y0 = 0.5 * p.wafer_separation;
    if p.ion_electrode_distance <= y0 {
        return Err(invalid(format!(
            "ion_electrode_distance ({}) must exceed half the wafer separation ({y0})",
            p.ion_electrode_distance
        )));
    }
    let x0 = p.slot_half_width();
    if p.bridge_gap >= p.max_bridge_gap() {
        return Err(invalid(format!(
            "bridge_gap {} exceeds the junction aperture diagonal {:.1}",
            p.bridge_gap,
            p.max_bridge_gap()
        )));
    }
    let top = y0 + p.wafer_thickness;
    if p.bridge_height < y0 || p.bridge_height >= top {
        return Err(invalid(format!(
            "bridge_height {} must lie within the wafer ({y0} to {top})",
            p.bridge_height
        )));
    }
    let half_w = p.bridge_width / SQRT_2;
    if half_w >= x0 {
        return Err(invalid(format!("bridge_width {} is too wide for the aperture", p.bridge_width)));
    }
    let tip = 0.5 * p.bridge_gap;
    let u = Vec3::new(1.0, 0.0, 1.0) / SQRT_2;
    let v = Vec3::new(1.0, 0.0, -1.0) / SQRT_2;
    let extent = p.arm_extent();
    let bridge_t = top - p.bridge_height;
    let at = |x: f64, z: f64| Point::new(x, p.bridge_height, z);

    // top-wafer templates: RF quadrant (+x, +z) with its protrusion, DC quadrant (-x, +z)
    let rf_block = Primitive::aabb(Point::new(x0, y0, x0), Point::new(extent, top, extent));
    let bridge = if p.bridge_gap == 0.0 {
        let outline = vec![
            at(x0, x0),
            at(x0 - half_w, x0),
            at(-x0, -x0 + half_w),
            at(-x0, -x0),
            at(-x0 + half_w, -x0),
            at(x0, x0 - half_w),
        ];
        vec![Primitive::Prism { outline, extrude: Vec3::new(0.0, bridge_t, 0.0), slab_axis: u }]
    } else {
        // protrusion: part of the aperture corner beyond `tip` along the
        // diagonal, within a band of the bridge width
        let outline = if tip < SQRT_2 * x0 - 0.5 * p.bridge_width {
            let a = Point::from(tip * u + 0.5 * p.bridge_width * v);
            let b = Point::from(tip * u - 0.5 * p.bridge_width * v);
            vec![at(a.x, a.z), at(x0, x0 - half_w), at(x0, x0), at(x0 - half_w, x0), at(b.x, b.z)]
        } else {
            let c = SQRT_2 * tip - x0;
            vec![at(x0, c), at(x0, x0), at(c, x0)]
        };
        let pent = Primitive::Prism { outline, extrude: Vec3::new(0.0, bridge_t, 0.0), slab_axis: u };
        let half_turn = linear_map(junction_generator() * junction_generator());
        vec![pent.transformed(&half_turn), pent]
    };

    let jw = p.junction_dc_width;
    let mut dc_template: Vec<(String, Primitive)> = vec![(
        "j".to_string(),
        Primitive::aabb(Point::new(-x0 - jw, y0, x0), Point::new(-x0, top, x0 + jw)),
    )];
    for (k, (a, b)) in p.arm_fingers().iter().enumerate() {
        // finger on the +z arm (x < -x0) and on the -x arm (z > x0)
        dc_template.push((format!("z{}", k + 1), Primitive::aabb(Point::new(-x0 - jw, y0, *a), Point::new(-x0, top, *b))));
        dc_template.push((format!("x{}", k + 1), Primitive::aabb(Point::new(-b, y0, x0), Point::new(-a, top, x0 + jw))));
    }

    let g = junction_generator();
    let maps = [nalgebra::Matrix3::identity(), g, g * g, g * g * g];
    let mut rf_surfaces = Vec::new();
    let mut dc = Vec::new();
    for (i, m) in maps.iter().enumerate() {
        let tr = linear_map(*m);
        let wafer = if i % 2 == 0 { Wafer::Top } else { Wafer::Bottom };
        rf_surfaces.push(Surface::new(rf_block.transformed(&tr), Some(wafer)));
        if i < 2 {
            // the half turn already produced the opposite protrusion
            rf_surfaces.extend(bridge.iter().map(|b| Surface::new(b.transformed(&tr), Some(wafer))));
        }
        let corner = tr.apply_point(&Point::new(-x0 - 0.5 * jw, 0.0, x0 + 0.5 * jw));
        let label = quadrant_label(wafer, &corner);
        for (name, prim) in &dc_template {
            let role = Role::DcControl;
            dc.push(Electrode::new(format!("dc_{label}_{name}"), role, Some(wafer), vec![prim.transformed(&tr)]));
        }
    }
    let mut electrodes = vec![Electrode { name: "rf".into(), role: Role::Rf, surfaces: rf_surfaces }];
    electrodes.extend(dc);

    let ze = p.experimental_zone();
    let mut landmarks = BTreeMap::new();
    landmarks.insert("junction_center".to_string(), Point::origin());
    landmarks.insert("experimental_zone".to_string(), Point::new(0.0, 0.0, ze));
    landmarks.insert("trap_center".to_string(), Point::new(-ze, 0.0, 0.0));
    landmarks.insert("storage_leg".to_string(), Point::new(ze, 0.0, 0.0));
    let layout = TrapLayout {
        electrodes,
        frame: Frame::default(),
        ion_electrode_distance: p.ion_electrode_distance,
        wafer_separation: p.wafer_separation,
        landmarks,
        recipe: Some(Recipe::XJunction(p.clone())),
    };
    layout.validate()?;
    Ok(layout)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point_set(layout: &TrapLayout) -> Vec<[i64; 3]> {
        let mut pts: Vec<[i64; 3]> = layout
            .electrodes
            .iter()
            .flat_map(|e| e.vertices())
            .map(|p| [(p.x * 1e6).round() as i64, (p.y * 1e6).round() as i64, (p.z * 1e6).round() as i64])
            .collect();
        pts.sort();
        pts.dedup();
        pts
    }

    fn mapped_set(layout: &TrapLayout, f: impl Fn(&Point) -> Point) -> Vec<[i64; 3]> {
        let mut pts: Vec<[i64; 3]> = layout
            .electrodes
            .iter()
            .flat_map(|e| e.vertices())
            .map(|p| {
                let q = f(&p);
                [(q.x * 1e6).round() as i64, (q.y * 1e6).round() as i64, (q.z * 1e6).round() as i64]
            })
            .collect();
        pts.sort();
        pts.dedup();
        pts
    }

    #[test]
    fn appendix_trap_structure() {
        let l = build_linear_trap(&LinearTrapParams::appendix_seven_segment()).unwrap();
        assert_eq!(l.electrodes.len(), 15);
        let x0 = slot_half_width(185.0, 220.0);
        assert!((x0.hypot(110.0) - 185.0).abs() < 1e-9);
        let outer = l.electrode("dc_t1").unwrap();
        let inner = l.electrode("dc_t2").unwrap();
        let (lo, hi) = outer.bounding_box();
        assert!(((hi.z - lo.z) - 960.0).abs() < 1e-9);
        let (lo, hi) = inner.bounding_box();
        assert!(((hi.z - lo.z) - 160.0).abs() < 1e-9);
    }

    #[test]
    fn linear_trap_rejects_bad_input() {
        assert!(build_linear_trap(&LinearTrapParams::new(7, 160.0, 160.0, 185.0, 220.0, 160.0)).is_err());
        assert!(build_linear_trap(&LinearTrapParams::new(6, 160.0, 20.0, 185.0, 220.0, 160.0)).is_err());
        assert!(build_linear_trap(&LinearTrapParams::new(3, 100.0, 20.0, 185.0, 220.0, 200.0)).is_ok());
    }

    #[test]
    fn linear_trap_symmetries() {
        let mut p = LinearTrapParams::appendix_seven_segment();
        p.shaping.indentation = Some((60.0, 5.0));
        p.shaping.rf_gap_depth = Some(200.0);
        let l = build_linear_trap(&p).unwrap();
        let base = point_set(&l);
        assert_eq!(base, mapped_set(&l, |q| Point::new(-q.x, -q.y, q.z)));
        assert_eq!(base, mapped_set(&l, |q| Point::new(q.x, q.y, -q.z)));
    }

    #[test]
    fn junction_four_fold_symmetry() {
        for gap in [0.0, 230.0] {
            let mut p = JunctionParams::final_design();
            p.bridge_gap = gap;
            let l = build_x_junction(&p).unwrap();
            let base = point_set(&l);
            assert_eq!(base, mapped_set(&l, |q| Point::new(q.z, -q.y, -q.x)));
            assert_eq!(base, mapped_set(&l, |q| Point::new(-q.x, -q.y, q.z)));
            let pairs = l.symmetry_pairs(|q| Point::new(q.z, -q.y, -q.x), 1e-6);
            assert_eq!(pairs.len(), l.electrodes.len());
        }
    }

    #[test]
    fn junction_rejects_oversized_gap() {
        let mut p = JunctionParams::final_design();
        p.bridge_gap = 500.0;
        assert!(build_x_junction(&p).is_err());
    }

    #[test]
    fn closed_bridge_differs_in_topology() {
        let open = build_x_junction(&JunctionParams::final_design()).unwrap();
        let closed = build_x_junction(&JunctionParams::closed_bridge()).unwrap();
        let count = |l: &TrapLayout| l.electrode("rf").unwrap().surfaces.len();
        assert_eq!(count(&open), 8);
        assert_eq!(count(&closed), 6);
    }
}
