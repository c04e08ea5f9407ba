//! Flat-panel discretization of electrode surfaces.
//!
//! Faces are bisected recursively while the local target size varies strongly
//! across them, then split into equal pieces. Equal splits depend only on the
//! vertex positions, so mirror-image faces produce mirror-image panels.

use serde::{Deserialize, Serialize};

use super::primitive::{newell, Face};
use super::{GeometryError, TrapLayout};
use crate::hashing::ContentHasher;
use crate::{Point, Vec3};

/// Axis-aligned box with a target panel size inside it (µm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub lo: Point,
    pub hi: Point,
    pub size: f64,
}

impl Refinement {
    pub fn new(lo: Point, hi: Point, size: f64) -> Self {
        Self { lo, hi, size }
    }

    /// Distance over the first `axes` coordinates only.
    fn distance_in_axes(&self, lo: &Point, hi: &Point, axes: usize) -> f64 {
        let mut d2 = 0.0;
        for k in 0..axes {
            let gap = (self.lo[k] - hi[k]).max(lo[k] - self.hi[k]).max(0.0);
            d2 += gap * gap;
        }
        d2.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshConfig {
    /// Coarse panel size away from refinement regions (µm).
    pub max_panel_size: f64,
    #[serde(default)]
    pub refinements: Vec<Refinement>,
    /// Allowed panel size growth per µm of distance from a refinement box.
    pub growth: f64,
    pub panel_budget: usize,
    /// When set, faces running along z are cut into strips of about this
    /// length (doubled where the target size allows) between their transverse
    /// edges, and the transverse split ignores z. Identical features along z
    /// then get identical meshes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axial_step: Option<f64>,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { max_panel_size: 50.0, refinements: Vec::new(), growth: 0.5, panel_budget: 50_000, axial_step: None }
    }
}

impl MeshConfig {
    pub fn uniform(size: f64) -> Self {
        Self { max_panel_size: size, ..Self::default() }
    }

    pub fn with_refinement(mut self, r: Refinement) -> Self {
        self.refinements.push(r);
        self
    }

    pub fn with_axial_step(mut self, step: f64) -> Self {
        self.axial_step = Some(step);
        self
    }

    fn validate(&self) -> Result<(), GeometryError> {
        if let Some(s) = self.axial_step {
            if !(s.is_finite() && s > 0.0) {
                return Err(GeometryError::InvalidParameter(format!("axial_step must be positive, got {s}")));
            }
        }
        if !(self.max_panel_size.is_finite() && self.max_panel_size > 0.0) {
            return Err(GeometryError::InvalidParameter(format!(
                "max_panel_size must be positive, got {}",
                self.max_panel_size
            )));
        }
        if !(self.growth.is_finite() && self.growth >= 0.0) {
            return Err(GeometryError::InvalidParameter("growth must be non-negative".into()));
        }
        for r in &self.refinements {
            if !(r.size > 0.0 && r.size <= self.max_panel_size) {
                return Err(GeometryError::InvalidParameter(format!(
                    "refinement size {} must be positive and at most max_panel_size {}",
                    r.size, self.max_panel_size
                )));
            }
            if (0..3).any(|k| r.hi[k] < r.lo[k]) {
                return Err(GeometryError::InvalidParameter("refinement box has hi < lo".into()));
            }
        }
        Ok(())
    }

    /// Largest target size over the vertices of a face.
    fn far_target(&self, v: &[Point]) -> f64 {
        v.iter().map(|p| self.target(p, p)).fold(0.0, f64::max)
    }

    /// Target size for a face with the given bounding box.
    fn target(&self, lo: &Point, hi: &Point) -> f64 {
        self.target_in_axes(lo, hi, 3)
    }

    /// Target size measuring distance in x and y only.
    fn target_transverse(&self, lo: &Point, hi: &Point) -> f64 {
        self.target_in_axes(lo, hi, 2)
    }

    fn target_in_axes(&self, lo: &Point, hi: &Point, axes: usize) -> f64 {
        self.refinements
            .iter()
            .map(|r| r.size + self.growth * r.distance_in_axes(lo, hi, axes))
            .fold(self.max_panel_size, f64::min)
    }
}

/// Flat convex panel with 3 or 4 vertices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel {
    v: [Point; 4],
    nv: u8,
    pub centroid: Point,
    pub normal: Vec3,
    pub area: f64,
    pub electrode: usize,
}

impl Panel {
    pub fn new(vertices: &[Point], electrode: usize) -> Self {
        assert!(vertices.len() == 3 || vertices.len() == 4, "panels have 3 or 4 vertices");
        let mut v = [vertices[0]; 4];
        v[..vertices.len()].copy_from_slice(vertices);
        let face = Face::new(vertices.to_vec());
        let n = newell(vertices);
        Self {
            v,
            nv: vertices.len() as u8,
            centroid: face.centroid(),
            normal: n.normalize(),
            area: 0.5 * n.norm(),
            electrode,
        }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.v[..self.nv as usize]
    }

    /// Largest vertex-to-vertex distance.
    pub fn diameter(&self) -> f64 {
        let v = self.vertices();
        let mut d: f64 = 0.0;
        for i in 0..v.len() {
            for j in (i + 1)..v.len() {
                d = d.max((v[i] - v[j]).norm());
            }
        }
        d
    }

    pub fn longest_edge(&self) -> f64 {
        let v = self.vertices();
        (0..v.len()).map(|i| (v[(i + 1) % v.len()] - v[i]).norm()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelMesh {
    pub panels: Vec<Panel>,
    pub electrode_names: Vec<String>,
}

impl PanelMesh {
    pub fn from_panels(panels: Vec<Panel>, electrode_names: Vec<String>) -> Self {
        Self { panels, electrode_names }
    }

    pub fn len(&self) -> usize {
        self.panels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.panels.is_empty()
    }

    pub fn n_electrodes(&self) -> usize {
        self.electrode_names.len()
    }

    pub fn electrode_areas(&self) -> Vec<f64> {
        let mut a = vec![0.0; self.electrode_names.len()];
        for p in &self.panels {
            a[p.electrode] += p.area;
        }
        a
    }

    /// Content hash over the exact panel geometry and names.
    pub fn hash(&self) -> String {
        let mut h = ContentHasher::new();
        for n in &self.electrode_names {
            h.str(n);
        }
        for p in &self.panels {
            h.u64(p.electrode as u64).u64(p.nv as u64);
            for v in p.vertices() {
                h.f64(v.x).f64(v.y).f64(v.z);
            }
        }
        h.finish()
    }
}

fn bbox(v: &[Point]) -> (Point, Point) {
    let mut lo = v[0];
    let mut hi = v[0];
    for p in v {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

fn mid(a: &Point, b: &Point) -> Point {
    Point::from(0.5 * (a.coords + b.coords))
}

fn same_length(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.max(b)
}

/// Recursively splits `v` until the longest edge is below the target size,
/// calling `emit` for each final panel. Returns the number of panels, or
/// stops early once `limit` is exceeded.
fn subdivide(v: &[Point], cfg: &MeshConfig, limit: usize, emit: &mut dyn FnMut(&[Point])) -> usize {
    let (lo, hi) = bbox(v);
    let target = cfg.target(&lo, &hi);
    let n = v.len();
    let edges: Vec<f64> = (0..n).map(|i| (v[(i + 1) % n] - v[i]).norm()).collect();
    let longest = edges.iter().cloned().fold(0.0, f64::max);
    if longest <= target * (1.0 + 1e-9) {
        emit(v);
        return 1;
    }
    // where the size field is nearly flat over the face, split it into
    // equal pieces so regular faces tile exactly
    let far = cfg.far_target(v);
    if far <= 2.0 * target {
        return uniform_split(v, &edges, target, limit, emit);
    }
    let mut children: Vec<Vec<Point>> = Vec::with_capacity(4);
    if n == 3 {
        let k = (0..3).max_by(|&a, &b| edges[a].partial_cmp(&edges[b]).unwrap()).unwrap();
        let ties = (0..3).filter(|&i| same_length(edges[i], edges[k])).count();
        if ties > 1 {
            let (m0, m1, m2) = (mid(&v[0], &v[1]), mid(&v[1], &v[2]), mid(&v[2], &v[0]));
            children.push(vec![v[0], m0, m2]);
            children.push(vec![m0, v[1], m1]);
            children.push(vec![m2, m1, v[2]]);
            children.push(vec![m0, m1, m2]);
        } else {
            let (a, b, c) = (v[k], v[(k + 1) % 3], v[(k + 2) % 3]);
            let m = mid(&a, &b);
            children.push(vec![a, m, c]);
            children.push(vec![m, b, c]);
        }
    } else {
        // pair (01, 23) against pair (12, 30)
        let p0 = edges[0].max(edges[2]);
        let p1 = edges[1].max(edges[3]);
        let split0 = p0 > target * (1.0 + 1e-9);
        let split1 = p1 > target * (1.0 + 1e-9);
        let (m01, m12, m23, m30) = (mid(&v[0], &v[1]), mid(&v[1], &v[2]), mid(&v[2], &v[3]), mid(&v[3], &v[0]));
        if split0 && split1 {
            let c = Point::from(0.25 * (m01.coords + m23.coords + m12.coords + m30.coords));
            children.push(vec![v[0], m01, c, m30]);
            children.push(vec![m01, v[1], m12, c]);
            children.push(vec![c, m12, v[2], m23]);
            children.push(vec![m30, c, m23, v[3]]);
        } else if p0 >= p1 {
            children.push(vec![v[0], m01, m23, v[3]]);
            children.push(vec![m01, v[1], v[2], m23]);
        } else {
            children.push(vec![v[0], v[1], m12, m30]);
            children.push(vec![m30, m12, v[2], v[3]]);
        }
    }
    let mut count = 0;
    for c in children {
        count += subdivide(&c, cfg, limit.saturating_sub(count), emit);
        if count > limit {
            break;
        }
    }
    count
}

fn pieces(len: f64, target: f64) -> usize {
    ((len / target) * (1.0 - 1e-9)).ceil().max(1.0) as usize
}

fn uniform_split(v: &[Point], edges: &[f64], target: f64, limit: usize, emit: &mut dyn FnMut(&[Point])) -> usize {
    if v.len() == 3 {
        let k = pieces(edges.iter().cloned().fold(0.0, f64::max), target);
        if k * k > limit {
            return k * k;
        }
        let at = |i: usize, j: usize| {
            // barycentric grid point i steps toward v1, j steps toward v2
            let (a, b) = (i as f64 / k as f64, j as f64 / k as f64);
            Point::from(v[0].coords + a * (v[1] - v[0]) + b * (v[2] - v[0]))
        };
        for i in 0..k {
            for j in 0..(k - i) {
                emit(&[at(i, j), at(i + 1, j), at(i, j + 1)]);
                if i + j + 1 < k {
                    emit(&[at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)]);
                }
            }
        }
        return k * k;
    }
    let ku = pieces(edges[0].max(edges[2]), target);
    let kv = pieces(edges[1].max(edges[3]), target);
    if ku * kv > limit {
        return ku * kv;
    }
    let at = |i: usize, j: usize| {
        let (s, r) = (i as f64 / ku as f64, j as f64 / kv as f64);
        Point::from(
            (1.0 - s) * (1.0 - r) * v[0].coords + s * (1.0 - r) * v[1].coords + s * r * v[2].coords + (1.0 - s) * r * v[3].coords,
        )
    };
    for i in 0..ku {
        for j in 0..kv {
            emit(&[at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)]);
        }
    }
    ku * kv
}

/// Keeps the part of convex polygon `v` where `f(p) >= 0`.
fn clip(v: &[Point], f: impl Fn(&Point) -> f64) -> Vec<Point> {
    let n = v.len();
    let mut out = Vec::with_capacity(n + 2);
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        let (fa, fb) = (f(&a), f(&b));
        if fa >= 0.0 {
            out.push(a);
        }
        if (fa >= 0.0) != (fb >= 0.0) {
            let t = fa / (fa - fb);
            out.push(Point::from(a.coords + t * (b - a)));
        }
    }
    // drop repeated points left where a cut passes through a vertex
    let scale = out.iter().map(|p| p.coords.amax()).fold(1.0, f64::max);
    let mut clean: Vec<Point> = Vec::with_capacity(out.len());
    for p in out {
        if clean.last().is_none_or(|q| (p - q).norm() > 1e-9 * scale) {
            clean.push(p);
        }
    }
    while clean.len() > 1 && (clean[0] - clean[clean.len() - 1]).norm() <= 1e-9 * scale {
        clean.pop();
    }
    clean
}

fn emit_convex(v: &[Point], emit: &mut dyn FnMut(&[Point])) -> usize {
    if v.len() < 3 || newell(v).norm() <= 1e-12 * (v[1] - v[0]).norm_squared().max(1e-30) {
        return 0;
    }
    if v.len() <= 4 {
        emit(v);
        return 1;
    }
    for i in 1..v.len() - 1 {
        emit(&[v[0], v[i], v[i + 1]]);
    }
    v.len() - 2
}

/// Sorted cut positions splitting `[a, b]` by recursive halving until every
/// piece is below `target(lo, hi)`.
fn graded_breaks(a: f64, b: f64, target: &dyn Fn(f64, f64) -> f64, out: &mut Vec<f64>) {
    if b - a > target(a, b) * (1.0 + 1e-9) && b - a > 1e-6 {
        let m = 0.5 * (a + b);
        graded_breaks(a, m, target, out);
        out.push(m);
        graded_breaks(m, b, target, out);
    }
}

/// Strip mesher for faces that run along z. Returns `None` for faces whose
/// normal is mostly along z.
fn strip_mesh(v: &[Point], cfg: &MeshConfig, base: f64, limit: usize, emit: &mut dyn FnMut(&[Point])) -> Option<usize> {
    let n = newell(v).normalize();
    let along = Vec3::z() - n.z * n;
    if along.norm() < 0.7 {
        return None;
    }
    let along = along.normalize();
    let across = n.cross(&along);
    let (lo, hi) = bbox(v);
    let face_target = cfg.target_transverse(&lo, &hi);
    let mut step = base;
    while 2.0 * step <= face_target * (1.0 + 1e-9) {
        step *= 2.0;
    }
    // transverse breaks from the size field of the sub-band, ignoring z
    let t_of = |p: &Point| p.coords.dot(&across);
    let (t0, t1) = v.iter().map(t_of).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), t| (a.min(t), b.max(t)));
    let band_target = |a: f64, b: f64| {
        let band = clip(&clip(v, |p| t_of(p) - a), |p| b - t_of(p));
        if band.len() < 3 {
            return f64::INFINITY;
        }
        let (lo, hi) = bbox(&band);
        cfg.target_transverse(&lo, &hi)
    };
    let mut breaks = vec![t0];
    graded_breaks(t0, t1, &band_target, &mut breaks);
    breaks.push(t1);
    // z-breaks at transverse edges, then equal divisions in between, so
    // translated copies of a feature get translated copies of its mesh
    let mut zs = vec![lo.z, hi.z];
    for (i, a) in v.iter().enumerate() {
        let b = v[(i + 1) % v.len()];
        if (a.z - b.z).abs() <= 1e-9 * (hi.z - lo.z) {
            zs.push(a.z);
        }
    }
    zs.sort_by(f64::total_cmp);
    zs.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (hi.z - lo.z).max(1.0));
    let mut cuts = vec![f64::NEG_INFINITY];
    for w in zs.windows(2) {
        let n = (((w[1] - w[0]) / step - 1e-9).ceil() as usize).max(1);
        cuts.extend((1..=n).map(|k| w[0] + (w[1] - w[0]) * k as f64 / n as f64));
    }
    *cuts.last_mut().unwrap() = f64::INFINITY;
    let strips = cuts.len() - 1;
    if strips * (breaks.len() - 1) > limit {
        return Some(strips * (breaks.len() - 1));
    }
    let mut count = 0;
    for c in cuts.windows(2) {
        let (za, zb) = (c[0], c[1]);
        let strip = clip(&clip(v, |p| p.z - za), |p| zb - p.z);
        if strip.len() < 3 {
            continue;
        }
        for w in breaks.windows(2) {
            let piece = clip(&clip(&strip, |p| t_of(p) - w[0]), |p| w[1] - t_of(p));
            count += emit_convex(&piece, emit);
        }
    }
    Some(count)
}

fn mesh_face(v: &[Point], cfg: &MeshConfig, limit: usize, emit: &mut dyn FnMut(&[Point])) -> usize {
    if let Some(base) = cfg.axial_step {
        if let Some(n) = strip_mesh(v, cfg, base, limit, emit) {
            return n;
        }
    }
    subdivide(v, cfg, limit, emit)
}

/// Splits every electrode face into panels no larger than the local target
/// size. Faces are meshed at their nominal position and then moved by their
/// surface placement.
pub fn panelize(layout: &TrapLayout, cfg: &MeshConfig) -> Result<PanelMesh, GeometryError> {
    cfg.validate()?;
    let limit = cfg.panel_budget.saturating_mul(20).max(1);
    let mut estimate = 0usize;
    for e in &layout.electrodes {
        for s in &e.surfaces {
            for f in s.primitive.faces() {
                estimate += mesh_face(&f.vertices, cfg, limit, &mut |_| {});
                if estimate > limit {
                    break;
                }
            }
        }
    }
    if estimate > cfg.panel_budget {
        return Err(GeometryError::PanelBudget { estimate, budget: cfg.panel_budget });
    }
    let mut panels = Vec::with_capacity(estimate);
    for (ei, e) in layout.electrodes.iter().enumerate() {
        for s in &e.surfaces {
            let placed = !s.placement.is_identity();
            for f in s.primitive.faces() {
                mesh_face(&f.vertices, cfg, usize::MAX, &mut |v| {
                    if placed {
                        let moved: Vec<Point> = v.iter().map(|p| s.placement.apply_point(p)).collect();
                        panels.push(Panel::new(&moved, ei));
                    } else {
                        panels.push(Panel::new(v, ei));
                    }
                });
            }
        }
    }
    Ok(PanelMesh { panels, electrode_names: layout.electrodes.iter().map(|e| e.name.clone()).collect() })
}
