use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::polygon::{self, P2};
use super::RigidTransform;
use crate::{Point, Vec3};

/// Conductor surface primitives. Closed solids (`Block`, `Prism`) are
/// represented by their boundary faces; a `Plate` is a zero-thickness sheet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    /// Parallelogram `corner + s*edge_u + t*edge_v`, s,t in [0,1].
    Plate { corner: Point, edge_u: Vec3, edge_v: Vec3 },
    /// Parallelepiped spanned by three edges from `corner`.
    Block { corner: Point, edges: [Vec3; 3] },
    /// Planar simple polygon swept along `extrude`. Caps are cut into
    /// trapezoids along `slab_axis` (projected into the outline plane).
    Prism { outline: Vec<Point>, extrude: Vec3, slab_axis: Vec3 },
}

/// Flat convex polygon (3 or 4 vertices in practice), vertex order defines
/// the outward normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub vertices: Vec<Point>,
}

/// Newell normal (length = 2 × area for planar polygons).
pub fn newell(vertices: &[Point]) -> Vec3 {
    let n = vertices.len();
    let mut acc = Vec3::zeros();
    for i in 0..n {
        let a = vertices[i].coords;
        let b = vertices[(i + 1) % n].coords;
        acc += a.cross(&b);
    }
    acc
}

impl Face {
    pub fn new(vertices: Vec<Point>) -> Self {
        Self { vertices }
    }

    pub fn area(&self) -> f64 {
        0.5 * newell(&self.vertices).norm()
    }

    pub fn normal(&self) -> Vec3 {
        newell(&self.vertices).normalize()
    }

    /// Area centroid (fan triangulation from the first vertex).
    pub fn centroid(&self) -> Point {
        let v = &self.vertices;
        let mut acc = Vec3::zeros();
        let mut total = 0.0;
        for i in 1..v.len() - 1 {
            let a = 0.5 * (v[i] - v[0]).cross(&(v[i + 1] - v[0])).norm();
            acc += a * (v[0].coords + v[i].coords + v[i + 1].coords) / 3.0;
            total += a;
        }
        if total > 0.0 {
            Point::from(acc / total)
        } else {
            Point::from(v.iter().fold(Vec3::zeros(), |s, p| s + p.coords) / v.len() as f64)
        }
    }

    /// Largest vertex-to-vertex distance.
    pub fn diameter(&self) -> f64 {
        let v = &self.vertices;
        let mut d: f64 = 0.0;
        for i in 0..v.len() {
            for j in (i + 1)..v.len() {
                d = d.max((v[i] - v[j]).norm());
            }
        }
        d
    }

    pub fn longest_edge(&self) -> f64 {
        let v = &self.vertices;
        (0..v.len()).map(|i| (v[(i + 1) % v.len()] - v[i]).norm()).fold(0.0, f64::max)
    }

    pub fn distance_to(&self, p: &Point) -> f64 {
        let n = self.normal();
        let v = &self.vertices;
        let h = (p - v[0]).dot(&n);
        let q = p - h * n;
        let inside = (0..v.len()).all(|i| {
            let a = v[i];
            let b = v[(i + 1) % v.len()];
            (b - a).cross(&(q - a)).dot(&n) >= 0.0
        });
        if inside {
            return h.abs();
        }
        (0..v.len())
            .map(|i| {
                let a = v[i];
                let b = v[(i + 1) % v.len()];
                let d = b - a;
                let t = ((p - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
                (p - (a + t * d)).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn transformed(&self, t: &RigidTransform) -> Face {
        Face { vertices: self.vertices.iter().map(|v| t.apply_point(v)).collect() }
    }
}

/// In-plane coordinates of a prism outline.
struct PlaneFrame {
    origin: Point,
    u: Vec3,
    v: Vec3,
    n: Vec3,
}

impl PlaneFrame {
    fn new(outline: &[Point], slab_axis: &Vec3) -> Option<Self> {
        let n = newell(outline);
        if n.norm() == 0.0 {
            return None;
        }
        let n = n.normalize();
        let u = slab_axis - slab_axis.dot(&n) * n;
        if u.norm() < 1e-12 {
            return None;
        }
        let u = u.normalize();
        let v = n.cross(&u);
        Some(Self { origin: outline[0], u, v, n })
    }

    fn to_2d(&self, p: &Point) -> P2 {
        let d = p - self.origin;
        [d.dot(&self.u), d.dot(&self.v)]
    }

    fn to_3d(&self, q: P2) -> Point {
        self.origin + q[0] * self.u + q[1] * self.v
    }
}

fn oriented_quad(corner: Point, a: Vec3, b: Vec3, center: &Point) -> Face {
    let f = Face::new(vec![corner, corner + a, corner + a + b, corner + b]);
    orient_outward(f, center)
}

fn orient_outward(mut f: Face, center: &Point) -> Face {
    if newell(&f.vertices).dot(&(f.centroid() - center)) < 0.0 {
        f.vertices.reverse();
    }
    f
}

impl Primitive {
    /// Axis-aligned box from two opposite corners.
    pub fn aabb(lo: Point, hi: Point) -> Self {
        let d = hi - lo;
        Primitive::Block { corner: lo, edges: [Vec3::new(d.x, 0.0, 0.0), Vec3::new(0.0, d.y, 0.0), Vec3::new(0.0, 0.0, d.z)] }
    }

    pub fn faces(&self) -> Vec<Face> {
        match self {
            Primitive::Plate { corner, edge_u, edge_v } => {
                vec![Face::new(vec![*corner, corner + edge_u, corner + edge_u + edge_v, corner + edge_v])]
            }
            Primitive::Block { corner, edges } => {
                let [a, b, c] = *edges;
                let center = corner + 0.5 * (a + b + c);
                vec![
                    oriented_quad(*corner, a, b, &center),
                    oriented_quad(corner + c, a, b, &center),
                    oriented_quad(*corner, b, c, &center),
                    oriented_quad(corner + a, b, c, &center),
                    oriented_quad(*corner, c, a, &center),
                    oriented_quad(corner + b, c, a, &center),
                ]
            }
            Primitive::Prism { outline, extrude, slab_axis } => prism_faces(outline, extrude, slab_axis),
        }
    }

    /// Analytic surface area (µm²).
    pub fn area(&self) -> f64 {
        match self {
            Primitive::Plate { edge_u, edge_v, .. } => edge_u.cross(edge_v).norm(),
            Primitive::Block { edges, .. } => {
                let [a, b, c] = edges;
                2.0 * (a.cross(b).norm() + b.cross(c).norm() + c.cross(a).norm())
            }
            Primitive::Prism { outline, extrude, .. } => {
                let cap = 0.5 * newell(outline).norm();
                let n = outline.len();
                let sides: f64 = (0..n).map(|i| (outline[(i + 1) % n] - outline[i]).cross(extrude).norm()).sum();
                2.0 * cap + sides
            }
        }
    }

    /// Point-in-solid test with margin `tol` (negative shrinks the solid).
    /// Plates only contain points for non-negative `tol`.
    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        match self {
            Primitive::Plate { corner, edge_u, edge_v } => {
                if tol < 0.0 {
                    return false;
                }
                let n = edge_u.cross(edge_v).normalize();
                let d = p - corner;
                if d.dot(&n).abs() > tol {
                    return false;
                }
                let m = Matrix3::from_columns(&[*edge_u, *edge_v, n]);
                match m.try_inverse() {
                    Some(inv) => {
                        let c = inv * d;
                        in_unit(c.x, tol / edge_u.norm()) && in_unit(c.y, tol / edge_v.norm())
                    }
                    None => false,
                }
            }
            Primitive::Block { corner, edges } => {
                let m = Matrix3::from_columns(edges);
                match m.try_inverse() {
                    Some(inv) => {
                        let c = inv * (p - corner);
                        (0..3).all(|k| in_unit(c[k], tol / edges[k].norm()))
                    }
                    None => false,
                }
            }
            Primitive::Prism { outline, extrude, slab_axis } => {
                let Some(frame) = PlaneFrame::new(outline, slab_axis) else { return false };
                let m = Matrix3::from_columns(&[frame.u, frame.v, *extrude]);
                let Some(inv) = m.try_inverse() else { return false };
                let c = inv * (p - frame.origin);
                let h = extrude.norm();
                if !in_unit(c.z, tol / h) {
                    return false;
                }
                let poly: Vec<P2> = outline.iter().map(|q| frame.to_2d(q)).collect();
                let q = [c.x, c.y];
                let inside = polygon::contains(&poly, q);
                let dist = polygon::boundary_distance(&poly, q);
                if tol >= 0.0 {
                    inside || dist <= tol
                } else {
                    inside && dist >= -tol
                }
            }
        }
    }

    /// Non-degeneracy check.
    pub fn check(&self) -> Result<(), String> {
        let finite = |v: &Vec3| v.iter().all(|x| x.is_finite());
        match self {
            Primitive::Plate { corner, edge_u, edge_v } => {
                if !finite(&corner.coords) || !finite(edge_u) || !finite(edge_v) {
                    return Err("non-finite coordinates".into());
                }
                if edge_u.cross(edge_v).norm() <= 1e-12 {
                    return Err("plate has zero area".into());
                }
            }
            Primitive::Block { corner, edges } => {
                if !finite(&corner.coords) || !edges.iter().all(finite) {
                    return Err("non-finite coordinates".into());
                }
                if Matrix3::from_columns(edges).determinant().abs() <= 1e-12 {
                    return Err("block has zero volume".into());
                }
            }
            Primitive::Prism { outline, extrude, slab_axis } => {
                if outline.len() < 3 {
                    return Err("outline needs at least 3 vertices".into());
                }
                if !outline.iter().all(|p| finite(&p.coords)) || !finite(extrude) || !finite(slab_axis) {
                    return Err("non-finite coordinates".into());
                }
                let Some(frame) = PlaneFrame::new(outline, slab_axis) else {
                    return Err("outline has zero area or slab axis is normal to it".into());
                };
                if outline.iter().any(|p| (p - frame.origin).dot(&frame.n).abs() > 1e-6) {
                    return Err("outline is not planar".into());
                }
                if extrude.dot(&frame.n).abs() <= 1e-9 {
                    return Err("extrusion is parallel to the outline plane".into());
                }
                let poly: Vec<P2> = outline.iter().map(|q| frame.to_2d(q)).collect();
                if !polygon::is_simple(&poly) {
                    return Err("outline self-intersects".into());
                }
            }
        }
        Ok(())
    }

    pub fn transformed(&self, t: &RigidTransform) -> Primitive {
        match self {
            Primitive::Plate { corner, edge_u, edge_v } => Primitive::Plate {
                corner: t.apply_point(corner),
                edge_u: t.apply_vector(edge_u),
                edge_v: t.apply_vector(edge_v),
            },
            Primitive::Block { corner, edges } => Primitive::Block {
                corner: t.apply_point(corner),
                edges: edges.map(|e| t.apply_vector(&e)),
            },
            Primitive::Prism { outline, extrude, slab_axis } => Primitive::Prism {
                outline: outline.iter().map(|p| t.apply_point(p)).collect(),
                extrude: t.apply_vector(extrude),
                slab_axis: t.apply_vector(slab_axis),
            },
        }
    }
}

fn in_unit(c: f64, margin: f64) -> bool {
    c >= -margin && c <= 1.0 + margin
}

fn prism_faces(outline: &[Point], extrude: &Vec3, slab_axis: &Vec3) -> Vec<Face> {
    let Some(frame) = PlaneFrame::new(outline, slab_axis) else { return Vec::new() };
    let poly: Vec<P2> = outline.iter().map(|q| frame.to_2d(q)).collect();
    let pieces = polygon::slab_decomposition(&poly);
    // pieces are counter-clockwise about frame.n
    let up = extrude.dot(&frame.n) > 0.0;
    let mut faces = Vec::with_capacity(2 * pieces.len() + outline.len());
    for piece in &pieces {
        let base: Vec<Point> = piece.iter().map(|q| frame.to_3d(*q)).collect();
        let top: Vec<Point> = base.iter().map(|p| p + extrude).collect();
        let (mut b, mut t) = (Face::new(base), Face::new(top));
        if up {
            b.vertices.reverse();
        } else {
            t.vertices.reverse();
        }
        faces.push(b);
        faces.push(t);
    }
    let ccw = (polygon::signed_area(&poly) > 0.0) == up;
    let n = outline.len();
    for i in 0..n {
        let a = outline[i];
        let b = outline[(i + 1) % n];
        let mut f = Face::new(vec![a, b, b + extrude, a + extrude]);
        if !ccw {
            f.vertices.reverse();
        }
        faces.push(f);
    }
    faces
}

#[cfg(test)]
mod tests {
    use super::*;

    fn total_area(p: &Primitive) -> f64 {
        p.faces().iter().map(Face::area).sum()
    }

    #[test]
    fn block_faces_are_outward_and_sum_to_area() {
        let b = Primitive::aabb(Point::new(0.0, 0.0, 0.0), Point::new(2.0, 3.0, 4.0));
        assert!((total_area(&b) - b.area()).abs() < 1e-12);
        let c = Point::new(1.0, 1.5, 2.0);
        for f in b.faces() {
            assert!(f.normal().dot(&(f.centroid() - c)) > 0.0);
        }
        assert!(b.contains(&c, 0.0));
        assert!(!b.contains(&Point::new(2.5, 1.0, 1.0), 0.0));
        assert!(b.contains(&Point::new(2.05, 1.0, 1.0), 0.1));
        assert!(!b.contains(&Point::new(0.0, 1.0, 1.0), -1e-6));
    }

    #[test]
    fn l_shaped_prism_faces_outward() {
        let outline = vec![
            Point::new(0.0, 0.0, 0.0),
            Point::new(4.0, 0.0, 0.0),
            Point::new(4.0, 0.0, 1.0),
            Point::new(1.0, 0.0, 1.0),
            Point::new(1.0, 0.0, 3.0),
            Point::new(0.0, 0.0, 3.0),
        ];
        let p = Primitive::Prism { outline, extrude: Vec3::new(0.0, 2.0, 0.0), slab_axis: Vec3::x() };
        p.check().unwrap();
        assert!((total_area(&p) - p.area()).abs() < 1e-9);
        // divergence theorem: sum of outward normal * area * centroid.x = volume
        let vol: f64 = p.faces().iter().map(|f| f.normal().x * f.area() * f.centroid().x).sum();
        assert!((vol - 2.0 * 6.0).abs() < 1e-9);
        assert!(p.contains(&Point::new(0.5, 1.0, 2.0), 0.0));
        assert!(!p.contains(&Point::new(2.0, 1.0, 2.0), 0.0));
    }

    #[test]
    fn degenerate_primitives_are_rejected() {
        let p = Primitive::Plate { corner: Point::origin(), edge_u: Vec3::x(), edge_v: 2.0 * Vec3::x() };
        assert!(p.check().is_err());
        let b = Primitive::Block { corner: Point::origin(), edges: [Vec3::x(), Vec3::y(), Vec3::zeros()] };
        assert!(b.check().is_err());
    }

    #[test]
    fn face_distance() {
        let f = Face::new(vec![
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(1.0, 1.0, 0.0),
            Point::new(0.0, 1.0, 0.0),
        ]);
        assert!((f.distance_to(&Point::new(0.5, 0.5, 2.0)) - 2.0).abs() < 1e-12);
        assert!((f.distance_to(&Point::new(2.0, 0.5, 0.0)) - 1.0).abs() < 1e-12);
    }
}
