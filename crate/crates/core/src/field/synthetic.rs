use std::sync::Arc;

use super::{BasisValue, ElectrodeBasis, FieldError};
use crate::geometry::{Panel, PanelMesh};
use crate::hashing::ContentHasher;
use crate::{Point, Vec3};

type BasisFn = dyn Fn(&Point) -> Vec<BasisValue> + Send + Sync;

/// Basis defined by closed-form expressions, for oracle tests.
///
/// The closure returns one `(φ in V, E in V/m)` pair per electrode for a point
/// in µm.
#[derive(Clone)]
pub struct FnBasis {
    names: Vec<String>,
    rf: Option<usize>,
    f: Arc<BasisFn>,
    hash: String,
    anchors: Option<Vec<Point>>,
}

impl std::fmt::Debug for FnBasis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnBasis").field("names", &self.names).field("rf", &self.rf).finish()
    }
}

impl FnBasis {
    /// `tag` identifies the closure content in the cache hash.
    pub fn new(
        names: Vec<String>,
        rf: Option<usize>,
        tag: &str,
        f: impl Fn(&Point) -> Vec<BasisValue> + Send + Sync + 'static,
    ) -> Self {
        let mut h = ContentHasher::new();
        h.str("fn-basis").str(tag);
        for n in &names {
            h.str(n);
        }
        Self { names, rf, f: Arc::new(f), hash: h.finish(), anchors: None }
    }

    /// Ideal RF quadrupole, φ = -(x² - y²)/(2 r0²) per volt, so that
    /// E = (x, -y, 0)/r0².
    pub fn quadrupole(r0: f64) -> Self {
        let k = 1.0 / (r0 * r0);
        Self::new(vec!["rf".into()], Some(0), &format!("quadrupole {r0:e}"), move |p| {
            let phi = -0.5 * k * (p.x * p.x - p.y * p.y);
            vec![(phi, Vec3::new(p.x, -p.y, 0.0) * (k * 1e6))]
        })
    }

    /// Ideal quadrupole RF electrode plus a DC electrode with
    /// φ = (z² - (x² + y²)/2)/z0² per volt.
    pub fn quadrupole_with_endcaps(r0: f64, z0: f64) -> Self {
        let k = 1.0 / (r0 * r0);
        let kz = 1.0 / (z0 * z0);
        Self::new(vec!["rf".into(), "dc".into()], Some(0), &format!("quad-endcap {r0:e} {z0:e}"), move |p| {
            let rf = (-0.5 * k * (p.x * p.x - p.y * p.y), Vec3::new(p.x, -p.y, 0.0) * (k * 1e6));
            let dc_phi = kz * (p.z * p.z - 0.5 * (p.x * p.x + p.y * p.y));
            let dc_e = Vec3::new(p.x, p.y, -2.0 * p.z) * (kz * 1e6);
            vec![rf, (dc_phi, dc_e)]
        })
    }

    /// Single electrode producing the uniform field `e` (V/m per volt).
    pub fn uniform(e: Vec3, rf: bool) -> Self {
        Self::new(vec!["uniform".into()], rf.then_some(0), &format!("uniform {e:?} {rf}"), move |p| {
            vec![(-e.dot(&p.coords) * 1e-6, e)]
        })
    }

    /// Single DC electrode with φ(z) = Σ c_n zⁿ (V per volt, z in µm).
    pub fn axial_polynomial(coeffs: Vec<f64>) -> Self {
        let tag = format!("axial-poly {coeffs:?}");
        Self::new(vec!["poly".into()], None, &tag, move |p| {
            let mut phi = 0.0;
            let mut dphi = 0.0;
            for c in coeffs.iter().rev() {
                dphi = dphi * p.z + phi;
                phi = phi * p.z + c;
            }
            vec![(phi, Vec3::new(0.0, 0.0, -dphi * 1e6))]
        })
    }

    /// Gives each electrode a reference point so that `electrode_distance`
    /// is finite.
    pub fn with_anchors(mut self, anchors: Vec<Point>) -> Self {
        assert_eq!(anchors.len(), self.names.len(), "one anchor per electrode");
        self.anchors = Some(anchors);
        self
    }

    /// Toy segmented trap: the ideal RF quadrupole plus `n` pairs of DC point
    /// sources at (∓150, ±100, z_k) µm spaced by `pitch` along z, named
    /// `dc_t{k}` / `dc_b{k}`. Each source is scaled to 1 V at its distance
    /// from the axis, so fields are harmonic and closed form.
    pub fn segmented(r0: f64, n: usize, pitch: f64) -> Self {
        let k = 1.0 / (r0 * r0);
        let mut names = vec!["rf".to_string()];
        let mut anchors = vec![Point::new(r0, r0, 0.0)];
        let mut sources = Vec::new();
        for i in 0..n {
            let z = (i as f64 - 0.5 * (n as f64 - 1.0)) * pitch;
            for (tag, s) in [("t", Point::new(-150.0, 100.0, z)), ("b", Point::new(150.0, -100.0, z))] {
                names.push(format!("dc_{tag}{}", i + 1));
                anchors.push(s);
                sources.push(s);
            }
        }
        let scale = Vec3::new(150.0, 100.0, 0.0).norm();
        let tag = format!("segmented {r0:e} {n} {pitch:e}");
        Self::new(names, Some(0), &tag, move |p| {
            let mut out = vec![(-0.5 * k * (p.x * p.x - p.y * p.y), Vec3::new(p.x, -p.y, 0.0) * (k * 1e6))];
            for s in &sources {
                let d = p - s;
                let r = d.norm();
                out.push((scale / r, d * (scale / (r * r * r) * 1e6)));
            }
            out
        })
        .with_anchors(anchors)
    }
}

impl ElectrodeBasis for FnBasis {
    fn electrode_names(&self) -> &[String] {
        &self.names
    }

    fn rf_index(&self) -> Option<usize> {
        self.rf
    }

    fn eval_all(&self, p: &Point) -> Result<Vec<BasisValue>, FieldError> {
        Ok((self.f)(p))
    }

    fn electrode_distance(&self, e: usize, p: &Point) -> f64 {
        self.anchors.as_ref().map_or(f64::INFINITY, |a| (a[e] - p).norm())
    }

    fn content_hash(&self) -> String {
        self.hash.clone()
    }
}

/// Triangulated sphere centred at the origin, built by projecting a cube
/// whose faces are split into `n`×`n` squares; 12 n² panels on electrode 0.
pub fn sphere_mesh(radius: f64, n: usize) -> PanelMesh {
    let n = n.max(1);
    let mut panels = Vec::with_capacity(12 * n * n);
    let axes = [
        (Vec3::x(), Vec3::y(), Vec3::z()),
        (Vec3::y(), Vec3::z(), Vec3::x()),
        (Vec3::z(), Vec3::x(), Vec3::y()),
    ];
    for (a, b, c) in axes {
        for s in [1.0, -1.0] {
            let node = |i: usize, j: usize| {
                let u = -1.0 + 2.0 * i as f64 / n as f64;
                let v = -1.0 + 2.0 * j as f64 / n as f64;
                // equal-angle mapping keeps the panels close to uniform
                let (u, v) = ((u * std::f64::consts::FRAC_PI_4).tan(), (v * std::f64::consts::FRAC_PI_4).tan());
                let d = s * c + u * a + s * v * b;
                Point::from(d.normalize() * radius)
            };
            for i in 0..n {
                for j in 0..n {
                    let q = [node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)];
                    panels.push(Panel::new(&[q[0], q[1], q[2]], 0));
                    panels.push(Panel::new(&[q[0], q[2], q[3]], 0));
                }
            }
        }
    }
    PanelMesh::from_panels(panels, vec!["sphere".into()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_field_is_minus_gradient() {
        let b = FnBasis::axial_polynomial(vec![1.0, -2.0, 0.5, 0.0, 3.0]);
        let p = Point::new(0.0, 0.0, 0.7);
        let (phi, e) = b.eval_all(&p).unwrap()[0];
        assert!((phi - (1.0 - 1.4 + 0.5 * 0.49 + 3.0 * 0.7f64.powi(4))).abs() < 1e-12);
        let d = -2.0 + 0.7 + 12.0 * 0.7f64.powi(3);
        assert!((e.z + d * 1e6).abs() < 1e-6);
    }

    #[test]
    fn endcap_potential_is_harmonic() {
        let b = FnBasis::quadrupole_with_endcaps(100.0, 300.0);
        let h = 1e-2;
        let p = Point::new(3.0, -4.0, 5.0);
        for e in 0..2 {
            let phi = |q: Point| b.eval_all(&q).unwrap()[e].0;
            let mut lap = -6.0 * phi(p);
            for k in 0..3 {
                let mut d = Vec3::zeros();
                d[k] = h;
                lap += phi(p + d) + phi(p - d);
            }
            assert!(lap.abs() / (h * h) < 1e-9);
        }
    }

    #[test]
    fn sphere_mesh_is_closed_and_round() {
        let m = sphere_mesh(2.0, 8);
        assert_eq!(m.len(), 768);
        let area: f64 = m.electrode_areas()[0];
        assert!((area / (16.0 * std::f64::consts::PI) - 1.0).abs() < 0.01, "{}", area / (16.0 * std::f64::consts::PI));
        for p in &m.panels {
            for v in p.vertices() {
                assert!((v.coords.norm() - 2.0).abs() < 1e-12);
            }
        }
    }
}
