//! Potential of a uniformly charged flat polygon.
//!
//! For a panel S and observation point r the kernel is
//! `I(r) = ∫_S dA' / |r - r'|` (µm) together with its gradient with respect
//! to r (dimensionless). The closed form is the edge-sum expression of
//! Wilton et al. (1984); far away a 4-point rule is used instead.

use crate::geometry::Panel;
use crate::{Point, Vec3};

/// Precomputed panel data for repeated kernel evaluation.
#[derive(Debug, Clone)]
pub struct PanelKernel {
    verts: [Point; 4],
    nv: usize,
    normal: Vec3,
    /// Unit edge directions and in-plane outward edge normals.
    edge_dir: [Vec3; 4],
    edge_out: [Vec3; 4],
    quad_points: [Point; 4],
    quad_weights: [f64; 4],
    pub centroid: Point,
    pub diameter: f64,
}

impl PanelKernel {
    pub fn new(p: &Panel) -> Self {
        let v = p.vertices();
        let nv = v.len();
        let mut verts = [v[0]; 4];
        verts[..nv].copy_from_slice(v);
        let n = p.normal;
        let mut edge_dir = [Vec3::zeros(); 4];
        let mut edge_out = [Vec3::zeros(); 4];
        for i in 0..nv {
            let d = (v[(i + 1) % nv] - v[i]).normalize();
            edge_dir[i] = d;
            edge_out[i] = d.cross(&n);
        }
        let (quad_points, quad_weights) = quadrature(v, p.area);
        Self {
            verts,
            nv,
            normal: n,
            edge_dir,
            edge_out,
            quad_points,
            quad_weights,
            centroid: p.centroid,
            diameter: p.diameter(),
        }
    }

    /// True if `r` is far enough for the quadrature rule.
    #[inline]
    pub fn is_far(&self, r: &Point, ratio: f64) -> bool {
        (r - self.centroid).norm_squared() > (ratio * self.diameter).powi(2)
    }

    /// Closed-form potential integral (µm).
    pub fn potential(&self, r: &Point) -> f64 {
        self.exact(r, false).0
    }

    /// Closed-form potential integral and its gradient with respect to `r`.
    pub fn potential_and_gradient(&self, r: &Point) -> (f64, Vec3) {
        self.exact(r, true)
    }

    fn exact(&self, r: &Point, want_grad: bool) -> (f64, Vec3) {
        let n = self.normal;
        let h = (r - self.verts[0]).dot(&n);
        let ah = h.abs();
        let rho = r - h * n;
        let mut pot = 0.0;
        let mut beta_sum = 0.0;
        let mut grad_in_plane = Vec3::zeros();
        for i in 0..self.nv {
            let pm = self.verts[i];
            let pp = self.verts[(i + 1) % self.nv];
            let l = self.edge_dir[i];
            let u = self.edge_out[i];
            let lm = (pm - rho).dot(&l);
            let lp = (pp - rho).dot(&l);
            let p0 = (pm - rho).dot(&u);
            let r0sq = p0 * p0 + h * h;
            let rm = (r - pm).norm();
            let rp = (r - pp).norm();
            let f = edge_log(lm, lp, rm, rp, r0sq);
            let beta = if p0.abs() < 1e-300 {
                0.0
            } else {
                (p0 * lp / (r0sq + ah * rp)).atan() - (p0 * lm / (r0sq + ah * rm)).atan()
            };
            pot += p0 * f;
            beta_sum += beta;
            if want_grad {
                grad_in_plane -= u * f;
            }
        }
        pot -= ah * beta_sum;
        let grad = if want_grad { grad_in_plane - h.signum() * beta_sum * n } else { Vec3::zeros() };
        // exactly in the plane the normal derivative is the average of both sides
        let grad = if want_grad && h == 0.0 { grad_in_plane } else { grad };
        (pot, grad)
    }

    /// Quadrature approximation of the potential integral.
    #[inline]
    pub fn potential_far(&self, r: &Point) -> f64 {
        let mut s = 0.0;
        for k in 0..4 {
            s += self.quad_weights[k] / (r - self.quad_points[k]).norm();
        }
        s
    }

    /// Quadrature approximation of the potential integral and its gradient.
    #[inline]
    pub fn potential_and_gradient_far(&self, r: &Point) -> (f64, Vec3) {
        let mut s = 0.0;
        let mut g = Vec3::zeros();
        for k in 0..4 {
            let d = r - self.quad_points[k];
            let inv = 1.0 / d.norm();
            let w = self.quad_weights[k] * inv;
            s += w;
            g -= d * (w * inv * inv);
        }
        (s, g)
    }

    /// Exact near, quadrature beyond `ratio` panel diameters.
    #[inline]
    pub fn potential_auto(&self, r: &Point, ratio: f64) -> f64 {
        if self.is_far(r, ratio) {
            self.potential_far(r)
        } else {
            self.potential(r)
        }
    }
}

/// `ln((R+ + l+)/(R- + l-))`, rearranged to avoid cancellation.
#[inline]
fn edge_log(lm: f64, lp: f64, rm: f64, rp: f64, r0sq: f64) -> f64 {
    if lm >= 0.0 {
        ((rp + lp) / (rm + lm)).ln()
    } else if lp <= 0.0 {
        ((rm - lm) / (rp - lp)).ln()
    } else {
        // edge straddles the foot point: (R- + l-) = R0² / (R- - l-)
        let r0sq = r0sq.max(1e-300);
        ((rp + lp) * (rm - lm) / r0sq).ln()
    }
}

fn quadrature(v: &[Point], area: f64) -> ([Point; 4], [f64; 4]) {
    if v.len() == 3 {
        // Strang-Fix 4-point rule, exact for cubics
        let bary = [[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], [0.6, 0.2, 0.2], [0.2, 0.6, 0.2], [0.2, 0.2, 0.6]];
        let w = [-27.0 / 48.0, 25.0 / 48.0, 25.0 / 48.0, 25.0 / 48.0];
        let mut pts = [v[0]; 4];
        let mut ws = [0.0; 4];
        for k in 0..4 {
            let b = bary[k];
            pts[k] = Point::from(b[0] * v[0].coords + b[1] * v[1].coords + b[2] * v[2].coords);
            ws[k] = w[k] * area;
        }
        (pts, ws)
    } else {
        // 2x2 Gauss on the bilinear map of the quad
        let g = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
        let mut pts = [v[0]; 4];
        let mut ws = [0.0; 4];
        let mut k = 0;
        for &s in &g {
            for &t in &g {
                let x = (1.0 - s) * (1.0 - t) * v[0].coords
                    + s * (1.0 - t) * v[1].coords
                    + s * t * v[2].coords
                    + (1.0 - s) * t * v[3].coords;
                let ds = (1.0 - t) * (v[1] - v[0]) + t * (v[2] - v[3]);
                let dt = (1.0 - s) * (v[3] - v[0]) + s * (v[2] - v[1]);
                pts[k] = Point::from(x);
                ws[k] = 0.25 * ds.cross(&dt).norm();
                k += 1;
            }
        }
        (pts, ws)
    }
}
