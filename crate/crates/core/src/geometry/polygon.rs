//! Planar polygon helpers in a local (u, v) coordinate system.

pub type P2 = [f64; 2];

const EPS: f64 = 1e-9;

/// Signed area, positive for counter-clockwise vertex order.
pub fn signed_area(poly: &[P2]) -> f64 {
    let n = poly.len();
    let mut a = 0.0;
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        a += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * a
}

/// Even-odd point-in-polygon test.
pub fn contains(poly: &[P2], p: P2) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Distance from `p` to the polygon boundary.
pub fn boundary_distance(poly: &[P2], p: P2) -> f64 {
    let n = poly.len();
    (0..n).map(|i| segment_distance(poly[i], poly[(i + 1) % n], p)).fold(f64::INFINITY, f64::min)
}

pub fn segment_distance(a: P2, b: P2, p: P2) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 { (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let c = [a[0] + t * d[0] - p[0], a[1] + t * d[1] - p[1]];
    (c[0] * c[0] + c[1] * c[1]).sqrt()
}

/// Drops repeated and collinear vertices.
pub fn simplify(poly: &[P2]) -> Vec<P2> {
    let mut out: Vec<P2> = Vec::with_capacity(poly.len());
    for &p in poly {
        if out.last().map_or(true, |q: &P2| (q[0] - p[0]).abs() > EPS || (q[1] - p[1]).abs() > EPS) {
            out.push(p);
        }
    }
    while out.len() > 1 {
        let (a, b) = (out[0], out[out.len() - 1]);
        if (a[0] - b[0]).abs() <= EPS && (a[1] - b[1]).abs() <= EPS {
            out.pop();
        } else {
            break;
        }
    }
    let mut changed = true;
    while changed && out.len() > 3 {
        changed = false;
        let n = out.len();
        for i in 0..n {
            let a = out[(i + n - 1) % n];
            let b = out[i];
            let c = out[(i + 1) % n];
            let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            let scale = ((b[0] - a[0]).hypot(b[1] - a[1])) * ((c[0] - b[0]).hypot(c[1] - b[1]));
            if cross.abs() <= 1e-12 * scale.max(1e-300) {
                out.remove(i);
                changed = true;
                break;
            }
        }
    }
    out
}

/// True if no two non-adjacent edges intersect.
pub fn is_simple(poly: &[P2]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_cross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

fn orient(a: P2, b: P2, c: P2) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_cross(a: P2, b: P2, c: P2, d: P2) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Cuts a simple polygon into convex trapezoids (or triangles) with slab
/// boundaries perpendicular to the u axis, one slab per distinct vertex u.
///
/// The decomposition only depends on vertex coordinates, so a polygon that is
/// mirror symmetric in u yields mirror symmetric pieces. Each piece is
/// returned counter-clockwise.
pub fn slab_decomposition(poly: &[P2]) -> Vec<Vec<P2>> {
    let n = poly.len();
    let mut cuts: Vec<f64> = poly.iter().map(|p| p[0]).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() <= EPS);

    let mut pieces = Vec::new();
    for w in cuts.windows(2) {
        let (ua, ub) = (w[0], w[1]);
        if ub - ua <= EPS {
            continue;
        }
        let mid = 0.5 * (ua + ub);
        let mut crossings: Vec<(f64, f64, f64)> = Vec::new();
        for i in 0..n {
            let p = poly[i];
            let q = poly[(i + 1) % n];
            let (lo, hi) = if p[0] < q[0] { (p, q) } else { (q, p) };
            if hi[0] - lo[0] <= EPS || lo[0] > mid || hi[0] < mid {
                continue;
            }
            let at = |u: f64| lo[1] + (hi[1] - lo[1]) * (u - lo[0]) / (hi[0] - lo[0]);
            crossings.push((at(mid), at(ua), at(ub)));
        }
        crossings.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for pair in crossings.chunks_exact(2) {
            let (lower, upper) = (pair[0], pair[1]);
            let raw = [[ua, lower.1], [ub, lower.2], [ub, upper.2], [ua, upper.1]];
            let piece = simplify(&raw);
            if piece.len() >= 3 && signed_area(&piece) > EPS * EPS {
                pieces.push(piece);
            }
        }
    }
    pieces
}

/// Points along a circular arc with chord along u from `(u0, v0)` to
/// `(u1, v0)` and sagitta `depth` toward `-v` (use negative depth for `+v`).
/// Endpoints are excluded; `segments` chords approximate the arc.
pub fn circular_segment_arc(u0: f64, u1: f64, v0: f64, depth: f64, segments: usize) -> Vec<P2> {
    let half = 0.5 * (u1 - u0);
    let s = depth.abs();
    let radius = (half * half + s * s) / (2.0 * s);
    let theta = (half / radius).asin();
    let theta = if s > radius { std::f64::consts::PI - theta } else { theta };
    let center_u = 0.5 * (u0 + u1);
    let sign = depth.signum();
    // circle center sits on the opposite side of the chord from the sagitta
    let center_v = v0 - sign * (s - radius);
    (1..segments)
        .map(|k| {
            let a = -theta + 2.0 * theta * k as f64 / segments as f64;
            [center_u + radius * a.sin(), center_v - sign * radius * a.cos()]
        })
        .collect()
}

/// Area of a circular segment with the given chord and sagitta.
pub fn circular_segment_area(chord: f64, depth: f64) -> f64 {
    let half = 0.5 * chord;
    let s = depth.abs();
    let r = (half * half + s * s) / (2.0 * s);
    let theta = 2.0 * (half / r).asin();
    0.5 * r * r * (theta - theta.sin())
}
