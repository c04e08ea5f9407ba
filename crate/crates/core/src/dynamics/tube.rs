use crate::field::{BasisValue, ElectrodeBasis, FieldError, GridBasis, GridSpec};
use crate::hashing::ContentHasher;
use crate::{Point, Vec3};

/// Interpolated bases on one box per straight leg of a path.
#[derive(Debug, Clone)]
pub struct TubeBasis {
    grids: Vec<GridBasis>,
    names: Vec<String>,
    rf: Option<usize>,
    hash: String,
}

impl TubeBasis {
    pub fn grids(&self) -> &[GridBasis] {
        &self.grids
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.grids.iter().any(|g| g.contains(p))
    }

    /// Number of sample points over all boxes.
    pub fn n_points(&self) -> usize {
        self.grids.iter().map(|g| g.grid().spec.len()).sum()
    }
}

/// Splits `points` into maximal straight runs.
fn legs(points: &[Point]) -> Vec<(Point, Point)> {
    if points.len() < 2 {
        return points.iter().map(|p| (*p, *p)).collect();
    }
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..points.len() {
        let d0 = (points[start + 1] - points[start]).normalize();
        let turns = k + 1 < points.len() && (points[k + 1] - points[k]).normalize().dot(&d0) < 1.0 - 1e-9;
        if turns || k + 1 == points.len() {
            out.push((points[start], points[k]));
            start = k;
        }
    }
    out
}

/// Samples `basis` on boxes that enclose every straight leg of `points`
/// with `radius` µm of clearance, at `step` µm spacing.
pub fn tube_basis(basis: &dyn ElectrodeBasis, points: &[Point], radius: f64, step: f64) -> Result<TubeBasis, FieldError> {
    if points.is_empty() {
        return Err(FieldError::BadGrid("tube needs at least one point".into()));
    }
    if !(radius > 0.0) || !(step > 0.0) {
        return Err(FieldError::BadGrid(format!("tube radius {radius} and step {step} must be positive")));
    }
    let mut grids = Vec::new();
    let mut h = ContentHasher::new();
    h.str("tube").str(&basis.content_hash());
    for (a, b) in legs(points) {
        let lo = Point::from(a.coords.inf(&b.coords) - Vec3::repeat(radius));
        let hi = Point::from(a.coords.sup(&b.coords) + Vec3::repeat(radius));
        let spec = GridSpec::covering(lo, hi, step);
        h.json(&spec);
        grids.push(GridBasis::sample(basis, &spec)?);
    }
    Ok(TubeBasis { grids, names: basis.electrode_names().to_vec(), rf: basis.rf_index(), hash: h.finish() })
}

impl ElectrodeBasis for TubeBasis {
    fn electrode_names(&self) -> &[String] {
        &self.names
    }

    fn rf_index(&self) -> Option<usize> {
        self.rf
    }

    fn eval_all(&self, p: &Point) -> Result<Vec<BasisValue>, FieldError> {
        match self.grids.iter().find(|g| g.contains(p)) {
            Some(g) => g.eval_all(p),
            None => Err(FieldError::OutsideGrid { point: *p }),
        }
    }

    fn eval(&self, voltages: &[f64], p: &Point) -> Result<BasisValue, FieldError> {
        match self.grids.iter().find(|g| g.contains(p)) {
            Some(g) => g.eval(voltages, p),
            None => Err(FieldError::OutsideGrid { point: *p }),
        }
    }

    fn electrode_distance(&self, _e: usize, _p: &Point) -> f64 {
        f64::INFINITY
    }

    fn content_hash(&self) -> String {
        self.hash.clone()
    }
}
