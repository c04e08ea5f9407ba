use std::collections::HashMap;
use std::sync::Arc;

use faer::Mat;
use serde::{Deserialize, Serialize};

use super::kernel::PanelKernel;
use super::{BasisValue, ElectrodeBasis, FieldError};
use crate::constants::CODATA;
use crate::geometry::{PanelMesh, Role, TrapLayout};
use crate::hashing::ContentHasher;
use crate::{Point, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Matrix entries use the 4-point rule beyond this many panel diameters.
    pub far_ratio: f64,
    /// Largest accepted boundary-condition residual (V).
    pub residual_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { far_ratio: 5.0, residual_tolerance: 1e-3 }
    }
}

impl SolverConfig {
    pub fn hash_into(&self, h: &mut ContentHasher) {
        h.f64(self.far_ratio).f64(self.residual_tolerance);
    }
}

/// Panel charge solution for every electrode.
///
/// Charges are stored as `q = σ / (4π ε0)` in V/µm, panel-major with one
/// entry per electrode, so a single pass over the panels evaluates all bases.
#[derive(Debug, Clone)]
pub struct FieldBasis {
    mesh: Arc<PanelMesh>,
    kernels: Vec<PanelKernel>,
    charges: Vec<f64>,
    residuals: Vec<f64>,
    config: SolverConfig,
    rf: Option<usize>,
    layout: Option<Arc<TrapLayout>>,
    hash: String,
}

fn solve_hash(mesh: &PanelMesh, config: &SolverConfig) -> String {
    let mut h = ContentHasher::new();
    h.str(&mesh.hash());
    config.hash_into(&mut h);
    h.finish()
}

/// Solves the collocation system once and back-substitutes one right-hand
/// side per electrode.
pub fn solve_basis(mesh: &PanelMesh, config: &SolverConfig) -> Result<FieldBasis, FieldError> {
    let n = mesh.len();
    if n == 0 {
        return Err(FieldError::EmptyMesh);
    }
    check_duplicates(mesh)?;
    let ne = mesh.n_electrodes();
    let kernels: Vec<PanelKernel> = mesh.panels.iter().map(PanelKernel::new).collect();
    let t0 = std::time::Instant::now();
    let mut lu = assemble(mesh, &kernels, config.far_ratio);
    log::debug!("assembled {n}x{n} system in {:.2?}", t0.elapsed());
    let mut x = Mat::<f64>::from_fn(n, ne, |i, e| if mesh.panels[i].electrode == e { 1.0 } else { 0.0 });
    {
        use faer::dyn_stack::{MemBuffer, MemStack};
        use faer::linalg::lu::partial_pivoting::{factor, solve};
        let par = faer::get_global_parallelism();
        let mut fwd = vec![0usize; n];
        let mut bwd = vec![0usize; n];
        let mut buf = MemBuffer::new(factor::lu_in_place_scratch::<usize, f64>(n, n, par, Default::default()));
        let (_, perm) =
            factor::lu_in_place(lu.as_mut(), &mut fwd, &mut bwd, par, MemStack::new(&mut buf), Default::default());
        let mut buf = MemBuffer::new(solve::solve_in_place_scratch::<usize, f64>(n, ne, par));
        solve::solve_in_place(lu.as_ref(), lu.as_ref(), perm, x.as_mut(), par, MemStack::new(&mut buf));
    }
    drop(lu);
    log::debug!("factorized and solved in {:.2?}", t0.elapsed());

    if let Some(i) = (0..n).find(|&i| (0..ne).any(|e| !x[(i, e)].is_finite())) {
        return Err(FieldError::Singular { panels: vec![i], message: "non-finite charge density".into() });
    }
    let mut charges = vec![0.0; n * ne];
    for i in 0..n {
        for e in 0..ne {
            charges[i * ne + e] = x[(i, e)];
        }
    }
    drop(x);
    // residual of the boundary condition, recomputed row by row
    let mut residuals = vec![0.0f64; ne];
    let mut worst = vec![0usize; ne];
    let mut row = vec![0.0; ne];
    for i in 0..n {
        let c = &mesh.panels[i].centroid;
        row.iter_mut().for_each(|r| *r = 0.0);
        for (j, k) in kernels.iter().enumerate() {
            let q = &charges[j * ne..(j + 1) * ne];
            let a = if i == j { k.potential(c) } else { k.potential_auto(c, config.far_ratio) };
            for e in 0..ne {
                row[e] += a * q[e];
            }
        }
        for e in 0..ne {
            let target = if mesh.panels[i].electrode == e { 1.0 } else { 0.0 };
            let r = (row[e] - target).abs();
            if !(r <= residuals[e]) {
                residuals[e] = r;
                worst[e] = i;
            }
        }
    }
    for (e, res) in residuals.iter().enumerate() {
        if !(*res <= config.residual_tolerance) {
            // a residual this large after a direct solve means the matrix is
            // numerically singular
            return Err(FieldError::Singular {
                panels: vec![worst[e]],
                message: format!(
                    "boundary residual {res:.3e} V on electrode '{}' exceeds {:.1e} V",
                    mesh.electrode_names[e], config.residual_tolerance
                ),
            });
        }
    }
    Ok(FieldBasis::from_parts(Arc::new(mesh.clone()), charges, residuals, *config))
}

fn assemble(mesh: &PanelMesh, kernels: &[PanelKernel], far_ratio: f64) -> Mat<f64> {
    let n = mesh.len();
    Mat::<f64>::from_fn(n, n, |i, j| {
        let c = &mesh.panels[i].centroid;
        if i == j {
            kernels[j].potential(c)
        } else {
            kernels[j].potential_auto(c, far_ratio)
        }
    })
}

/// Coincident panels make two rows of the collocation matrix identical.
fn check_duplicates(mesh: &PanelMesh) -> Result<(), FieldError> {
    let scale = mesh
        .panels
        .iter()
        .map(|p| p.centroid.coords.amax())
        .fold(1.0, f64::max);
    let q = 1e-9 * scale;
    let mut seen: HashMap<[i64; 3], usize> = HashMap::with_capacity(mesh.len());
    for (i, p) in mesh.panels.iter().enumerate() {
        let key = [
            (p.centroid.x / q).round() as i64,
            (p.centroid.y / q).round() as i64,
            (p.centroid.z / q).round() as i64,
        ];
        if let Some(&j) = seen.get(&key) {
            return Err(FieldError::Singular {
                panels: vec![j, i],
                message: format!(
                    "panels {j} ('{}') and {i} ('{}') share the collocation point ({:.4}, {:.4}, {:.4})",
                    mesh.electrode_names[mesh.panels[j].electrode],
                    mesh.electrode_names[p.electrode],
                    p.centroid.x,
                    p.centroid.y,
                    p.centroid.z
                ),
            });
        }
        seen.insert(key, i);
    }
    Ok(())
}

impl FieldBasis {
    pub(crate) fn from_parts(mesh: Arc<PanelMesh>, charges: Vec<f64>, residuals: Vec<f64>, config: SolverConfig) -> Self {
        let kernels = mesh.panels.iter().map(PanelKernel::new).collect();
        let hash = solve_hash(&mesh, &config);
        Self { mesh, kernels, charges, residuals, config, rf: None, layout: None, hash }
    }

    /// Attaches the layout the mesh was built from: enables conductor checks
    /// on evaluation points and identifies the RF electrode.
    pub fn with_layout(mut self, layout: &TrapLayout) -> Self {
        if layout.electrodes.len() == self.mesh.n_electrodes()
            && layout.electrodes.iter().zip(&self.mesh.electrode_names).all(|(e, n)| e.name == *n)
        {
            self.rf = layout.electrodes.iter().position(|e| e.role == Role::Rf);
            self.layout = Some(Arc::new(layout.clone()));
        }
        self
    }

    /// Marks electrode `name` as the RF electrode (for meshes without a layout).
    pub fn with_rf(mut self, name: &str) -> Result<Self, FieldError> {
        self.rf = Some(self.electrode_index(name)?);
        Ok(self)
    }

    pub fn mesh(&self) -> &PanelMesh {
        &self.mesh
    }

    pub fn layout(&self) -> Option<&TrapLayout> {
        self.layout.as_deref()
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Largest centroid residual per electrode (V).
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn panel_count(&self) -> usize {
        self.mesh.len()
    }

    /// Raw charges `σ/(4π ε0)` in V/µm, panel-major.
    pub fn raw_charges(&self) -> &[f64] {
        &self.charges
    }

    /// Surface charge density (C/m²) of panel `i` in basis `e`.
    pub fn charge_density(&self, i: usize, e: usize) -> f64 {
        4.0 * std::f64::consts::PI * CODATA.epsilon_0 * self.charges[i * self.mesh.n_electrodes() + e] * 1e6
    }

    /// Capacitance matrix (F): induced charge on electrode i with 1 V on j.
    pub fn capacitance_matrix(&self) -> Vec<Vec<f64>> {
        let ne = self.mesh.n_electrodes();
        let mut c = vec![vec![0.0; ne]; ne];
        for (i, p) in self.mesh.panels.iter().enumerate() {
            for j in 0..ne {
                c[p.electrode][j] += self.charge_density(i, j) * p.area * 1e-12;
            }
        }
        c
    }

    fn check_point(&self, p: &Point) -> Result<(), FieldError> {
        if let Some(layout) = &self.layout {
            if let Some(name) = layout.conductor_at(p, 0.0) {
                return Err(FieldError::InsideConductor { electrode: name.to_string(), point: *p });
            }
        }
        Ok(())
    }

    /// Potential (V) and field (V/m) for per-panel charges `q`.
    fn eval_charges(&self, q: &[f64], p: &Point) -> BasisValue {
        let mut phi = 0.0;
        let mut g = Vec3::zeros();
        for (k, qi) in self.kernels.iter().zip(q) {
            let (v, dv) = k.potential_and_gradient(p);
            phi += qi * v;
            g += *qi * dv;
        }
        (phi, -g * 1e6)
    }

    /// Potential and field for a voltage vector, summing charges first.
    pub fn eval_voltages(&self, voltages: &[f64], p: &Point) -> Result<BasisValue, FieldError> {
        self.check_voltages(voltages)?;
        self.check_point(p)?;
        let ne = self.mesh.n_electrodes();
        let q: Vec<f64> = (0..self.mesh.len())
            .map(|i| {
                let row = &self.charges[i * ne..(i + 1) * ne];
                row.iter().zip(voltages).map(|(c, v)| c * v).sum()
            })
            .collect();
        Ok(self.eval_charges(&q, p))
    }

    /// Potential (V) for a voltage vector.
    pub fn eval_potential(&self, voltages: &[f64], p: &Point) -> Result<f64, FieldError> {
        Ok(self.eval_voltages(voltages, p)?.0)
    }

    /// Field (V/m) for a voltage vector, from the analytic kernel gradient.
    pub fn eval_field(&self, voltages: &[f64], p: &Point) -> Result<Vec3, FieldError> {
        Ok(self.eval_voltages(voltages, p)?.1)
    }
}

impl ElectrodeBasis for FieldBasis {
    fn electrode_names(&self) -> &[String] {
        &self.mesh.electrode_names
    }

    fn rf_index(&self) -> Option<usize> {
        self.rf
    }

    fn eval_all(&self, p: &Point) -> Result<Vec<BasisValue>, FieldError> {
        self.check_point(p)?;
        let ne = self.mesh.n_electrodes();
        let mut phi = vec![0.0; ne];
        let mut g = vec![Vec3::zeros(); ne];
        for (i, k) in self.kernels.iter().enumerate() {
            let (v, dv) = k.potential_and_gradient(p);
            let row = &self.charges[i * ne..(i + 1) * ne];
            for e in 0..ne {
                phi[e] += row[e] * v;
                g[e] += row[e] * dv;
            }
        }
        Ok(phi.into_iter().zip(g).map(|(a, b)| (a, -b * 1e6)).collect())
    }

    fn eval(&self, voltages: &[f64], p: &Point) -> Result<BasisValue, FieldError> {
        self.eval_voltages(voltages, p)
    }

    fn electrode_distance(&self, e: usize, p: &Point) -> f64 {
        if let Some(layout) = &self.layout {
            return layout.electrodes[e].distance_to(p);
        }
        self.mesh
            .panels
            .iter()
            .filter(|q| q.electrode == e)
            .map(|q| (q.centroid - p).norm())
            .fold(f64::INFINITY, f64::min)
    }

    fn content_hash(&self) -> String {
        self.hash.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::sphere_mesh;
    use crate::geometry::Panel;

    #[test]
    fn isolated_sphere_potential() {
        let mesh = sphere_mesh(10.0, 10);
        assert!(mesh.len() >= 500);
        let b = solve_basis(&mesh, &SolverConfig::default()).unwrap();
        assert!(b.residuals()[0] < 1e-9);
        for r in [20.0, 35.0, 80.0] {
            let phi = b.eval_potential(&[1.0], &Point::new(0.3 * r, -0.4 * r, r * 0.866)).unwrap();
            let expect = 10.0 / Point::new(0.3 * r, -0.4 * r, r * 0.866).coords.norm();
            assert!((phi - expect).abs() / expect < 0.01, "r={r}: {phi} vs {expect}");
        }
        // capacitance of a sphere: 4π ε0 R
        let c = b.capacitance_matrix()[0][0];
        let expect = 4.0 * std::f64::consts::PI * CODATA.epsilon_0 * 10e-6;
        assert!((c - expect).abs() / expect < 0.01);
    }

    #[test]
    fn duplicate_panels_are_named() {
        let tri = [Point::new(0.0, 0.0, 0.0), Point::new(1.0, 0.0, 0.0), Point::new(0.0, 1.0, 0.0)];
        let mesh = PanelMesh::from_panels(vec![Panel::new(&tri, 0), Panel::new(&tri, 1)], vec!["a".into(), "b".into()]);
        match solve_basis(&mesh, &SolverConfig::default()) {
            Err(FieldError::Singular { panels, message }) => {
                assert_eq!(panels, vec![0, 1]);
                assert!(message.contains("'a'") && message.contains("'b'"));
            }
            other => panic!("expected singular error, got {other:?}"),
        }
    }
}
