//! Trap metrics from basis fields: pseudopotential, total potential, minima,
//! secular modes, axial profiles, barriers, Taylor coefficients and sweeps.
//!
//! Energies are in eV. The total potential is Φ_ps + Q·φ_DC, so a positive
//! ion sits in minima of both terms. DC voltage vectors have one entry per
//! electrode; the entry of the RF electrode is ignored (it is DC grounded).

mod profile;
mod sweep;
mod taylor;

use nalgebra::{Matrix3, SymmetricEigen};
use thiserror::Error;

use crate::constants::{DriveConfig, IonSpecies, CODATA};
use crate::error::Result;
use crate::field::ElectrodeBasis;
use crate::{Point, Vec3};

pub use profile::{axial_profile, barrier_metrics, AxialProfile, BarrierMetrics, ProfileAxis};
pub use sweep::{
    peak_axial_field, sweep, Scenario, SweepMetric, SweepParameter, SweepRow, SweepSpec, SweepTable,
};
pub use taylor::{axial_taylor, TaylorOptions, TaylorResult};

/// Default finite-difference step for derivatives of the potential (µm).
pub const DEFAULT_STEP: f64 = 0.5;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("minimization did not converge after {iterations} iterations (|grad| = {gradient:.3e} eV/mm at ({:.3}, {:.3}, {:.3}) µm)", point.x, point.y, point.z)]
    NoConvergence { iterations: usize, gradient: f64, point: Point },
    #[error("seed ({:.3}, {:.3}, {:.3}) µm lies outside the search domain", point.x, point.y, point.z)]
    SeedOutsideDomain { point: Point },
    #[error("profile has no interior maximum")]
    NoBarrier,
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("Taylor order must be between 1 and 4, got {0}")]
    BadOrder(usize),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
}

impl AnalysisError {
    pub fn is_config(&self) -> bool {
        !matches!(self, AnalysisError::NoConvergence { .. } | AnalysisError::NoBarrier)
    }
}

/// Pseudopotential Q²|E_RF|²/(4 m Ω²) in eV, with E_RF the RF basis field
/// scaled by the drive amplitude.
pub fn pseudopotential<B: ElectrodeBasis + ?Sized>(
    basis: &B,
    drive: &DriveConfig,
    species: &IonSpecies,
    p: &Point,
) -> Result<f64> {
    let e = rf_field(basis, drive, &basis.eval_all(p)?);
    Ok(pseudo_from_field(&e, drive, species))
}

/// Φ_ps + Q·φ_DC in eV.
pub fn total_potential<B: ElectrodeBasis + ?Sized>(
    basis: &B,
    dc: &[f64],
    drive: &DriveConfig,
    species: &IonSpecies,
    p: &Point,
) -> Result<f64> {
    Potential::new(basis, dc, drive, species)?.energy(p)
}

fn rf_field<B: ElectrodeBasis + ?Sized>(basis: &B, drive: &DriveConfig, all: &[(f64, Vec3)]) -> Vec3 {
    match basis.rf_index() {
        Some(i) if drive.rf_amplitude != 0.0 => all[i].1 * drive.rf_amplitude,
        _ => Vec3::zeros(),
    }
}

fn pseudo_from_field(e: &Vec3, drive: &DriveConfig, species: &IonSpecies) -> f64 {
    let q = species.charge;
    q * q * e.norm_squared() / (4.0 * species.mass * drive.rf_omega * drive.rf_omega) / CODATA.elementary_charge
}

/// Total potential energy of one ion in a fixed electrode configuration.
pub struct Potential<'a, B: ElectrodeBasis + ?Sized> {
    basis: &'a B,
    dc: Vec<f64>,
    drive: DriveConfig,
    species: IonSpecies,
}

impl<'a, B: ElectrodeBasis + ?Sized> Potential<'a, B> {
    pub fn new(basis: &'a B, dc: &[f64], drive: &DriveConfig, species: &IonSpecies) -> Result<Self> {
        basis.check_voltages(dc)?;
        let mut dc = dc.to_vec();
        if let Some(i) = basis.rf_index() {
            dc[i] = 0.0;
        }
        Ok(Self { basis, dc, drive: *drive, species: species.clone() })
    }

    /// Pseudopotential only (DC grounded).
    pub fn pseudo_only(basis: &'a B, drive: &DriveConfig, species: &IonSpecies) -> Self {
        Self { basis, dc: vec![0.0; basis.n_electrodes()], drive: *drive, species: species.clone() }
    }

    pub fn basis(&self) -> &B {
        self.basis
    }

    pub fn species(&self) -> &IonSpecies {
        &self.species
    }

    pub fn drive(&self) -> &DriveConfig {
        &self.drive
    }

    pub fn dc(&self) -> &[f64] {
        &self.dc
    }

    /// (pseudopotential, Q·φ_DC) in eV.
    pub fn parts(&self, p: &Point) -> Result<(f64, f64)> {
        let all = self.basis.eval_all(p)?;
        let ps = pseudo_from_field(&rf_field(self.basis, &self.drive, &all), &self.drive, &self.species);
        let phi: f64 = self.dc.iter().zip(&all).map(|(v, (b, _))| v * b).sum();
        Ok((ps, self.species.charge / CODATA.elementary_charge * phi))
    }

    pub fn energy(&self, p: &Point) -> Result<f64> {
        let (a, b) = self.parts(p)?;
        Ok(a + b)
    }

    pub fn derivatives(&self, p: &Point, step: f64) -> Result<Derivatives> {
        derivatives(&|q: &Point| self.energy(q), p, step)
    }

    /// Secular modes at `p` from the Hessian of the total potential.
    pub fn modes(&self, p: &Point, step: f64) -> Result<ModeSet> {
        let d = self.derivatives(p, step)?;
        Ok(ModeSet::from_hessian(*p, &d.hessian, &self.species))
    }
}

/// Value, gradient (eV/µm) and Hessian (eV/µm²) of a scalar field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivatives {
    pub value: f64,
    pub gradient: Vec3,
    pub hessian: Matrix3<f64>,
}

/// Central differences at `h` and `2h` combined by Richardson extrapolation.
pub fn derivatives(f: &dyn Fn(&Point) -> Result<f64>, p: &Point, h: f64) -> Result<Derivatives> {
    Ok(derivatives_vec(&|q: &Point| Ok(vec![f(q)?]), p, h)?.remove(0))
}

/// [`derivatives`] for every component of a vector-valued function, sharing
/// the stencil evaluations.
pub fn derivatives_vec(f: &dyn Fn(&Point) -> Result<Vec<f64>>, p: &Point, h: f64) -> Result<Vec<Derivatives>> {
    let f0 = f(p)?;
    let n = f0.len();
    let single = |s: f64| -> Result<Vec<(Vec3, Matrix3<f64>)>> {
        let mut out = vec![(Vec3::zeros(), Matrix3::zeros()); n];
        let e = |k: usize| {
            let mut v = Vec3::zeros();
            v[k] = s;
            v
        };
        for i in 0..3 {
            let fp = f(&(p + e(i)))?;
            let fm = f(&(p - e(i)))?;
            for c in 0..n {
                out[c].0[i] = (fp[c] - fm[c]) / (2.0 * s);
                out[c].1[(i, i)] = (fp[c] - 2.0 * f0[c] + fm[c]) / (s * s);
            }
            for j in (i + 1)..3 {
                let fpp = f(&(p + e(i) + e(j)))?;
                let fpm = f(&(p + e(i) - e(j)))?;
                let fmp = f(&(p - e(i) + e(j)))?;
                let fmm = f(&(p - e(i) - e(j)))?;
                for c in 0..n {
                    let v = (fpp[c] - fpm[c] - fmp[c] + fmm[c]) / (4.0 * s * s);
                    out[c].1[(i, j)] = v;
                    out[c].1[(j, i)] = v;
                }
            }
        }
        Ok(out)
    };
    let a = single(h)?;
    let b = single(2.0 * h)?;
    Ok((0..n)
        .map(|c| Derivatives {
            value: f0[c],
            gradient: (4.0 * a[c].0 - b[c].0) / 3.0,
            hessian: (4.0 * a[c].1 - b[c].1) / 3.0,
        })
        .collect())
}

/// Second-order expansion of the pseudopotential (eV) and of every unit
/// basis potential (V) around a point.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalExpansion {
    pub point: Point,
    pub pseudo: Derivatives,
    pub potentials: Vec<Derivatives>,
    /// Analytic basis fields at the point (V/m per volt).
    pub fields: Vec<Vec3>,
}

pub fn local_expansion<B: ElectrodeBasis + ?Sized>(
    basis: &B,
    drive: &DriveConfig,
    species: &IonSpecies,
    p: &Point,
    h: f64,
) -> Result<LocalExpansion> {
    let f = |q: &Point| -> Result<Vec<f64>> {
        let all = basis.eval_all(q)?;
        let mut out: Vec<f64> = all.iter().map(|(phi, _)| *phi).collect();
        out.push(pseudo_from_field(&rf_field(basis, drive, &all), drive, species));
        Ok(out)
    };
    let mut d = derivatives_vec(&f, p, h)?;
    let pseudo = d.pop().expect("pseudopotential component");
    let fields = basis.eval_all(p)?.into_iter().map(|(_, e)| e).collect();
    Ok(LocalExpansion { point: *p, pseudo, potentials: d, fields })
}

/// Three secular modes sorted by ascending signed curvature.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    pub point: Point,
    /// Angular frequencies (rad/s); for imaginary modes the magnitude.
    pub omega: [f64; 3],
    /// Unit principal axes.
    pub axes: [Vec3; 3],
    /// True where the curvature is negative (anti-confined).
    pub imaginary: [bool; 3],
}

impl ModeSet {
    /// `hessian` in eV/µm².
    pub fn from_hessian(point: Point, hessian: &Matrix3<f64>, species: &IonSpecies) -> Self {
        let eig = SymmetricEigen::new(*hessian);
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
        let to_si = CODATA.elementary_charge * 1e12;
        let mut omega = [0.0; 3];
        let mut axes = [Vec3::zeros(); 3];
        let mut imaginary = [false; 3];
        for (k, &i) in idx.iter().enumerate() {
            let lambda = eig.eigenvalues[i] * to_si;
            omega[k] = (lambda.abs() / species.mass).sqrt();
            imaginary[k] = lambda < 0.0;
            let mut a: Vec3 = eig.eigenvectors.column(i).into();
            // deterministic orientation: largest component positive
            let m = a.iamax();
            if a[m] < 0.0 {
                a = -a;
            }
            axes[k] = a;
        }
        Self { point, omega, axes, imaginary }
    }

    pub fn hz(&self) -> [f64; 3] {
        self.omega.map(|w| w / (2.0 * std::f64::consts::PI))
    }

    /// Index of the mode whose axis is most nearly parallel to `dir`.
    pub fn mode_along(&self, dir: &Vec3) -> usize {
        let d = dir.normalize();
        (0..3).max_by(|a, b| self.axes[*a].dot(&d).abs().total_cmp(&self.axes[*b].dot(&d).abs())).unwrap()
    }

    /// Signed angular frequency: negative for anti-confined modes.
    pub fn signed_omega(&self, k: usize) -> f64 {
        if self.imaginary[k] {
            -self.omega[k]
        } else {
            self.omega[k]
        }
    }

    pub fn is_confined(&self) -> bool {
        !self.imaginary.iter().any(|&i| i)
    }
}

/// Secular frequencies at `p` with the default 0.5 µm step.
pub fn secular_frequencies<B: ElectrodeBasis + ?Sized>(
    basis: &B,
    dc: &[f64],
    drive: &DriveConfig,
    species: &IonSpecies,
    p: &Point,
) -> Result<ModeSet> {
    Potential::new(basis, dc, drive, species)?.modes(p, DEFAULT_STEP)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    /// Gradient tolerance (eV/mm).
    pub tolerance: f64,
    pub max_iterations: usize,
    pub step: f64,
    /// Largest Newton step (µm).
    pub trust_radius: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self { tolerance: 1e-3, max_iterations: 60, step: DEFAULT_STEP, trust_radius: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub point: Point,
    pub energy: f64,
    /// |∇Φ| in eV/mm.
    pub gradient: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimumResult {
    pub point: Point,
    pub energy: f64,
    /// |∇Φ| in eV/mm.
    pub gradient: f64,
    pub iterations: usize,
    /// The stationary point has a negative Hessian eigenvalue.
    pub saddle: bool,
    pub hessian: Matrix3<f64>,
    pub trace: Vec<TraceStep>,
}

/// Newton iteration on Φ_tot with finite-difference derivatives, kept inside
/// the box `domain`. Converges to the nearest stationary point; saddles are
/// reported through [`MinimumResult::saddle`].
pub fn find_minimum<B: ElectrodeBasis + ?Sized>(
    basis: &B,
    dc: &[f64],
    drive: &DriveConfig,
    species: &IonSpecies,
    seed: &Point,
    domain: (Point, Point),
    opts: &MinimizeOptions,
) -> Result<MinimumResult> {
    let pot = Potential::new(basis, dc, drive, species)?;
    minimize(&|q: &Point| pot.energy(q), seed, domain, opts)
}

pub fn minimize(
    f: &dyn Fn(&Point) -> Result<f64>,
    seed: &Point,
    (lo, hi): (Point, Point),
    opts: &MinimizeOptions,
) -> Result<MinimumResult> {
    if (0..3).any(|k| seed[k] < lo[k] || seed[k] > hi[k]) {
        return Err(AnalysisError::SeedOutsideDomain { point: *seed }.into());
    }
    let mut p = *seed;
    let mut trace = Vec::new();
    for it in 0..=opts.max_iterations {
        let d = derivatives(f, &p, opts.step)?;
        let gnorm = d.gradient.norm() * 1e3;
        trace.push(TraceStep { point: p, energy: d.value, gradient: gnorm });
        let eig = SymmetricEigen::new(d.hessian);
        let scale = eig.eigenvalues.amax();
        if gnorm < opts.tolerance {
            let saddle = eig.eigenvalues.iter().any(|&l| l < -1e-3 * scale);
            return Ok(MinimumResult { point: p, energy: d.value, gradient: gnorm, iterations: it, saddle, hessian: d.hessian, trace });
        }
        if it == opts.max_iterations {
            break;
        }
        let mut delta = Vec3::zeros();
        for k in 0..3 {
            let l = eig.eigenvalues[k];
            if l.abs() > 1e-9 * scale {
                let v: Vec3 = eig.eigenvectors.column(k).into();
                delta -= v * (v.dot(&d.gradient) / l);
            }
        }
        if delta.norm() == 0.0 || !delta.norm().is_finite() {
            delta = -d.gradient.normalize() * opts.step;
        }
        if delta.norm() > opts.trust_radius {
            delta *= opts.trust_radius / delta.norm();
        }
        let mut next = p + delta;
        for k in 0..3 {
            next[k] = next[k].clamp(lo[k], hi[k]);
        }
        p = next;
    }
    let last = trace.last().map_or(f64::NAN, |t| t.gradient);
    Err(AnalysisError::NoConvergence { iterations: opts.max_iterations, gradient: last, point: p }.into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FnBasis;
    use std::f64::consts::PI;

    fn ca() -> IonSpecies {
        IonSpecies::calcium40()
    }

    #[test]
    fn uniform_field_pseudopotential_closed_form() {
        let b = FnBasis::uniform(Vec3::new(1e5, 0.0, 0.0), true);
        let drive = DriveConfig::new(1.0, 2.0 * PI * 36e6).unwrap();
        let got = pseudopotential(&b, &drive, &ca(), &Point::new(1.0, 2.0, 3.0)).unwrap();
        let e = CODATA.elementary_charge;
        let m = 40.0 * CODATA.proton_mass;
        let om = 2.0 * PI * 36e6;
        let want_joule = e * e * 1e10 / (4.0 * m * om * om);
        assert!((got - want_joule / e).abs() < 1e-12 * got);
    }

    #[test]
    fn zero_amplitude_gives_zero() {
        let b = FnBasis::quadrupole(100.0);
        let drive = DriveConfig::new(0.0, 1e8).unwrap();
        assert_eq!(pseudopotential(&b, &drive, &ca(), &Point::new(5.0, 1.0, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn quadrupole_radial_frequency_matches_mathieu_limit() {
        let r0 = 100.0;
        let b = FnBasis::quadrupole(r0);
        let om = 2.0 * PI * 30e6;
        let s = ca();
        let drive = DriveConfig::new(100.0, om).unwrap();
        let modes = secular_frequencies(&b, &[0.0], &drive, &s, &Point::origin()).unwrap();
        let q = 2.0 * s.charge * 100.0 / (s.mass * om * om * (r0 * 1e-6).powi(2));
        let want = q * om / (2.0 * 2f64.sqrt());
        for k in 1..3 {
            assert!((modes.omega[k] / want - 1.0).abs() < 1e-6, "{} vs {want}", modes.omega[k]);
        }
        assert!(modes.omega[0] < 1e-3 * want);
    }

    #[test]
    fn dc_hessian_is_traceless() {
        let b = FnBasis::quadrupole_with_endcaps(100.0, 300.0);
        let drive = DriveConfig::new(0.0, 1e8).unwrap();
        let pot = Potential::new(&b, &[0.0, 3.0], &drive, &ca()).unwrap();
        let d = pot.derivatives(&Point::new(3.0, -2.0, 7.0), DEFAULT_STEP).unwrap();
        let eig = SymmetricEigen::new(d.hessian);
        assert!(d.hessian.trace().abs() < 1e-3 * eig.eigenvalues.amax());
    }

    #[test]
    fn minimum_of_quadratic_well() {
        let b = FnBasis::quadrupole_with_endcaps(100.0, 300.0);
        let drive = DriveConfig::from_mhz(100.0, 30.0).unwrap();
        let dom = (Point::new(-50.0, -50.0, -50.0), Point::new(50.0, 50.0, 50.0));
        let r = find_minimum(&b, &[0.0, 1.0], &drive, &ca(), &Point::new(20.0, -10.0, 15.0), dom, &MinimizeOptions::default())
            .unwrap();
        assert!(r.point.coords.norm() < 1e-3, "{:?}", r.point);
        assert!(!r.saddle);
        assert!(r.gradient < 1e-3);
    }

    #[test]
    fn anti_confined_axis_is_flagged() {
        let b = FnBasis::quadrupole_with_endcaps(100.0, 300.0);
        let drive = DriveConfig::from_mhz(100.0, 30.0).unwrap();
        let dom = (Point::new(-50.0, -50.0, -50.0), Point::new(50.0, 50.0, 50.0));
        let r = find_minimum(&b, &[0.0, -1.0], &drive, &ca(), &Point::new(1.0, 1.0, 0.0), dom, &MinimizeOptions::default())
            .unwrap();
        assert!(r.saddle);
        let modes = ModeSet::from_hessian(r.point, &r.hessian, &ca());
        assert!(modes.imaginary[0]);
        assert!(modes.axes[0].z.abs() > 0.99);
    }

    #[test]
    fn seed_outside_domain_is_rejected() {
        let b = FnBasis::quadrupole(100.0);
        let drive = DriveConfig::from_mhz(100.0, 30.0).unwrap();
        let dom = (Point::new(-1.0, -1.0, -1.0), Point::new(1.0, 1.0, 1.0));
        let r = find_minimum(&b, &[0.0], &drive, &ca(), &Point::new(5.0, 0.0, 0.0), dom, &MinimizeOptions::default());
        assert!(r.is_err());
    }
}
