use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::qp::solve_box_qp;
use super::{
    curvature_from_hz, hz_from_curvature, Reduction, TransportConstraints, TransportPath, Waveform, WaveformError,
    WaypointTarget,
};
use crate::analysis::{find_minimum, local_expansion, LocalExpansion, MinimizeOptions, ModeSet, DEFAULT_STEP};
use crate::constants::{DriveConfig, IonSpecies, CODATA};
use crate::error::{Error, Result};
use crate::field::ElectrodeBasis;
use crate::table::{fmt_f64, Table};
use crate::{Point, Vec3};

/// Outcome of one waypoint solve, evaluated on the local expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointSolution {
    pub voltages: Vec<f64>,
    /// |E_DC − E_required| at the waypoint (V/m).
    pub residual_field: f64,
    /// Signed frequency of the curvature along the direction of travel (Hz).
    pub axial_hz: f64,
    pub target_axial_hz: Option<f64>,
    /// Number of variables held at a voltage bound.
    pub bounds_active: usize,
    /// Number of variables held at the slew limit.
    pub slew_active: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    /// Couple each step to the previous one through the slew bound and penalty.
    pub seed_with_previous: bool,
    /// Finite-difference step of the local expansion (µm).
    pub step: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self { seed_with_previous: true, step: DEFAULT_STEP }
    }
}

fn perpendiculars(t: &Vec3) -> (Vec3, Vec3) {
    let helper = if t.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let a = t.cross(&helper).normalize();
    (a, t.cross(&a))
}

struct Row {
    a: Vec<f64>,
    b: f64,
    w: f64,
}

/// Weighted rows of the least-squares objective, in electrode voltages.
fn objective_rows(exp: &LocalExpansion, species: &IonSpecies, dir: &Vec3, target: &WaypointTarget) -> Vec<Row> {
    let qe = species.charge / CODATA.elementary_charge;
    let (p1, p2) = perpendiculars(dir);
    let mut rows = Vec::new();
    // zero total force: Σ V_i E_i = ∇Φ_ps / (Q/e), in V/m
    for (d, w) in [(*dir, target.field_weight), (p1, target.radial_field_weight), (p2, target.radial_field_weight)] {
        if w > 0.0 {
            rows.push(Row {
                a: exp.fields.iter().map(|e| e.dot(&d)).collect(),
                b: exp.pseudo.gradient.dot(&d) * 1e6 / qe,
                w,
            });
        }
    }
    let unit = curvature_from_hz(1e6, species);
    for c in target.axial.iter().chain(&target.radial) {
        if c.weight <= 0.0 {
            continue;
        }
        let u = c.direction.map_or(*dir, |d| d.normalize());
        let norm = if c.curvature.abs() > 0.0 { c.curvature.abs() } else { unit };
        rows.push(Row {
            a: exp.potentials.iter().map(|d| qe * u.dot(&(d.hessian * u)) / norm).collect(),
            b: (c.curvature - u.dot(&(exp.pseudo.hessian * u))) / norm,
            w: c.weight,
        });
    }
    rows
}

fn axial_curvature(exp: &LocalExpansion, species: &IonSpecies, dir: &Vec3, v: &[f64]) -> f64 {
    let qe = species.charge / CODATA.elementary_charge;
    let dc: f64 = exp.potentials.iter().zip(v).map(|(d, vi)| vi * dir.dot(&(d.hessian * dir))).sum();
    dir.dot(&(exp.pseudo.hessian * dir)) + qe * dc
}

fn residual_field(exp: &LocalExpansion, species: &IonSpecies, v: &[f64]) -> f64 {
    let qe = species.charge / CODATA.elementary_charge;
    let e: Vec3 = exp.fields.iter().zip(v).map(|(e, vi)| *e * *vi).sum();
    (e - exp.pseudo.gradient * (1e6 / qe)).norm()
}

/// Moves `x` towards `prev` by single ulps until |x − prev| ≤ limit holds in
/// floating point.
fn enforce_slew(x: f64, prev: f64, limit: f64) -> f64 {
    let mut y = x;
    while (y - prev).abs() > limit {
        y = if y > prev { next_down(y) } else { next_up(y) };
    }
    y
}

fn next_up(x: f64) -> f64 {
    if x == 0.0 {
        return f64::from_bits(1);
    }
    let b = x.to_bits();
    f64::from_bits(if x > 0.0 { b + 1 } else { b - 1 })
}

fn next_down(x: f64) -> f64 {
    -next_up(-x)
}

/// Voltages for one waypoint. `direction` is the direction of travel, used
/// for the axial field and curvature. The RF electrode is always held at 0 V.
#[allow(clippy::too_many_arguments)]
pub fn solve_waypoint<B: ElectrodeBasis + ?Sized>(
    basis: &B,
    drive: &DriveConfig,
    species: &IonSpecies,
    waypoint: &Point,
    direction: &Vec3,
    target: &WaypointTarget,
    constraints: &TransportConstraints,
    previous: Option<&[f64]>,
) -> Result<WaypointSolution> {
    let exp = local_expansion(basis, drive, species, waypoint, DEFAULT_STEP)?;
    solve_expanded(&exp, basis, species, 0, direction, target, constraints, previous)
}

#[allow(clippy::too_many_arguments)]
fn solve_expanded<B: ElectrodeBasis + ?Sized>(
    exp: &LocalExpansion,
    basis: &B,
    species: &IonSpecies,
    step: usize,
    direction: &Vec3,
    target: &WaypointTarget,
    constraints: &TransportConstraints,
    previous: Option<&[f64]>,
) -> Result<WaypointSolution> {
    let n = basis.n_electrodes();
    target.validate()?;
    constraints.validate(n)?;
    let mut c = constraints.clone();
    if let Some(rf) = basis.rf_index() {
        if !c.grounded.contains(&rf) {
            c.grounded.push(rf);
        }
    }
    if let Some(prev) = previous {
        basis.check_voltages(prev)?;
    }
    let dir = direction.try_normalize(1e-12).ok_or_else(|| Error::invalid("direction of travel is zero"))?;
    let red = Reduction::new(&c)?;
    let m = red.n_vars();
    let rows = objective_rows(exp, species, &dir, target);
    let mut p = DMatrix::<f64>::zeros(m, m);
    let mut q = DVector::<f64>::zeros(m);
    for r in &rows {
        let mut a = vec![0.0; m];
        for (i, ai) in r.a.iter().enumerate() {
            a[red.var_of[i]] += ai;
        }
        for k in 0..m {
            q[k] -= r.w * r.b * a[k];
            for l in 0..m {
                p[(k, l)] += r.w * a[k] * a[l];
            }
        }
    }
    let rho = c.regularization_weights(|i| basis.electrode_distance(i, &exp.point));
    for (k, members) in red.members.iter().enumerate() {
        p[(k, k)] += members.iter().map(|&i| rho[i]).sum::<f64>();
    }
    let mut lo = red.lo.clone();
    let mut hi = red.hi.clone();
    let prev_u = previous.map(|v| red.reduce(v));
    if let Some(pu) = &prev_u {
        for (k, members) in red.members.iter().enumerate() {
            let s = c.slew_weight * members.len() as f64;
            p[(k, k)] += s;
            q[k] -= s * pu[k];
            if lo[k] < hi[k] {
                lo[k] = lo[k].max(pu[k] - c.max_slew);
                hi[k] = hi[k].min(pu[k] + c.max_slew);
                if lo[k] > hi[k] {
                    return Err(WaveformError::InvalidConstraints(format!(
                        "step {step}: previous voltages of {:?} lie outside the bounds",
                        red.members[k]
                    ))
                    .into());
                }
            }
        }
    }
    // keep the Hessian definite when the regularization is switched off
    let ridge = 1e-14 * p.diagonal().amax().max(1e-300);
    for k in 0..m {
        p[(k, k)] += ridge;
    }
    let sol = solve_box_qp(&p, &q, &lo, &hi).ok_or(WaveformError::NoConvergence { step })?;
    let mut u: Vec<f64> = sol.x.iter().copied().collect();
    let mut bounds_active = 0;
    let mut slew_active = 0;
    for k in 0..m {
        if red.lo[k] == red.hi[k] {
            continue;
        }
        if sol.active[k] != 0 {
            let at = u[k];
            if at == red.lo[k] || at == red.hi[k] {
                bounds_active += 1;
            } else {
                slew_active += 1;
            }
        }
        if let Some(pu) = &prev_u {
            u[k] = enforce_slew(u[k], pu[k], c.max_slew).clamp(red.lo[k], red.hi[k]);
        }
    }
    let voltages = red.expand(&u);
    let residual = residual_field(exp, species, &voltages);
    let field_weighted = target.field_weight > 0.0 || target.radial_field_weight > 0.0;
    if field_weighted && residual > c.field_tolerance {
        if bounds_active > 0 {
            let free_lo: Vec<f64> = (0..m).map(|k| if red.lo[k] == red.hi[k] { red.lo[k] } else { f64::NEG_INFINITY }).collect();
            let free_hi: Vec<f64> = (0..m).map(|k| if red.lo[k] == red.hi[k] { red.hi[k] } else { f64::INFINITY }).collect();
            let unbounded = solve_box_qp(&p, &q, &free_lo, &free_hi).ok_or(WaveformError::NoConvergence { step })?;
            let bound = c.v_max.iter().chain(&c.v_min).fold(0.0f64, |a, v| a.max(v.abs()));
            return Err(WaveformError::Infeasible { step, residual, required_bound: unbounded.x.amax(), bound }.into());
        }
        if slew_active > 0 {
            return Err(WaveformError::SlewLimited { step, residual, max_slew: c.max_slew }.into());
        }
        log::warn!("step {step}: residual field {residual:.3} V/m exceeds the tolerance with no active constraint");
    }
    Ok(WaypointSolution {
        axial_hz: hz_from_curvature(axial_curvature(exp, species, &dir, &voltages), species),
        target_axial_hz: target.axial.map(|t| hz_from_curvature(t.curvature, species)),
        voltages,
        residual_field: residual,
        bounds_active,
        slew_active,
    })
}

/// Solves every waypoint in order, each seeded with the previous solution
/// unless `opts.seed_with_previous` is off.
#[allow(clippy::too_many_arguments)]
pub fn synthesize<B: ElectrodeBasis + ?Sized>(
    basis: &B,
    drive: &DriveConfig,
    species: &IonSpecies,
    path: &TransportPath,
    targets: &[WaypointTarget],
    constraints: &TransportConstraints,
    opts: &SynthesisOptions,
) -> Result<Waveform> {
    if path.is_empty() {
        return Err(WaveformError::EmptyWaveform.into());
    }
    if targets.len() != path.len() {
        return Err(WaveformError::InvalidTarget(format!("{} targets for {} waypoints", targets.len(), path.len())).into());
    }
    let mut voltages: Vec<Vec<f64>> = Vec::with_capacity(path.len());
    let mut metrics = Vec::with_capacity(path.len());
    for (k, (wp, target)) in path.waypoints.iter().zip(targets).enumerate() {
        let exp = local_expansion(basis, drive, species, wp, opts.step)?;
        let prev = if opts.seed_with_previous { voltages.last().map(|v| v.as_slice()) } else { None };
        let sol = solve_expanded(&exp, basis, species, k, &path.tangent(k), target, constraints, prev)?;
        log::debug!("step {k}: max |V| {:.3}, residual {:.2e} V/m", sol.voltages.iter().fold(0.0f64, |m, v| m.max(v.abs())), sol.residual_field);
        voltages.push(sol.voltages.clone());
        metrics.push(sol);
    }
    Ok(Waveform {
        electrode_names: basis.electrode_names().to_vec(),
        positions: path.waypoints.clone(),
        voltages,
        solve_metrics: metrics,
        config_hash: String::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Half-width of the search box around each waypoint (µm).
    pub search_half_width: f64,
    pub minimize: MinimizeOptions,
    /// Relative spacing below which the two lowest modes count as degenerate.
    pub degeneracy: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { search_half_width: 20.0, minimize: MinimizeOptions::default(), degeneracy: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepReport {
    pub step: usize,
    pub waypoint: Point,
    pub found: Option<Point>,
    /// µm; NaN when the minimization failed.
    pub position_error: f64,
    /// Signed mode frequencies in ascending curvature order (Hz).
    pub mode_hz: [f64; 3],
    /// Signed frequency of the mode most nearly along the direction of travel.
    pub axial_hz: f64,
    pub saddle: bool,
    pub near_degenerate: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub steps: Vec<StepReport>,
    pub config_hash: String,
}

impl VerifyReport {
    pub fn max_position_error(&self) -> f64 {
        self.steps.iter().map(|s| s.position_error).fold(0.0, |m, e| if e.is_nan() { f64::NAN } else { m.max(e) })
    }

    /// Every step found a confined minimum within `tolerance` µm.
    pub fn passed(&self, tolerance: f64) -> bool {
        self.steps.iter().all(|s| s.error.is_none() && !s.saddle && s.position_error < tolerance)
    }

    pub fn to_table(&self, waveform: Option<&Waveform>) -> Table {
        let cols = [
            "step",
            "waypoint_x",
            "waypoint_y",
            "waypoint_z",
            "found_x",
            "found_y",
            "found_z",
            "position_error_um",
            "mode1_Hz",
            "mode2_Hz",
            "mode3_Hz",
            "axial_Hz",
            "target_axial_Hz",
            "residual_field_V_per_m",
            "saddle",
            "near_degenerate",
            "error",
        ];
        let mut t = Table::new(cols).with_meta("config_hash", &self.config_hash);
        let metrics = waveform.map(|w| w.solve_metrics.as_slice()).unwrap_or(&[]);
        for s in &self.steps {
            let f = s.found.unwrap_or(Point::new(f64::NAN, f64::NAN, f64::NAN));
            let m = metrics.get(s.step);
            let mut row = vec![s.step.to_string()];
            let nums = [
                s.waypoint.x,
                s.waypoint.y,
                s.waypoint.z,
                f.x,
                f.y,
                f.z,
                s.position_error,
                s.mode_hz[0],
                s.mode_hz[1],
                s.mode_hz[2],
                s.axial_hz,
                m.and_then(|m| m.target_axial_hz).unwrap_or(f64::NAN),
                m.map_or(f64::NAN, |m| m.residual_field),
            ];
            row.extend(nums.iter().map(|v| fmt_f64(*v)));
            row.push((s.saddle as u8).to_string());
            row.push((s.near_degenerate as u8).to_string());
            row.push(s.error.clone().unwrap_or_default().replace(',', ";"));
            t.push_cells(row);
        }
        t
    }
}

/// Finds the well of every step in the full potential and reports its
/// position and secular modes. Failures are recorded per step.
pub fn verify<B: ElectrodeBasis + ?Sized>(
    basis: &B,
    drive: &DriveConfig,
    species: &IonSpecies,
    waveform: &Waveform,
    opts: &VerifyOptions,
) -> Result<VerifyReport> {
    if waveform.is_empty() {
        return Err(WaveformError::EmptyWaveform.into());
    }
    if waveform.electrode_names.as_slice() != basis.electrode_names() {
        return Err(Error::invalid("waveform electrodes do not match the basis"));
    }
    let h = Vec3::repeat(opts.search_half_width);
    let steps = waveform
        .positions
        .iter()
        .zip(&waveform.voltages)
        .enumerate()
        .map(|(k, (wp, v))| {
            let mut report = StepReport {
                step: k,
                waypoint: *wp,
                found: None,
                position_error: f64::NAN,
                mode_hz: [f64::NAN; 3],
                axial_hz: f64::NAN,
                saddle: false,
                near_degenerate: false,
                error: None,
            };
            match find_minimum(basis, v, drive, species, wp, (wp - h, wp + h), &opts.minimize) {
                Ok(min) => {
                    let modes = ModeSet::from_hessian(min.point, &min.hessian, species);
                    let hz = modes.hz();
                    let signed = [0, 1, 2].map(|i| if modes.imaginary[i] { -hz[i] } else { hz[i] });
                    report.found = Some(min.point);
                    report.position_error = (min.point - wp).norm();
                    report.mode_hz = signed;
                    report.axial_hz = signed[modes.mode_along(&waveform.tangent(k))];
                    report.saddle = min.saddle;
                    report.near_degenerate = signed[0] > 0.0 && (signed[1] - signed[0]) < opts.degeneracy * signed[1];
                }
                Err(e) => report.error = Some(e.to_string()),
            }
            report
        })
        .collect();
    Ok(VerifyReport { steps, config_hash: waveform.config_hash.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::secular_frequencies;
    use crate::field::FnBasis;
    use crate::waveform::{frequency_ramp, CurvatureTarget};

    fn ca() -> IonSpecies {
        IonSpecies::calcium40()
    }

    fn toy() -> FnBasis {
        FnBasis::segmented(100.0, 7, 180.0)
    }

    fn drive() -> DriveConfig {
        DriveConfig::from_mhz(200.0, 36.0).unwrap()
    }

    fn paired(b: &FnBasis, bound: f64, slew: f64) -> TransportConstraints {
        let mut c = TransportConstraints::new(b.n_electrodes(), bound, slew);
        c.grounded = vec![0];
        c.symmetry_pairs = (0..7).map(|k| (1 + 2 * k, 2 + 2 * k)).collect();
        c
    }

    fn path(z0: f64, z1: f64, n: usize) -> TransportPath {
        let waypoints = (0..n).map(|k| Point::new(0.0, 0.0, z0 + (z1 - z0) * k as f64 / (n - 1).max(1) as f64)).collect();
        TransportPath { waypoints, start: "a".into(), end: "b".into(), spacing: (z1 - z0).abs() / (n - 1).max(1) as f64 }
    }

    #[test]
    fn centre_well_hits_the_target_frequency() {
        let b = toy();
        let c = paired(&b, 20.0, 5.0);
        let target = WaypointTarget::axial_frequency(1e6, &ca());
        let s = solve_waypoint(&b, &drive(), &ca(), &Point::origin(), &Vec3::z(), &target, &c, None).unwrap();
        assert!(s.residual_field < 1.0, "{s:?}");
        let modes = secular_frequencies(&b, &s.voltages, &drive(), &ca(), &Point::origin()).unwrap();
        let f = modes.hz()[modes.mode_along(&Vec3::z())];
        assert!((f / 1e6 - 1.0).abs() < 0.01, "axial {f}");
        assert!(modes.is_confined());
    }

    #[test]
    fn zero_targets_give_zero_voltages() {
        let b = toy();
        let off = DriveConfig::new(0.0, 2.0 * std::f64::consts::PI * 36e6).unwrap();
        let mut target = WaypointTarget::field_only();
        target.axial = Some(CurvatureTarget { direction: None, curvature: 0.0, weight: 1.0 });
        let c = TransportConstraints::new(b.n_electrodes(), 10.0, 1.0);
        let s = solve_waypoint(&b, &off, &ca(), &Point::new(0.0, 0.0, 30.0), &Vec3::z(), &target, &c, None).unwrap();
        assert!(s.voltages.iter().all(|v| *v == 0.0), "{:?}", s.voltages);
    }

    #[test]
    fn hard_constraints_hold_exactly() {
        let b = toy();
        let mut c = paired(&b, 3.0, 0.07);
        c.shorted = vec![vec![3, 11]];
        let p = path(-200.0, 200.0, 41);
        let targets = frequency_ramp(&p, &ca(), 0.8e6, 1.2e6);
        let w = match synthesize(&b, &drive(), &ca(), &p, &targets, &c, &SynthesisOptions::default()) {
            Ok(w) => w,
            Err(Error::Waveform(WaveformError::SlewLimited { .. } | WaveformError::Infeasible { .. })) => {
                c.field_tolerance = f64::INFINITY;
                synthesize(&b, &drive(), &ca(), &p, &targets, &c, &SynthesisOptions::default()).unwrap()
            }
            Err(e) => panic!("{e}"),
        };
        assert_eq!(w.check_constraints(&c), Vec::<String>::new());
        assert!(w.max_slew() <= 0.07);
    }

    #[test]
    fn tight_bounds_report_the_required_bound() {
        let b = toy();
        let c = paired(&b, 0.01, 5.0);
        let target = WaypointTarget::axial_frequency(1e6, &ca());
        let e = solve_waypoint(&b, &drive(), &ca(), &Point::new(0.0, 0.0, 45.0), &Vec3::z(), &target, &c, None).unwrap_err();
        match e {
            Error::Waveform(WaveformError::Infeasible { required_bound, bound, .. }) => {
                assert!(required_bound > bound, "{required_bound} vs {bound}")
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn regularization_ladder_shrinks_the_weighted_norm() {
        let b = toy();
        let target = WaypointTarget::axial_frequency(1e6, &ca());
        let mut last = f64::INFINITY;
        for w in [1e-4, 1e-2, 1.0, 1e2, 1e4] {
            let mut c = paired(&b, 50.0, 5.0);
            c.regularization = w;
            c.field_tolerance = f64::INFINITY;
            let s = solve_waypoint(&b, &drive(), &ca(), &Point::new(0.0, 0.0, 20.0), &Vec3::z(), &target, &c, None).unwrap();
            // the penalty's own (distance-weighted) norm is the monotone quantity
            let rho = c.regularization_weights(|i| b.electrode_distance(i, &Point::new(0.0, 0.0, 20.0)));
            let norm = s.voltages.iter().zip(&rho).map(|(v, r)| r / w * v * v).sum::<f64>().sqrt();
            assert!(norm <= last * (1.0 + 1e-9), "w={w}: {norm} > {last}");
            last = norm;
        }
    }

    #[test]
    fn reversed_path_reverses_rows_without_seeding() {
        let b = toy();
        let c = paired(&b, 20.0, 5.0);
        let opts = SynthesisOptions { seed_with_previous: false, ..Default::default() };
        let fwd = path(-100.0, 100.0, 11);
        let mut rev = fwd.clone();
        rev.waypoints.reverse();
        let ft = frequency_ramp(&fwd, &ca(), 1e6, 1e6);
        let a = synthesize(&b, &drive(), &ca(), &fwd, &ft, &c, &opts).unwrap();
        let r = synthesize(&b, &drive(), &ca(), &rev, &ft, &c, &opts).unwrap();
        for (x, y) in a.voltages.iter().zip(r.voltages.iter().rev()) {
            for (u, v) in x.iter().zip(y) {
                assert!((u - v).abs() < 1e-9 * (1.0 + u.abs()), "{u} vs {v}");
            }
        }
    }

    #[test]
    fn single_waypoint_matches_solve_waypoint() {
        let b = toy();
        let c = paired(&b, 20.0, 5.0);
        let p = path(40.0, 40.0, 1);
        let t = vec![WaypointTarget::axial_frequency(1.1e6, &ca())];
        let w = synthesize(&b, &drive(), &ca(), &p, &t, &c, &SynthesisOptions::default()).unwrap();
        let s = solve_waypoint(&b, &drive(), &ca(), &p.waypoints[0], &Vec3::z(), &t[0], &c, None).unwrap();
        assert_eq!(w.voltages, vec![s.voltages]);
    }

    #[test]
    fn verified_wells_sit_on_the_waypoints() {
        let b = toy();
        let c = paired(&b, 20.0, 5.0);
        let p = path(-90.0, 90.0, 7);
        let t = frequency_ramp(&p, &ca(), 1e6, 0.7e6);
        let w = synthesize(&b, &drive(), &ca(), &p, &t, &c, &SynthesisOptions::default()).unwrap();
        let r = verify(&b, &drive(), &ca(), &w, &VerifyOptions::default()).unwrap();
        assert!(r.passed(1.0), "{:?}", r.steps);
        for (s, m) in r.steps.iter().zip(&w.solve_metrics) {
            assert!((s.axial_hz / m.target_axial_hz.unwrap() - 1.0).abs() < 0.01);
        }
        let table = r.to_table(Some(&w));
        assert_eq!(table.rows.len(), 7);
    }

    #[test]
    fn slew_rounding_is_exact() {
        for (x, prev, lim) in [(0.4, 0.1, 0.3), (-0.4, -0.1, 0.3), (1.0, 0.0, 1.0)] {
            let y = enforce_slew(x, prev, lim);
            assert!((y - prev).abs() <= lim);
            assert!((y - x).abs() < 1e-15);
        }
    }
}
