//! End-to-end acceptance checks. Runs every check, prints one PASS/FAIL line
//! each with its runtime, and exits non-zero if any failed.
//!
//! Positional arguments select checks by name substring.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use paultrap::analysis::{
    secular_frequencies, sweep, Potential, SweepMetric, SweepParameter, SweepSpec, SweepTable, DEFAULT_STEP,
};
use paultrap::constants::{mhz_to_omega, CODATA};
use paultrap::diagnostics::{
    beta_from_sideband_ratio, heating_rate, micromotion_field, noise_from_heating, rescale_beta, LaserGeometry,
    MicromotionIndex, NoiseSpectralDensity,
};
use paultrap::dynamics::{
    dominant_frequency, integrate, period_map_trace, transport_excitation, tube_basis, DcSource, ExcitationOptions,
    IntegrateOptions, IonState, Ramp, TransportSchedule,
};
use paultrap::field::{solve_basis, sphere_mesh, BasisCache, ElectrodeBasis, FieldBasis, FnBasis, SolverConfig};
use paultrap::geometry::{Panel, PanelMesh};
use paultrap::scenario::{operating_drive, Preset, Scenario};
use paultrap::waveform::{
    discretize_path, frequency_ramp, synthesize, verify, SynthesisOptions, TransportConstraints, VerifyOptions, Waveform,
};
use paultrap::{DriveConfig, IonSpecies, Point, Vec3};
use rand::{Rng, SeedableRng};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Oracle: potential of an isolated sphere of radius `r_s` held at `v`.
fn sphere_potential(v: f64, r_s: f64, r: f64) -> f64 {
    v * r_s / r
}

/// Two square plates of side `side`, `gap` apart, cut into n×n panels each.
fn plate_pair(side: f64, gap: f64, n: usize) -> PanelMesh {
    let mut panels = Vec::new();
    let h = side / n as f64;
    for (e, z) in [(0usize, 0.5 * gap), (1usize, -0.5 * gap)] {
        for i in 0..n {
            for j in 0..n {
                let x0 = -0.5 * side + i as f64 * h;
                let y0 = -0.5 * side + j as f64 * h;
                let q = [
                    Point::new(x0, y0, z),
                    Point::new(x0 + h, y0, z),
                    Point::new(x0 + h, y0 + h, z),
                    Point::new(x0, y0 + h, z),
                ];
                panels.push(Panel::new(&q, e));
            }
        }
    }
    PanelMesh::from_panels(panels, vec!["top".into(), "bottom".into()])
}

fn bem_oracles() -> Check {
    let t = Instant::now();
    let mesh = sphere_mesh(10.0, 10);
    ensure(mesh.len() >= 500, format!("sphere mesh has only {} panels", mesh.len()))?;
    let b = solve_basis(&mesh, &SolverConfig::default()).map_err(e2s)?;
    let mut worst: f64 = 0.0;
    for r in [20.0, 30.0, 50.0, 100.0] {
        for dir in [Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.3, -0.4, 0.866), Vec3::new(-1.0, 1.0, 1.0)] {
            let p = Point::from(dir.normalize() * r);
            let phi = b.eval_potential(&[1.0], &p).map_err(e2s)?;
            worst = worst.max((phi - sphere_potential(1.0, 10.0, r)).abs() / sphere_potential(1.0, 10.0, r));
        }
    }
    let sphere_time = t.elapsed();
    ensure(worst < 0.01, format!("sphere potential off by {:.3}%", worst * 100.0))?;

    let t = Instant::now();
    let (side, gap) = (1000.0, 100.0);
    let b = solve_basis(&plate_pair(side, gap, 30), &SolverConfig::default()).map_err(e2s)?;
    let e = b.eval_field(&[1.0, 0.0], &Point::origin()).map_err(e2s)?;
    let expect = 1.0 / (gap * 1e-6);
    let plate_err = (-e.z - expect).abs() / expect;
    let plate_time = t.elapsed();
    ensure(plate_err < 0.02, format!("plate midpoint field {:.1} V/m vs {expect:.1} V/m", -e.z))?;
    ensure(sphere_time.as_secs_f64() < 30.0 && plate_time.as_secs_f64() < 30.0, "an oracle solve exceeded 30 s")?;
    Ok(format!(
        "sphere {} panels worst {:.3}% ({:.1?}); plates midpoint {:.3}% ({:.1?})",
        mesh.len(),
        worst * 100.0,
        sphere_time,
        plate_err * 100.0,
        plate_time
    ))
}

fn coarse_linear() -> Scenario {
    let mut s = Preset::Appendix7Seg.scenario();
    s.mesh.max_panel_size = 200.0;
    for r in &mut s.mesh.refinements {
        r.size = 60.0;
    }
    s
}

fn superposition() -> Check {
    let s = coarse_linear();
    let (_, b) = s.solve(&BasisCache::in_memory()).map_err(e2s)?;
    let n = b.n_electrodes();
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    let mut worst_sum: f64 = 0.0;
    for _ in 0..50 {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let p = Point::new(rng.gen_range(-40.0..40.0), rng.gen_range(-40.0..40.0), rng.gen_range(-300.0..300.0));
        let all = b.eval_all(&p).map_err(e2s)?;
        let (phi, e) = b.eval_voltages(&v, &p).map_err(e2s)?;
        let (mut phi_sum, mut e_sum, mut phi_scale, mut e_scale) = (0.0, Vec3::zeros(), 0.0, 0.0);
        for (vi, (p_i, e_i)) in v.iter().zip(&all) {
            phi_sum += vi * p_i;
            e_sum += e_i * *vi;
            phi_scale += (vi * p_i).abs();
            e_scale += (e_i * *vi).norm();
        }
        worst_sum = worst_sum.max((phi - phi_sum).abs() / phi_scale).max((e - e_sum).norm() / e_scale);
    }
    ensure(worst_sum < 1e-12, format!("weighted basis sum differs by {worst_sum:.2e} relative"))?;

    // interior grid around the trap centre, every electrode basis
    let h = 0.5;
    let mut worst_div: f64 = 0.0;
    for i in -2..=2 {
        for j in -2..=2 {
            for k in -2..=2 {
                let c = Point::new(10.0 * i as f64, 10.0 * j as f64, 40.0 * k as f64);
                let mut grad = Vec::with_capacity(6);
                for ax in 0..3 {
                    let mut off = Vec3::zeros();
                    off[ax] = h;
                    grad.push(b.eval_all(&(c + off)).map_err(e2s)?);
                    grad.push(b.eval_all(&(c - off)).map_err(e2s)?);
                }
                for e in 0..n {
                    let mut div = 0.0;
                    let mut scale = 0.0;
                    for ax in 0..3 {
                        let term = (grad[2 * ax][e].1[ax] - grad[2 * ax + 1][e].1[ax]) / (2.0 * h);
                        div += term;
                        scale += term.abs();
                    }
                    if scale > 0.0 {
                        worst_div = worst_div.max(div.abs() / scale);
                    }
                }
            }
        }
    }
    ensure(worst_div < 1e-3, format!("finite-difference divergence {worst_div:.2e} of the field gradient scale"))?;
    Ok(format!("{} panels; superposition {worst_sum:.1e}; divergence {worst_div:.1e}", b.panel_count()))
}

/// Amplitude giving Mathieu parameter q in an ideal quadrupole of radius r0 (µm).
fn amplitude_for_q(q: f64, r0: f64, omega: f64, s: &IonSpecies) -> f64 {
    q * s.mass * (r0 * 1e-6).powi(2) * omega * omega / (2.0 * s.charge)
}

fn quadrupole_chain() -> Check {
    let ca = IonSpecies::calcium40();
    let r0 = 100.0;
    let omega = mhz_to_omega(30.0);
    let basis = FnBasis::quadrupole(r0);
    let mut worst: f64 = 0.0;
    for q in [0.1, 0.2, 0.3, 0.4] {
        let drive = DriveConfig::new(amplitude_for_q(q, r0, omega, &ca), omega).map_err(e2s)?;
        let m = secular_frequencies(&basis, &[0.0], &drive, &ca, &Point::origin()).map_err(e2s)?;
        let expect = q * omega / (2.0 * 2f64.sqrt());
        let kx = m.mode_along(&Vec3::x());
        worst = worst.max((m.omega[kx] - expect).abs() / expect);
    }
    ensure(worst < 1e-3, format!("pseudopotential frequency off by {worst:.2e}"))?;

    let q = 0.3;
    let drive = DriveConfig::new(amplitude_for_q(q, r0, omega, &ca), omega).map_err(e2s)?;
    let expect_hz = q * omega / (2.0 * 2f64.sqrt()) / (2.0 * PI);
    let periods = 400.0;
    let opts = IntegrateOptions { stride: 4, ..IntegrateOptions::for_drive(&drive, 80, periods * drive.period() * 1e6) };
    let init = IonState::at_rest(Point::new(1.0, 0.0, 0.0));
    let tr = integrate(&basis, &drive, &DcSource::Static(vec![0.0]), &ca, &init, &opts).map_err(e2s)?;
    let t: Vec<f64> = tr.states.iter().map(|s| s.time * 1e-6).collect();
    let x: Vec<f64> = tr.states.iter().map(|s| s.position.x).collect();
    let f = dominant_frequency(&t, &x, 0.5 * expect_hz, 1.5 * expect_hz);
    let td_err = (f - expect_hz).abs() / expect_hz;
    ensure(td_err < 0.02, format!("time-domain secular frequency {f:.0} Hz vs {expect_hz:.0} Hz"))?;

    let stable = |q: f64| -> Result<bool, String> {
        let drive = DriveConfig::new(amplitude_for_q(q, r0, omega, &ca), omega).map_err(e2s)?;
        let tr = period_map_trace(&basis, &drive, &[0.0], &ca, &Point::origin(), &Vec3::x(), 400, 1e-3).map_err(e2s)?;
        Ok(tr.abs() < 2.0)
    };
    let (mut lo, mut hi) = (0.5, 1.2);
    ensure(stable(lo)? && !stable(hi)?, "stability bracket does not straddle the boundary")?;
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if stable(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q_edge = 0.5 * (lo + hi);
    ensure((0.88..=0.93).contains(&q_edge), format!("stability boundary at q = {q_edge:.4}"))?;
    Ok(format!("pseudo {worst:.1e}; time domain {:.2}% at q=0.3; boundary q = {q_edge:.4}", td_err * 100.0))
}

fn blade_radial_frequency() -> Check {
    let mut s = Preset::Appendix7Seg.scenario();
    s.drive = operating_drive();
    s.species = IonSpecies::calcium40();
    let (layout, b) = s.solve(&BasisCache::in_memory()).map_err(e2s)?;
    let c = s.landmark(&layout, "trap_center").map_err(e2s)?;
    let m = Potential::pseudo_only(b.as_ref(), &s.drive, &s.species).modes(&c, DEFAULT_STEP).map_err(e2s)?;
    let k = m.mode_along(&Vec3::z());
    let radial: Vec<f64> = (0..3).filter(|i| *i != k).map(|i| m.signed_omega(i) / (2.0 * PI) / 1e6).collect();
    let detail = format!("radial {:.3} / {:.3} MHz", radial[0], radial[1]);
    ensure(radial.iter().all(|f| (3.5..=6.5).contains(f)), detail.clone())?;
    Ok(detail)
}

fn run_sweep(scenario: Scenario, parameter: SweepParameter, values: Vec<f64>, metrics: Vec<SweepMetric>) -> Result<SweepTable, String> {
    let spec = SweepSpec { scenario, parameter, values, metrics, jobs: 1 };
    let t = sweep(&spec, &BasisCache::in_memory()).map_err(e2s)?;
    if let Some(r) = t.rows.iter().find(|r| r.error.is_some()) {
        return Err(format!("{} = {} failed: {}", parameter.name(), r.value, r.error.as_deref().unwrap_or("")));
    }
    Ok(t)
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn bridge_gap_trend() -> Check {
    let mut values = SweepSpec::range(150.0, 400.0, 25.0).map_err(e2s)?;
    values.push(230.0);
    values.sort_by(f64::total_cmp);
    let t = run_sweep(
        Preset::JunctionFinal.scenario(),
        SweepParameter::BridgeGap,
        values.clone(),
        vec![SweepMetric::BarrierHeight, SweepMetric::CenterAxialFrequency],
    )?;
    let h = t.column(SweepMetric::BarrierHeight).unwrap();
    let f = t.column(SweepMetric::CenterAxialFrequency).unwrap();
    let at = values.iter().position(|v| *v == 230.0).unwrap();
    let detail = format!(
        "barrier {:.4}..{:.2e} eV, centre axial {:.3}..{:.3} MHz, {:.3} MHz at 230 um",
        h[0],
        h[h.len() - 1],
        f[0] / 1e6,
        f[f.len() - 1] / 1e6,
        f[at] / 1e6
    );
    ensure(strictly_decreasing(&h), format!("barrier not strictly decreasing: {h:?}"))?;
    ensure(strictly_decreasing(&f), format!("centre frequency not strictly decreasing: {f:?}"))?;
    ensure((0.5e6..=2e6).contains(&f[at]), detail.clone())?;
    Ok(detail)
}

fn gap_study() -> Check {
    let s = Preset::Appendix7Seg.scenario();
    let t = run_sweep(s.clone(), SweepParameter::DcGapWidth, vec![20.0, 40.0], vec![SweepMetric::PeakAxialField])?;
    let peaks = t.column(SweepMetric::PeakAxialField).unwrap();
    let ratio = peaks[1] / peaks[0];
    let depths = SweepSpec::range(100.0, 375.0, 25.0).map_err(e2s)?;
    let d = run_sweep(s, SweepParameter::RfGapDepth, depths.clone(), vec![SweepMetric::PeakAxialField])?;
    let rf = d.column(SweepMetric::PeakAxialField).unwrap();
    let argmin = |n: usize| (0..n).min_by(|a, b| rf[*a].total_cmp(&rf[*b])).unwrap();
    // the check uses the studied range 100-250 um; the scan continues
    // beyond it to show where the global optimum lies
    let studied = depths.iter().filter(|d| **d <= 250.0).count();
    let (best, global) = (argmin(studied), argmin(rf.len()));
    let detail = format!(
        "20 um peak {:.1} V/m, 40/20 ratio {ratio:.2}, mirrored RF gap optimum {} um over 100-250 um ({:.1} V/m), {} um over 100-375 um ({:.1} V/m); scan [{}]",
        peaks[0],
        depths[best],
        rf[best],
        depths[global],
        rf[global],
        rf.iter().map(|v| format!("{v:.1}")).collect::<Vec<_>>().join(" ")
    );
    let mut failures = Vec::new();
    if !(100.0..=300.0).contains(&peaks[0]) {
        failures.push("20 um peak outside 100-300 V/m");
    }
    if !(2.0..=4.0).contains(&ratio) {
        failures.push("ratio outside 3 +- 1");
    }
    if !(200.0..=250.0).contains(&depths[best]) {
        failures.push("RF gap depth optimum outside 200-250 um");
    }
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{}: {detail}", failures.join("; ")))
    }
}

/// Axial RF field (V/m at the drive amplitude) from the trap centre to one pitch out.
fn axial_field_profile(b: &FieldBasis, drive: &DriveConfig, pitch: f64) -> Result<Vec<f64>, String> {
    let rf = b.rf_index().ok_or("no RF electrode")?;
    (0..=pitch as usize)
        .map(|k| Ok(b.eval_all(&Point::new(0.0, 0.0, k as f64)).map_err(e2s)?[rf].1.z * drive.rf_amplitude))
        .collect()
}

/// Index of the first local extremum whose magnitude exceeds 10% of the peak.
fn first_extremum(e: &[f64]) -> Option<usize> {
    let peak = e.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (1..e.len() - 1).find(|&i| {
        let v = e[i];
        v.abs() > 0.1 * peak && ((v >= e[i - 1] && v >= e[i + 1]) || (v <= e[i - 1] && v <= e[i + 1]))
    })
}

fn indentation_flip() -> Check {
    let base = Preset::Appendix7Seg.scenario();
    let pitch = base.linear_params().unwrap().pitch();
    let cache = BasisCache::in_memory();
    let shaped = SweepParameter::IndentationDepth.apply(&base, 5.0).map_err(e2s)?;
    let (_, b0) = base.solve(&cache).map_err(e2s)?;
    let (_, b1) = shaped.solve(&cache).map_err(e2s)?;
    let e0 = axial_field_profile(&b0, &base.drive, pitch)?;
    let e1 = axial_field_profile(&b1, &base.drive, pitch)?;
    // the shaped profile sits on a rising background, so the lobe is
    // located on the unshaped trap and both fields are compared there
    let i = first_extremum(&e0).ok_or("unshaped profile has no extremum")?;
    let (x0, x1) = (e0[i], e1[i]);
    let own = first_extremum(&e1).map_or("none".to_string(), |k| format!("{:.1} V/m at {k} um", e1[k]));
    let detail = format!("first lobe at z = {i} um: {x0:.1} V/m plain vs {x1:.1} V/m indented (shaped extremum: {own})");
    ensure(x0.signum() != x1.signum() && x1.abs() > 0.1 * x0.abs(), detail.clone())?;
    Ok(detail)
}

fn misalignment() -> Check {
    let s = Preset::Appendix7Seg.scenario();
    let tilt = run_sweep(s.clone(), SweepParameter::Tilt, vec![0.05, 2.5], vec![SweepMetric::PeakAxialFieldChange])?;
    let shift = run_sweep(s, SweepParameter::LinearShift, vec![20.0], vec![SweepMetric::PeakAxialFieldChange])?;
    let dt = tilt.column(SweepMetric::PeakAxialFieldChange).unwrap();
    let ds = shift.column(SweepMetric::PeakAxialFieldChange).unwrap()[0];
    let detail = format!("|dEz| tilt 0.05 deg {:.2} V/m, 2.5 deg {:.1} V/m, shift 20 um {ds:.1} V/m", dt[0], dt[1]);
    let scale = 100.0 / 3.0..=300.0;
    ensure(scale.contains(&dt[1]) && scale.contains(&ds), format!("not O(100 V/m): {detail}"))?;
    ensure(dt[0] * 10.0 <= dt[1], format!("small tilt not 10x below: {detail}"))?;
    Ok(detail)
}

struct Junction {
    scenario: Scenario,
    layout: paultrap::geometry::TrapLayout,
    basis: std::sync::Arc<FieldBasis>,
}

fn operating_junction(cache: &BasisCache) -> Result<Junction, String> {
    let mut s = Preset::JunctionFinal.scenario();
    s.drive = operating_drive();
    s.species = IonSpecies::calcium40();
    let (layout, basis) = s.solve(cache).map_err(e2s)?;
    Ok(Junction { scenario: s, layout, basis })
}

/// Experimental zone to junction centre, axial frequency ramped from 1 MHz
/// down to the bare pseudopotential value at the centre.
fn transport_waveform(j: &Junction, spacing: f64) -> Result<(Waveform, TransportConstraints), String> {
    let s = &j.scenario;
    let path = discretize_path(&j.layout, "experimental_zone", "junction_center", spacing).map_err(e2s)?;
    let c = j.layout.landmarks["junction_center"];
    let zero = vec![0.0; j.basis.n_electrodes()];
    let m = secular_frequencies(j.basis.as_ref(), &zero, &s.drive, &s.species, &c).map_err(e2s)?;
    let fc = m.hz()[m.mode_along(&Vec3::z())];
    let targets = frequency_ramp(&path, &s.species, 1e6, fc);
    let constraints = TransportConstraints::for_layout(&j.layout, &path, 10.0, 1.0);
    let w = synthesize(j.basis.as_ref(), &s.drive, &s.species, &path, &targets, &constraints, &SynthesisOptions::default())
        .map_err(e2s)?;
    Ok((w, constraints))
}

fn waveform_synthesis(cache: &BasisCache) -> Check {
    let j = operating_junction(cache)?;
    let (w, c) = transport_waveform(&j, 10.0)?;
    let r = verify(j.basis.as_ref(), &j.scenario.drive, &j.scenario.species, &w, &VerifyOptions::default()).map_err(e2s)?;
    let violations = w.check_constraints(&c);
    let first = &r.steps[0];
    let last = r.steps.last().unwrap();
    let axial: Vec<f64> = r.steps.iter().map(|s| s.axial_hz).collect();
    let axial_ok = axial.windows(2).all(|p| p[1] <= p[0]);
    let mut sorted_first = first.mode_hz;
    let mut sorted_last = last.mode_hz;
    sorted_first.sort_by(f64::total_cmp);
    sorted_last.sort_by(f64::total_cmp);
    let all_lower = (0..3).all(|k| sorted_last[k] < sorted_first[k]);
    let detail = format!(
        "{} steps, max position error {:.3} um, max |V| {:.2} V, centre modes {:.3}/{:.3}/{:.3} MHz (axial {:.3}), {} violations",
        w.len(),
        r.max_position_error(),
        w.max_abs_voltage(),
        sorted_last[0] / 1e6,
        sorted_last[1] / 1e6,
        sorted_last[2] / 1e6,
        last.axial_hz / 1e6,
        violations.len()
    );
    let mut failures = Vec::new();
    if !r.passed(1.0) {
        failures.push("verify failed");
    }
    if !violations.is_empty() {
        failures.push("constraint violations");
    }
    if w.max_abs_voltage() >= 10.0 {
        failures.push("voltage above 10 V");
    }
    if !axial_ok {
        failures.push("axial frequency rises along the path");
    }
    if !all_lower {
        failures.push("a mode is not lower at the centre");
    }
    if !last.near_degenerate {
        failures.push("lowest two centre modes not near-degenerate");
    }
    if !(0.2e6..=0.8e6).contains(&last.axial_hz) {
        failures.push("centre frequency outside x2 of 0.4 MHz");
    }
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{}: {detail}", failures.join("; ")))
    }
}

fn transport_ladder(cache: &BasisCache) -> Check {
    let j = operating_junction(cache)?;
    let (w, _) = transport_waveform(&j, 1.0)?;
    let tube = tube_basis(j.basis.as_ref(), &w.positions, 6.0, 2.0).map_err(e2s)?;
    // durations in axial periods of the 1 MHz starting well
    let f_start = 1e6;
    let periods = [0.5, 5.0, 50.0, 200.0];
    let mut gains = Vec::new();
    for p in periods {
        let sched = TransportSchedule::new(w.clone(), p / f_start * 1e6, Ramp::Smooth).map_err(e2s)?;
        let r = transport_excitation(&tube, &j.scenario.drive, &j.scenario.species, &sched, &ExcitationOptions::default())
            .map_err(e2s)?;
        gains.push(r.axial_gain());
    }
    let detail = format!(
        "axial gain {}",
        periods.iter().zip(&gains).map(|(p, g)| format!("{p} periods: {g:.4}")).collect::<Vec<_>>().join(", ")
    );
    ensure(gains.windows(2).all(|g| g[1] <= g[0]), format!("not monotone: {detail}"))?;
    ensure(gains[3] < 0.1, format!("longest run too hot: {detail}"))?;
    Ok(detail)
}

fn diagnostics() -> Check {
    let ca = IonSpecies::calcium40();
    let be = IonSpecies::beryllium9();
    let laser = LaserGeometry::new(729e-9, 45.0).map_err(e2s)?;
    let e = micromotion_field(&MicromotionIndex::axial(0.05).map_err(e2s)?, &ca, mhz_to_omega(36.3), &laser).map_err(e2s)?;
    ensure((e - 178.0).abs() <= 1.0, format!("micromotion field {e:.2} V/m"))?;
    let beta = beta_from_sideband_ratio(1.0 / 40.0).map_err(e2s)?.beta;
    ensure((beta - 0.05).abs() <= 0.002 * 0.05, format!("sideband beta {beta:.5}"))?;
    let rescaled = rescale_beta(&MicromotionIndex::axial(3.0).map_err(e2s)?, &be, &ca).beta;
    ensure((rescaled - 0.675).abs() < 5e-4, format!("rescaled beta {rescaled:.4}"))?;
    let mut worst: f64 = 0.0;
    for (rate, mhz) in [(80.0, 4.4), (1500.0, 4.4), (3.0, 0.5), (1e4, 2.2)] {
        for sp in [&ca, &be] {
            let w = mhz_to_omega(mhz);
            let n = noise_from_heating(rate, sp, w).map_err(e2s)?;
            let back = heating_rate(&n, sp, w).map_err(e2s)?;
            worst = worst.max((back - rate).abs() / rate);
            let forward = heating_rate(&NoiseSpectralDensity::new(n.s_e, w).map_err(e2s)?, sp, w).map_err(e2s)?;
            // oracle: Γ = Q² S_E / (4 m ħ ω)
            let oracle = sp.charge * sp.charge * n.s_e / (4.0 * sp.mass * CODATA.hbar * w);
            worst = worst.max((forward - oracle).abs() / oracle);
        }
    }
    ensure(worst < 1e-12, format!("heating round trip error {worst:.1e}"))?;
    Ok(format!("E = {e:.2} V/m, beta(1/40) = {beta:.5}, beta_Ca = {rescaled:.4}, round trip {worst:.1e}"))
}

struct Criterion {
    name: &'static str,
    limit: Duration,
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected = |name: &str| filters.is_empty() || filters.iter().any(|f| name.contains(f.as_str()));
    let junction_cache = BasisCache::in_memory();
    let checks: Vec<(Criterion, Box<dyn Fn() -> Check + '_>)> = vec![
        (Criterion { name: "bem-oracles", limit: Duration::from_secs(60) }, Box::new(bem_oracles)),
        (Criterion { name: "superposition-laplace", limit: Duration::from_secs(10) }, Box::new(superposition)),
        (Criterion { name: "quadrupole-chain", limit: Duration::from_secs(120) }, Box::new(quadrupole_chain)),
        (Criterion { name: "blade-radial-frequency", limit: Duration::from_secs(600) }, Box::new(blade_radial_frequency)),
        (Criterion { name: "bridge-gap-trend", limit: Duration::from_secs(1800) }, Box::new(bridge_gap_trend)),
        (Criterion { name: "gap-study", limit: Duration::from_secs(1200) }, Box::new(gap_study)),
        (Criterion { name: "indentation-flip", limit: Duration::from_secs(600) }, Box::new(indentation_flip)),
        (Criterion { name: "misalignment", limit: Duration::from_secs(1200) }, Box::new(misalignment)),
        (Criterion { name: "waveform-synthesis", limit: Duration::from_secs(900) }, Box::new(|| waveform_synthesis(&junction_cache))),
        (Criterion { name: "transport-ladder", limit: Duration::from_secs(900) }, Box::new(|| transport_ladder(&junction_cache))),
        (Criterion { name: "diagnostics", limit: Duration::from_secs(1) }, Box::new(diagnostics)),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (c, f) in &checks {
        if !selected(c.name) {
            continue;
        }
        ran += 1;
        let t = Instant::now();
        let outcome = f();
        let dt = t.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if dt <= c.limit => (true, d),
            Ok(d) => (false, format!("{d}; runtime above {:?}", c.limit)),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!("{} {:<24} {:>8.1?}  {detail}", if ok { "PASS" } else { "FAIL" }, c.name, dt);
    }
    println!("acceptance: {} of {ran} passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
