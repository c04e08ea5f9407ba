use serde::Serialize;

use super::{integrate, DcSource, DynamicsError, IntegrateOptions, IonState, Trajectory, TransportSchedule};
use crate::analysis::{derivatives, find_minimum, pseudopotential, MinimizeOptions, ModeSet, DEFAULT_STEP};
use nalgebra::Matrix3;
use crate::constants::{DriveConfig, IonSpecies, CODATA};
use crate::error::{Error, Result};
use crate::field::ElectrodeBasis;
use crate::table::Table;
use crate::waveform::{verify, VerifyOptions};
use crate::{Point, Vec3};

/// Frequency (in 1/unit of `t`) of the strongest spectral line of `x` in
/// `[f_lo, f_hi]`, from a Hann-windowed Fourier sum refined by golden-section
/// search.
pub fn dominant_frequency(t: &[f64], x: &[f64], f_lo: f64, f_hi: f64) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let (t0, t1) = (t[0], t[n - 1]);
    let w: Vec<f64> = t
        .iter()
        .zip(x)
        .map(|(ti, xi)| {
            let s = (ti - t0) / (t1 - t0);
            (xi - mean) * (0.5 - 0.5 * (2.0 * std::f64::consts::PI * s).cos())
        })
        .collect();
    let power = |f: f64| {
        let (mut re, mut im) = (0.0, 0.0);
        for (ti, wi) in t.iter().zip(&w) {
            let ph = 2.0 * std::f64::consts::PI * f * (ti - t0);
            re += wi * ph.cos();
            im -= wi * ph.sin();
        }
        re * re + im * im
    };
    let samples = 400;
    let df = (f_hi - f_lo) / samples as f64;
    let best = (0..=samples).map(|k| f_lo + k as f64 * df).max_by(|a, b| power(*a).total_cmp(&power(*b))).unwrap();
    let (mut a, mut b) = ((best - df).max(f_lo), (best + df).min(f_hi));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if power(c) > power(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

/// Mode energies in quanta (E/ħω) of the RF-period-averaged motion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecularEnergy {
    /// µs, centre of each averaging window.
    pub times: Vec<f64>,
    pub quanta: Vec<[f64; 3]>,
    pub mode_hz: [f64; 3],
}

impl SecularEnergy {
    pub fn mean(&self) -> [f64; 3] {
        let n = self.quanta.len().max(1) as f64;
        let mut m = [0.0; 3];
        for q in &self.quanta {
            for k in 0..3 {
                m[k] += q[k] / n;
            }
        }
        m
    }

    pub fn total(&self, i: usize) -> f64 {
        let w = &self.quanta[i];
        let h = &self.mode_hz;
        // energies in units of ħ·1 Hz so modes can be summed
        (0..3).map(|k| w[k] * h[k]).sum()
    }
}

/// Averages position and velocity over each RF period and projects the
/// result onto the modes of `modes` (about `modes.point`). The sample
/// interval must divide the RF period.
pub fn secular_energy(traj: &Trajectory, modes: &ModeSet, species: &IonSpecies, drive: &DriveConfig) -> Result<SecularEnergy> {
    if let Some(k) = modes.imaginary.iter().position(|&i| i) {
        return Err(DynamicsError::ImaginaryMode(k).into());
    }
    let period = drive.period() * 1e6;
    let n = traj.states.len();
    let span = traj.states[n - 1].time - traj.states[0].time;
    if span < 10.0 * period * (1.0 - 1e-9) {
        return Err(DynamicsError::TooShort { cycles: span / period, required: 10.0 }.into());
    }
    let w = (period / traj.sample_interval).round() as usize;
    if w == 0 || (w as f64 * traj.sample_interval - period).abs() > 1e-6 * period {
        return Err(Error::invalid(format!(
            "sample interval {} µs does not divide the RF period {period} µs",
            traj.sample_interval
        )));
    }
    let mut times = Vec::with_capacity(n - w + 1);
    let mut quanta = Vec::with_capacity(n - w + 1);
    let mut sp = Vec3::zeros();
    let mut sv = Vec3::zeros();
    let mut st = 0.0;
    let omega = modes.omega;
    let hbar = CODATA.hbar;
    for i in 0..n {
        let s = &traj.states[i];
        sp += s.position.coords;
        sv += s.velocity;
        st += s.time;
        if i >= w {
            let old = &traj.states[i - w];
            sp -= old.position.coords;
            sv -= old.velocity;
            st -= old.time;
        }
        if i + 1 >= w {
            let r = sp / w as f64 - modes.point.coords;
            let v = sv / w as f64;
            let mut q = [0.0; 3];
            for k in 0..3 {
                let x = modes.axes[k].dot(&r) * 1e-6;
                let u = modes.axes[k].dot(&v);
                q[k] = 0.5 * species.mass * (u * u + omega[k] * omega[k] * x * x) / (hbar * omega[k]);
            }
            times.push(st / w as f64);
            quanta.push(q);
        }
    }
    Ok(SecularEnergy { times, quanta, mode_hz: modes.hz() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcitationOptions {
    pub samples_per_period: usize,
    /// Length of the holds before and after the transport, in periods of the
    /// slowest mode.
    pub settle_periods: f64,
    pub rf_phase: f64,
    /// Run the waveform verification first.
    pub verify: bool,
    /// Half-width of the minimum search around the end waypoints (µm).
    pub search_half_width: f64,
}

impl Default for ExcitationOptions {
    fn default() -> Self {
        Self { samples_per_period: 40, settle_periods: 10.0, rf_phase: 0.0, verify: true, search_half_width: 20.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcitationResult {
    /// µs
    pub duration: f64,
    /// Final minus initial quanta per mode of the final well; infinite if lost.
    pub gain: [f64; 3],
    pub initial: [f64; 3],
    pub final_quanta: [f64; 3],
    /// Mode frequencies of the final well (Hz).
    pub mode_hz: [f64; 3],
    /// Index of the mode along the last direction of travel.
    pub axial_mode: usize,
    pub lost_at: Option<Point>,
}

impl ExcitationResult {
    pub fn axial_gain(&self) -> f64 {
        self.gain[self.axial_mode]
    }

    /// Rows of (duration, mode, frequency, gain) for a set of runs.
    pub fn table(results: &[ExcitationResult]) -> Table {
        let mut t = Table::new(["duration_us", "mode", "frequency_Hz", "quanta_gain", "axial"]);
        for r in results {
            for k in 0..3 {
                t.push_numbers(&[r.duration, k as f64, r.mode_hz[k], r.gain[k], (k == r.axial_mode) as u8 as f64]);
            }
        }
        t
    }
}

fn well_modes<B: ElectrodeBasis + ?Sized>(
    basis: &B,
    v: &[f64],
    drive: &DriveConfig,
    species: &IonSpecies,
    seed: &Point,
    half: f64,
) -> Result<ModeSet> {
    let h = Vec3::repeat(half);
    // sub-nanometre, so an ion at rest there carries well under 0.01 quanta
    let opts = MinimizeOptions { tolerance: 1e-6, max_iterations: 200, ..MinimizeOptions::default() };
    let m = find_minimum(basis, v, drive, species, seed, (seed - h, seed + h), &opts)?;
    let point = force_balance(basis, v, drive, species, m.point, &m.hessian)?;
    let modes = ModeSet::from_hessian(point, &m.hessian, species);
    if let Some(k) = modes.imaginary.iter().position(|&i| i) {
        return Err(DynamicsError::ImaginaryMode(k).into());
    }
    Ok(modes)
}

/// Refines a well position so the DC field itself, rather than the gradient
/// of the DC potential, balances the pseudopotential force. Interpolated
/// bases store both independently and the integrator only sees the field.
fn force_balance<B: ElectrodeBasis + ?Sized>(
    basis: &B,
    v: &[f64],
    drive: &DriveConfig,
    species: &IonSpecies,
    start: Point,
    hessian: &Matrix3<f64>,
) -> Result<Point> {
    let Some(inv) = hessian.try_inverse() else { return Ok(start) };
    let z = species.charge / CODATA.elementary_charge;
    let mut p = start;
    for _ in 0..8 {
        let ps = derivatives(&|q: &Point| pseudopotential(basis, drive, species, q), &p, DEFAULT_STEP)?;
        let g = ps.gradient - basis.field(v, &p)? * (z * 1e-6);
        let step = inv * g;
        p -= step;
        if step.norm() < 1e-7 {
            break;
        }
    }
    Ok(p)
}

/// Starts the ion at rest in the first well, holds, plays the schedule,
/// holds in the last well and reports the change of RF-averaged mode
/// energy in the modes of the last well.
pub fn transport_excitation<B: ElectrodeBasis + ?Sized>(
    basis: &B,
    drive: &DriveConfig,
    species: &IonSpecies,
    schedule: &TransportSchedule,
    opts: &ExcitationOptions,
) -> Result<ExcitationResult> {
    let wf = &schedule.waveform;
    if opts.verify {
        let report = verify(basis, drive, species, wf, &VerifyOptions::default())?;
        if !report.passed(1.0) {
            return Err(DynamicsError::UnverifiedWaveform(format!(
                "largest well position error {:.3} µm",
                report.max_position_error()
            ))
            .into());
        }
    }
    let first = &wf.voltages[0];
    let last = &wf.voltages[wf.len() - 1];
    let m0 = well_modes(basis, first, drive, species, &wf.positions[0], opts.search_half_width)?;
    let m1 = well_modes(basis, last, drive, species, &wf.positions[wf.len() - 1], opts.search_half_width)?;
    let slowest = m0.hz().iter().chain(m1.hz().iter()).cloned().fold(f64::INFINITY, f64::min);
    let settle = opts.settle_periods / slowest * 1e6;
    let base = IntegrateOptions { rf_phase: opts.rf_phase, ..IntegrateOptions::for_drive(drive, opts.samples_per_period, settle) };
    let axial_mode = m1.mode_along(&wf.tangent(wf.len() - 1));
    let lost = |p: Option<Point>| ExcitationResult {
        duration: schedule.duration,
        gain: [f64::INFINITY; 3],
        initial: [f64::NAN; 3],
        final_quanta: [f64::INFINITY; 3],
        mode_hz: m1.hz(),
        axial_mode,
        lost_at: p,
    };

    let hold0 = integrate(basis, drive, &DcSource::Static(first.clone()), species, &IonState::secular_rest(basis, drive, species, m0.point, opts.rf_phase)?, &base)?;
    if hold0.escaped {
        return Ok(lost(hold0.escape_point));
    }
    let initial = secular_energy(&hold0, &m0, species, drive)?.mean();

    let start = hold0.last().time;
    let mut run = IntegrateOptions::for_drive(drive, opts.samples_per_period, schedule.duration);
    run.rf_phase = opts.rf_phase;
    run.stride = run.steps.max(1);
    let moved = integrate(basis, drive, &DcSource::Schedule { schedule, start }, species, hold0.last(), &run)?;
    if moved.escaped {
        return Ok(lost(moved.escape_point));
    }

    let hold1 = integrate(basis, drive, &DcSource::Static(last.clone()), species, moved.last(), &base)?;
    if hold1.escaped {
        return Ok(lost(hold1.escape_point));
    }
    let final_quanta = secular_energy(&hold1, &m1, species, drive)?.mean();
    let gain = [0, 1, 2].map(|k| final_quanta[k] - initial[k]);
    Ok(ExcitationResult { duration: schedule.duration, gain, initial, final_quanta, mode_hz: m1.hz(), axial_mode, lost_at: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::secular_frequencies;
    use crate::dynamics::{Ramp, TransportSchedule};
    use crate::field::FnBasis;
    use crate::waveform::Waveform;

    fn ca() -> IonSpecies {
        IonSpecies::calcium40()
    }

    /// Quadrupole plus endcap at low q, so the pseudopotential picture holds.
    fn trap() -> (FnBasis, DriveConfig, Vec<f64>) {
        (FnBasis::quadrupole_with_endcaps(100.0, 200.0), DriveConfig::from_mhz(60.0, 30.0).unwrap(), vec![0.0, 2.0])
    }

    #[test]
    fn dominant_frequency_of_a_sine() {
        let t: Vec<f64> = (0..2000).map(|k| k as f64 * 0.01).collect();
        let x: Vec<f64> = t.iter().map(|t| (2.0 * std::f64::consts::PI * 1.37 * t).sin() + 0.3).collect();
        assert!((dominant_frequency(&t, &x, 0.5, 3.0) - 1.37).abs() < 1e-3);
    }

    #[test]
    fn ion_at_rest_has_no_quanta() {
        let (b, drive, dc) = trap();
        let modes = secular_frequencies(&b, &dc, &drive, &ca(), &Point::origin()).unwrap();
        let opts = IntegrateOptions::for_drive(&drive, 40, 50.0 * drive.period() * 1e6);
        let tr = integrate(&b, &drive, &DcSource::Static(dc.clone()), &ca(), &IonState::at_rest(Point::origin()), &opts).unwrap();
        let e = secular_energy(&tr, &modes, &ca(), &drive).unwrap();
        assert!(e.quanta.iter().flatten().all(|q| *q < 0.01));
    }

    #[test]
    fn ten_quanta_displacement_is_recovered() {
        let (b, drive, dc) = trap();
        let s = ca();
        let modes = secular_frequencies(&b, &dc, &drive, &s, &Point::origin()).unwrap();
        let k = modes.mode_along(&Vec3::z());
        let w = modes.omega[k];
        // ½ m ω² A² = 10 ħ ω
        let amp = (2.0 * 10.0 * CODATA.hbar / (s.mass * w)).sqrt() * 1e6;
        let start = Point::origin() + modes.axes[k] * amp;
        let dur = 20.0 * 2.0 * std::f64::consts::PI / w * 1e6;
        let opts = IntegrateOptions::for_drive(&drive, 40, dur);
        let tr = integrate(&b, &drive, &DcSource::Static(dc.clone()), &s, &IonState::at_rest(start), &opts).unwrap();
        let e = secular_energy(&tr, &modes, &s, &drive).unwrap().mean();
        assert!((e[k] / 10.0 - 1.0).abs() < 0.05, "{e:?}");
        for j in (0..3).filter(|j| *j != k) {
            assert!(e[j] < 0.5);
        }
    }

    #[test]
    fn static_energy_drift_over_1000_cycles() {
        let (b, _, dc) = trap();
        // q ≈ 0.27, where the averaged-mode picture holds
        let drive = DriveConfig::from_mhz(20.0, 30.0).unwrap();
        let s = ca();
        let modes = secular_frequencies(&b, &dc, &drive, &s, &Point::origin()).unwrap();
        let start = Point::new(0.05, -0.03, 0.1);
        let opts = IntegrateOptions::for_drive(&drive, 40, 1000.0 * drive.period() * 1e6);
        let tr = integrate(&b, &drive, &DcSource::Static(dc.clone()), &s, &IonState::at_rest(start), &opts).unwrap();
        let e = secular_energy(&tr, &modes, &s, &drive).unwrap();
        let n = e.quanta.len();
        // compare totals averaged over the first and last tenth
        let avg = |r: std::ops::Range<usize>| r.clone().map(|i| e.total(i)).sum::<f64>() / r.len() as f64;
        let a = avg(0..n / 10);
        let z = avg(n - n / 10..n);
        assert!(((z - a) / a).abs() < 1e-3, "{a} -> {z}");
    }

    #[test]
    fn too_short_and_imaginary_rejected() {
        let (b, drive, dc) = trap();
        let modes = secular_frequencies(&b, &dc, &drive, &ca(), &Point::origin()).unwrap();
        let opts = IntegrateOptions::for_drive(&drive, 40, 5.0 * drive.period() * 1e6);
        let tr = integrate(&b, &drive, &DcSource::Static(dc.clone()), &ca(), &IonState::at_rest(Point::origin()), &opts).unwrap();
        assert!(secular_energy(&tr, &modes, &ca(), &drive).is_err());
        let bad = secular_frequencies(&b, &[0.0, -50.0], &drive, &ca(), &Point::origin()).unwrap();
        assert!(!bad.is_confined());
        let opts = IntegrateOptions::for_drive(&drive, 40, 20.0 * drive.period() * 1e6);
        let tr = integrate(&b, &drive, &DcSource::Static(dc), &ca(), &IonState::at_rest(Point::origin()), &opts).unwrap();
        assert!(secular_energy(&tr, &bad, &ca(), &drive).is_err());
    }

    #[test]
    fn static_schedule_adds_nothing() {
        let (b, drive, dc) = trap();
        let w = Waveform {
            electrode_names: vec!["rf".into(), "dc".into()],
            positions: vec![Point::origin(); 3],
            voltages: vec![dc.clone(); 3],
            solve_metrics: Vec::new(),
            config_hash: String::new(),
        };
        let sched = TransportSchedule::new(w, 5.0, Ramp::Smooth).unwrap();
        let r = transport_excitation(&b, &drive, &ca(), &sched, &ExcitationOptions::default()).unwrap();
        assert!(r.gain.iter().all(|g| g.abs() < 0.01), "{r:?}");
        assert_eq!(r.lost_at, None);
    }
}
