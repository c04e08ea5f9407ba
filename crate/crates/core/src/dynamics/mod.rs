//! Classical single-ion trajectories in the full RF-modulated field.
//!
//! Positions are in µm, velocities in µm/µs (= m/s) and times in µs. The
//! equation of motion is m·a = Q·(E_DC(r, t) + E_RF(r)·cos(Ω t + φ)),
//! integrated with fixed-step velocity Verlet.

mod energy;
mod tube;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{DriveConfig, IonSpecies};
use crate::error::{Error, Result};
use crate::field::{ElectrodeBasis, FieldError};
use crate::table::Table;
use crate::waveform::Waveform;
use crate::{Point, Vec3};

pub use energy::{
    dominant_frequency, secular_energy, transport_excitation, ExcitationOptions, ExcitationResult, SecularEnergy,
};
pub use tube::{tube_basis, TubeBasis};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("time step {dt:.4e} µs exceeds 1/20 of the RF period ({max:.4e} µs)")]
    TimeStep { dt: f64, max: f64 },
    #[error("non-finite ion state at t = {time} µs")]
    NonFinite { time: f64 },
    #[error("mode {0} has an imaginary frequency")]
    ImaginaryMode(usize),
    #[error("trajectory spans {cycles:.1} RF cycles; at least {required} are needed")]
    TooShort { cycles: f64, required: f64 },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("waveform does not pass verification: {0}")]
    UnverifiedWaveform(String),
}

impl DynamicsError {
    pub fn is_config(&self) -> bool {
        !matches!(self, DynamicsError::NonFinite { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IonState {
    /// µm
    pub position: Point,
    /// µm/µs
    pub velocity: Vec3,
    /// µs
    pub time: f64,
}

impl IonState {
    pub fn at_rest(position: Point) -> Self {
        Self { position, velocity: Vec3::zeros(), time: 0.0 }
    }

    /// Secular motion at rest at `position` with the driven micromotion
    /// already in phase, at t = 0 for RF phase `rf_phase`.
    pub fn secular_rest<B: ElectrodeBasis + ?Sized>(
        basis: &B,
        drive: &DriveConfig,
        species: &IonSpecies,
        position: Point,
        rf_phase: f64,
    ) -> Result<Self> {
        let Some(rf) = basis.rf_index() else { return Ok(Self::at_rest(position)) };
        let e = basis.eval_all(&position)?[rf].1 * drive.rf_amplitude;
        // x_mm = -(QE/mΩ²) cos(Ωt + φ), in µm and µm/µs
        let a = e * (species.charge / species.mass);
        let w = drive.rf_omega;
        Ok(Self {
            position: position - a * (rf_phase.cos() / (w * w) * 1e6),
            velocity: a * (rf_phase.sin() / w),
            time: 0.0,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().chain(self.velocity.iter()).all(|v| v.is_finite()) && self.time.is_finite()
    }
}

/// Fraction of the path covered as a function of the fraction of time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ramp {
    /// Constant speed.
    Linear,
    /// τ − sin(2πτ)/2π: velocity and acceleration vanish at both ends.
    Smooth,
}

impl Ramp {
    pub fn eval(self, tau: f64) -> f64 {
        let tau = tau.clamp(0.0, 1.0);
        match self {
            Ramp::Linear => tau,
            Ramp::Smooth => tau - (2.0 * PI * tau).sin() / (2.0 * PI),
        }
    }
}

/// A waveform played over `duration` µs. The well advances along the
/// waypoints by arc length following `ramp`; voltages are interpolated
/// linearly between consecutive steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportSchedule {
    pub waveform: Waveform,
    /// µs
    pub duration: f64,
    pub ramp: Ramp,
    /// Cumulative waypoint distance, or the step index if the waypoints
    /// do not move.
    arc: Vec<f64>,
}

impl TransportSchedule {
    pub fn new(waveform: Waveform, duration: f64, ramp: Ramp) -> Result<Self> {
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(DynamicsError::InvalidSchedule(format!("duration must be positive, got {duration}")).into());
        }
        if waveform.len() < 2 {
            return Err(DynamicsError::InvalidSchedule("interpolation needs at least two steps".into()).into());
        }
        let mut arc = vec![0.0];
        for w in waveform.positions.windows(2) {
            arc.push(arc.last().unwrap() + (w[1] - w[0]).norm());
        }
        if arc.windows(2).any(|a| !(a[1] > a[0])) {
            arc = (0..waveform.len()).map(|k| k as f64).collect();
        }
        Ok(Self { waveform, duration, ramp, arc })
    }

    /// Fractional step index at time `t` (µs from the schedule start).
    pub fn progress(&self, t: f64) -> f64 {
        let total = *self.arc.last().unwrap();
        let s = self.ramp.eval(t / self.duration) * total;
        let n = self.arc.len();
        let i = self.arc.partition_point(|a| *a <= s).clamp(1, n - 1) - 1;
        i as f64 + ((s - self.arc[i]) / (self.arc[i + 1] - self.arc[i])).clamp(0.0, 1.0)
    }

    pub fn voltages_at(&self, t: f64, out: &mut [f64]) {
        let x = self.progress(t);
        let n = self.waveform.len();
        let i = (x.floor() as usize).min(n - 2);
        let f = x - i as f64;
        let (a, b) = (&self.waveform.voltages[i], &self.waveform.voltages[i + 1]);
        for (o, (va, vb)) in out.iter_mut().zip(a.iter().zip(b)) {
            *o = va + f * (vb - va);
        }
    }

    /// Interpolated well position at time `t`.
    pub fn position_at(&self, t: f64) -> Point {
        let x = self.progress(t);
        let i = (x.floor() as usize).min(self.waveform.len() - 2);
        let p = &self.waveform.positions;
        p[i] + (p[i + 1] - p[i]) * (x - i as f64)
    }
}

/// DC voltages as a function of time.
#[derive(Debug, Clone, PartialEq)]
pub enum DcSource<'a> {
    Static(Vec<f64>),
    /// Schedule whose time origin is at `start` µs.
    Schedule { schedule: &'a TransportSchedule, start: f64 },
}

impl DcSource<'_> {
    fn voltages_at(&self, t: f64, out: &mut [f64]) {
        match self {
            DcSource::Static(v) => out.copy_from_slice(v),
            DcSource::Schedule { schedule, start } => schedule.voltages_at(t - start, out),
        }
    }

    fn len(&self) -> usize {
        match self {
            DcSource::Static(v) => v.len(),
            DcSource::Schedule { schedule, .. } => schedule.waveform.electrode_names.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    /// µs
    pub dt: f64,
    /// Number of steps to integrate.
    pub steps: usize,
    /// Keep every `stride`-th state.
    pub stride: usize,
    /// RF phase φ at t = 0 (rad).
    pub rf_phase: f64,
}

impl IntegrateOptions {
    /// `samples_per_period` steps per RF period for `duration` µs.
    pub fn for_drive(drive: &DriveConfig, samples_per_period: usize, duration: f64) -> Self {
        let dt = drive.period() * 1e6 / samples_per_period as f64;
        Self { dt, steps: (duration / dt).round() as usize, stride: 1, rf_phase: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<IonState>,
    /// µs between consecutive stored states.
    pub sample_interval: f64,
    /// The ion left the field domain or hit an electrode.
    pub escaped: bool,
    pub escape_point: Option<Point>,
}

impl Trajectory {
    pub fn last(&self) -> &IonState {
        self.states.last().expect("trajectories hold the initial state")
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["t_us", "x_um", "y_um", "z_um", "vx_m_per_s", "vy_m_per_s", "vz_m_per_s"])
            .with_meta("escaped", self.escaped);
        for s in &self.states {
            t.push_numbers(&[s.time, s.position.x, s.position.y, s.position.z, s.velocity.x, s.velocity.y, s.velocity.z]);
        }
        t
    }
}

/// Field-evaluation failures that mean the ion left the modelled region.
fn is_escape(e: &Error) -> bool {
    matches!(e, Error::Field(FieldError::OutsideGrid { .. } | FieldError::InsideConductor { .. }))
}

struct Force<'a, B: ?Sized> {
    basis: &'a B,
    dc: &'a DcSource<'a>,
    rf: Option<usize>,
    amplitude: f64,
    omega_us: f64,
    phase: f64,
    /// Q/m·1e-6: (V/m) → µm/µs²
    scale: f64,
    volts: Vec<f64>,
}

impl<B: ElectrodeBasis + ?Sized> Force<'_, B> {
    fn accel(&mut self, p: &Point, t: f64) -> Result<Vec3> {
        self.dc.voltages_at(t, &mut self.volts);
        if let Some(rf) = self.rf {
            self.volts[rf] = self.amplitude * (self.omega_us * t + self.phase).cos();
        }
        Ok(self.basis.field(&self.volts, p)? * self.scale)
    }
}

/// Integrates one ion from `initial`. Stops early, with `escaped` set, if the
/// field cannot be evaluated at the new position (outside the grid or inside
/// an electrode).
pub fn integrate<B: ElectrodeBasis + ?Sized>(
    basis: &B,
    drive: &DriveConfig,
    dc: &DcSource<'_>,
    species: &IonSpecies,
    initial: &IonState,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    let max_dt = drive.period() * 1e6 / 20.0;
    if !(opts.dt > 0.0) || opts.dt > max_dt * (1.0 + 1e-12) {
        return Err(DynamicsError::TimeStep { dt: opts.dt, max: max_dt }.into());
    }
    if opts.stride == 0 {
        return Err(Error::invalid("trajectory stride must be at least 1"));
    }
    if dc.len() != basis.n_electrodes() {
        basis.check_voltages(&vec![0.0; dc.len()])?;
    }
    if !initial.is_finite() {
        return Err(DynamicsError::NonFinite { time: initial.time }.into());
    }
    let mut force = Force {
        basis,
        dc,
        rf: basis.rf_index(),
        amplitude: drive.rf_amplitude,
        omega_us: drive.rf_omega * 1e-6,
        phase: opts.rf_phase,
        scale: species.charge / species.mass * 1e-6,
        volts: vec![0.0; basis.n_electrodes()],
    };
    let mut s = *initial;
    let mut states = vec![s];
    let mut a = match force.accel(&s.position, s.time) {
        Ok(a) => a,
        Err(e) if is_escape(&e) => {
            return Ok(Trajectory { states, sample_interval: opts.dt * opts.stride as f64, escaped: true, escape_point: Some(s.position) })
        }
        Err(e) => return Err(e),
    };
    let h = opts.dt;
    // Times are recomputed from the step count to avoid drift.
    let t0 = initial.time;
    for n in 1..=opts.steps {
        let v_half = s.velocity + a * (0.5 * h);
        let p = s.position + v_half * h;
        let t = t0 + n as f64 * h;
        let a_new = match force.accel(&p, t) {
            Ok(a) => a,
            Err(e) if is_escape(&e) => {
                return Ok(Trajectory { states, sample_interval: h * opts.stride as f64, escaped: true, escape_point: Some(p) })
            }
            Err(e) => return Err(e),
        };
        s = IonState { position: p, velocity: v_half + a_new * (0.5 * h), time: t };
        a = a_new;
        if !s.is_finite() {
            return Err(DynamicsError::NonFinite { time: t }.into());
        }
        if n % opts.stride == 0 {
            states.push(s);
        }
    }
    Ok(Trajectory { states, sample_interval: h * opts.stride as f64, escaped: false, escape_point: None })
}

/// Trace of the one-RF-period map of the motion along `axis` through `origin`
/// for a static DC vector, from two unit initial conditions. The motion is
/// stable while |trace| < 2.
#[allow(clippy::too_many_arguments)]
pub fn period_map_trace<B: ElectrodeBasis + ?Sized>(
    basis: &B,
    drive: &DriveConfig,
    dc: &[f64],
    species: &IonSpecies,
    origin: &Point,
    axis: &Vec3,
    samples_per_period: usize,
    amplitude: f64,
) -> Result<f64> {
    let a = axis.normalize();
    let period = drive.period() * 1e6;
    let opts = IntegrateOptions {
        steps: samples_per_period,
        stride: samples_per_period,
        ..IntegrateOptions::for_drive(drive, samples_per_period, period)
    };
    let src = DcSource::Static(dc.to_vec());
    let run = |x0: f64, v0: f64| -> Result<(f64, f64)> {
        let init = IonState { position: origin + a * x0, velocity: a * v0, time: 0.0 };
        let tr = integrate(basis, drive, &src, species, &init, &opts)?;
        if tr.escaped {
            return Err(Error::invalid("trajectory left the field domain within one period"));
        }
        let s = tr.last();
        Ok(((s.position - origin).dot(&a), s.velocity.dot(&a)))
    };
    // scaled coordinates X = x/A, V = v·T/A
    let (x1, _) = run(amplitude, 0.0)?;
    let (_, v2) = run(0.0, amplitude / period)?;
    Ok(x1 / amplitude + v2 * period / amplitude)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FnBasis;

    fn ca() -> IonSpecies {
        IonSpecies::calcium40()
    }

    /// RF amplitude giving Mathieu parameter q for the ideal quadrupole.
    fn amplitude_for_q(q: f64, r0: f64, drive_omega: f64, s: &IonSpecies) -> f64 {
        q * s.mass * (r0 * 1e-6).powi(2) * drive_omega * drive_omega / (2.0 * s.charge)
    }

    fn quad_drive(q: f64) -> DriveConfig {
        let omega = 2.0 * PI * 30e6;
        DriveConfig::new(amplitude_for_q(q, 100.0, omega, &ca()), omega).unwrap()
    }

    #[test]
    fn free_flight_is_exact() {
        let b = FnBasis::uniform(Vec3::zeros(), false);
        let drive = DriveConfig::from_mhz(0.0, 30.0).unwrap();
        let init = IonState { position: Point::new(1.0, 2.0, 3.0), velocity: Vec3::new(0.5, -1.0, 2.0), time: 0.0 };
        let opts = IntegrateOptions::for_drive(&drive, 40, 10.0);
        let tr = integrate(&b, &drive, &DcSource::Static(vec![0.0]), &ca(), &init, &opts).unwrap();
        let s = tr.last();
        let t = s.time;
        assert!((s.position - (init.position + init.velocity * t)).norm() < 1e-10);
        assert_eq!(s.velocity, init.velocity);
    }

    #[test]
    fn uniform_field_parabola_is_exact() {
        // velocity Verlet is exact for constant acceleration
        let b = FnBasis::uniform(Vec3::new(0.0, 0.0, 10.0), false);
        let drive = DriveConfig::from_mhz(0.0, 30.0).unwrap();
        let opts = IntegrateOptions::for_drive(&drive, 40, 2.0);
        let tr = integrate(&b, &drive, &DcSource::Static(vec![1.0]), &ca(), &IonState::at_rest(Point::origin()), &opts).unwrap();
        let s = tr.last();
        let acc = ca().charge / ca().mass * 10.0 * 1e-6;
        assert!((s.position.z - 0.5 * acc * s.time * s.time).abs() < 1e-12 * (1.0 + s.position.z.abs()));
    }

    #[test]
    fn rejects_coarse_steps() {
        let b = FnBasis::quadrupole(100.0);
        let drive = quad_drive(0.3);
        let mut opts = IntegrateOptions::for_drive(&drive, 10, 1.0);
        opts.steps = 5;
        let e = integrate(&b, &drive, &DcSource::Static(vec![0.0]), &ca(), &IonState::at_rest(Point::origin()), &opts).unwrap_err();
        assert!(e.is_config());
    }

    #[test]
    fn quadrupole_secular_frequency_at_q_0_3() {
        let q = 0.3;
        let b = FnBasis::quadrupole(100.0);
        let drive = quad_drive(q);
        let f_sec = q * drive.rf_omega / (2.0 * 2f64.sqrt()) / (2.0 * PI);
        let duration = 40.0 / f_sec * 1e6;
        let mut opts = IntegrateOptions::for_drive(&drive, 40, duration);
        opts.stride = 4;
        let init = IonState::at_rest(Point::new(1.0, 0.0, 0.0));
        let tr = integrate(&b, &drive, &DcSource::Static(vec![0.0]), &ca(), &init, &opts).unwrap();
        assert!(!tr.escaped);
        assert!(tr.states.iter().all(|s| s.position.x.abs() < 3.0));
        let t: Vec<f64> = tr.states.iter().map(|s| s.time).collect();
        let x: Vec<f64> = tr.states.iter().map(|s| s.position.x).collect();
        let f = dominant_frequency(&t, &x, 0.5 * f_sec * 1e-6, 1.5 * f_sec * 1e-6) * 1e6;
        assert!((f / f_sec - 1.0).abs() < 0.02, "{f} vs {f_sec}");
    }

    #[test]
    fn stability_boundary_between_0_88_and_0_93() {
        let b = FnBasis::quadrupole(100.0);
        let trace = |q: f64| {
            period_map_trace(&b, &quad_drive(q), &[0.0], &ca(), &Point::origin(), &Vec3::x(), 400, 1.0).unwrap()
        };
        let (mut lo, mut hi) = (0.5, 1.0);
        assert!(trace(lo).abs() < 2.0 && trace(hi).abs() > 2.0);
        for _ in 0..30 {
            let mid = 0.5 * (lo + hi);
            if trace(mid).abs() < 2.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((0.88..=0.93).contains(&lo), "boundary at {lo}");
    }

    #[test]
    fn unstable_q_escapes_the_grid() {
        use crate::field::{GridBasis, GridSpec};
        let q = 1.0;
        let drive = quad_drive(q);
        let g = GridBasis::sample(&FnBasis::quadrupole(100.0), &GridSpec::covering(Point::new(-20.0, -20.0, -2.0), Point::new(20.0, 20.0, 2.0), 2.0)).unwrap();
        let opts = IntegrateOptions::for_drive(&drive, 40, 200.0 * drive.period() * 1e6);
        let tr = integrate(&g, &drive, &DcSource::Static(vec![0.0]), &ca(), &IonState::at_rest(Point::new(0.5, 0.0, 0.0)), &opts).unwrap();
        assert!(tr.escaped && tr.escape_point.is_some());
    }

    #[test]
    fn second_order_convergence() {
        let b = FnBasis::quadrupole(100.0);
        let drive = quad_drive(0.3);
        let init = IonState { position: Point::new(2.0, -1.0, 0.0), velocity: Vec3::new(0.3, 0.1, 0.0), time: 0.0 };
        let t_end = 20.0 * drive.period() * 1e6;
        let run = |n: usize| {
            let opts = IntegrateOptions::for_drive(&drive, n, t_end);
            integrate(&b, &drive, &DcSource::Static(vec![0.0]), &ca(), &init, &opts).unwrap().last().position
        };
        let reference = run(40 * 8);
        let e1 = (run(40) - reference).norm();
        let e2 = (run(80) - reference).norm();
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn time_reversal_on_static_fields() {
        // a whole number of RF periods makes the drive symmetric under t -> T - t
        let b = FnBasis::quadrupole_with_endcaps(100.0, 300.0);
        let drive = quad_drive(0.3);
        let init = IonState { position: Point::new(1.0, -2.0, 3.0), velocity: Vec3::new(1.0, 0.5, -2.0), time: 0.0 };
        let opts = IntegrateOptions::for_drive(&drive, 40, 500.0 * drive.period() * 1e6);
        let dc = DcSource::Static(vec![0.0, 5.0]);
        let fwd = integrate(&b, &drive, &dc, &ca(), &init, &opts).unwrap();
        let mut back = *fwd.last();
        back.velocity = -back.velocity;
        back.time = 0.0;
        let rev = integrate(&b, &drive, &dc, &ca(), &back, &opts).unwrap();
        let end = rev.last();
        assert!((end.position - init.position).norm() < 1e-6 * init.position.coords.norm());
        assert!((end.velocity + init.velocity).norm() < 1e-6 * init.velocity.norm());
    }

    #[test]
    fn schedule_interpolates_between_steps() {
        let w = Waveform {
            electrode_names: vec!["a".into(), "b".into()],
            positions: vec![Point::origin(), Point::new(0.0, 0.0, 10.0), Point::new(0.0, 0.0, 15.0)],
            voltages: vec![vec![0.0, 1.0], vec![1.0, 1.0], vec![3.0, 0.0]],
            solve_metrics: Vec::new(),
            config_hash: String::new(),
        };
        let s = TransportSchedule::new(w.clone(), 15.0, Ramp::Linear).unwrap();
        let mut v = [0.0; 2];
        // 12.5 µm along: halfway through the short second step
        s.voltages_at(12.5, &mut v);
        assert_eq!(v, [2.0, 0.5]);
        assert_eq!(s.position_at(5.0), Point::new(0.0, 0.0, 5.0));
        s.voltages_at(20.0, &mut v);
        assert_eq!(v, [3.0, 0.0]);
        let c = TransportSchedule::new(w.clone(), 15.0, Ramp::Smooth).unwrap();
        assert!((c.position_at(7.5).z - 7.5).abs() < 1e-12);
        assert!(c.progress(0.1) < s.progress(0.1));
        let mut parked = w.clone();
        parked.positions = vec![Point::origin(); 3];
        assert_eq!(TransportSchedule::new(parked, 10.0, Ramp::Linear).unwrap().progress(5.0), 1.0);
        let mut single = w;
        single.voltages.truncate(1);
        single.positions.truncate(1);
        assert!(TransportSchedule::new(single, 1.0, Ramp::Linear).is_err());
    }

    #[test]
    fn smooth_ramp_starts_and_stops_without_acceleration() {
        let r = Ramp::Smooth;
        let h = 1e-4;
        for tau in [0.0, 1.0] {
            let acc = (r.eval(tau + h) - 2.0 * r.eval(tau) + r.eval(tau - h)) / (h * h);
            assert!(acc.abs() < 1e-3, "{acc}");
        }
        assert_eq!(r.eval(0.5), 0.5);
    }
}
