//! Transport waveforms: a path of waypoints through the trap and, for each
//! waypoint, the DC voltages that hold a harmonic well there.
//!
//! Each step solves a small box-constrained least-squares problem in the
//! electrode voltages. Symmetry pairs and shorted groups are merged into
//! shared variables before solving, so they hold exactly; voltage bounds and
//! the step-to-step slew limit are box constraints.

mod qp;
mod synth;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{IonSpecies, CODATA};
use crate::error::{Error, Result};
use crate::geometry::TrapLayout;
use crate::table::{fmt_f64, Table};
use crate::{Point, Vec3};

pub use qp::{solve_box_qp, BoxQpSolution};
pub use synth::{
    solve_waypoint, synthesize, verify, StepReport, SynthesisOptions, VerifyOptions, VerifyReport, WaypointSolution,
};

#[derive(Debug, Error)]
pub enum WaveformError {
    #[error("step {step}: residual field {residual:.3} V/m with voltages at the bounds ±{bound} V; about ±{required_bound:.3} V would be needed")]
    Infeasible { step: usize, residual: f64, required_bound: f64, bound: f64 },
    #[error("step {step}: residual field {residual:.3} V/m because the slew limit of {max_slew} V per step is active")]
    SlewLimited { step: usize, residual: f64, max_slew: f64 },
    #[error("step {step}: quadratic program did not converge")]
    NoConvergence { step: usize },
    #[error("unknown landmark '{name}' (layout has: {available})")]
    UnknownLandmark { name: String, available: String },
    #[error("invalid transport constraints: {0}")]
    InvalidConstraints(String),
    #[error("invalid waypoint target: {0}")]
    InvalidTarget(String),
    #[error("waveform has no steps")]
    EmptyWaveform,
}

impl WaveformError {
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            WaveformError::UnknownLandmark { .. }
                | WaveformError::InvalidConstraints(_)
                | WaveformError::InvalidTarget(_)
                | WaveformError::EmptyWaveform
        )
    }
}

/// Piecewise-linear path sampled at a fixed spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPath {
    pub waypoints: Vec<Point>,
    pub start: String,
    pub end: String,
    /// µm
    pub spacing: f64,
}

impl TransportPath {
    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    /// Unit direction of travel arriving at waypoint `k` (leaving, for the
    /// first one). A single-point path points along z.
    pub fn tangent(&self, k: usize) -> Vec3 {
        tangent(&self.waypoints, k)
    }

    /// Distance travelled from the start to each waypoint (µm).
    pub fn arc_lengths(&self) -> Vec<f64> {
        let mut s = vec![0.0];
        for w in self.waypoints.windows(2) {
            s.push(s.last().unwrap() + (w[1] - w[0]).norm());
        }
        s
    }
}

pub(crate) fn tangent(points: &[Point], k: usize) -> Vec3 {
    let d = match points.len() {
        0 | 1 => Vec3::z(),
        _ if k == 0 => points[1] - points[0],
        _ => points[k] - points[k - 1],
    };
    d.try_normalize(1e-12).unwrap_or_else(Vec3::z)
}

fn landmark(layout: &TrapLayout, name: &str) -> Result<Point> {
    layout.landmarks.get(name).copied().ok_or_else(|| {
        WaveformError::UnknownLandmark {
            name: name.into(),
            available: layout.landmarks.keys().cloned().collect::<Vec<_>>().join(", "),
        }
        .into()
    })
}

/// Waypoints from `start` to `end` spaced by `spacing` µm. A path between
/// two different legs of a junction goes through `junction_center`. Each
/// leg starts a fresh spacing count at its first point; the last step of a
/// leg is shorter when the leg length is not a multiple of the spacing.
pub fn discretize_path(layout: &TrapLayout, start: &str, end: &str, spacing: f64) -> Result<TransportPath> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::invalid(format!("path spacing must be positive, got {spacing}")));
    }
    let a = landmark(layout, start)?;
    let b = landmark(layout, end)?;
    let mut corners = vec![a];
    if let Some(j) = layout.landmarks.get("junction_center") {
        let (u, v) = (a - j, b - j);
        let scale = u.norm().max(v.norm()).max(1.0);
        if u.norm() > 1e-9 && v.norm() > 1e-9 && u.cross(&v).norm() > 1e-9 * scale * scale {
            corners.push(*j);
        }
    }
    corners.push(b);
    let mut waypoints = vec![a];
    for leg in corners.windows(2) {
        let d = leg[1] - leg[0];
        let len = d.norm();
        if len < 1e-9 {
            continue;
        }
        let n = (len / spacing - 1e-9).ceil().max(1.0) as usize;
        for k in 1..n {
            waypoints.push(leg[0] + d * (k as f64 * spacing / len));
        }
        waypoints.push(leg[1]);
    }
    Ok(TransportPath { waypoints, start: start.into(), end: end.into(), spacing })
}

/// Target curvature of the total potential along one direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureTarget {
    /// None means the local direction of travel.
    pub direction: Option<Vec3>,
    /// eV/µm²
    pub curvature: f64,
    pub weight: f64,
}

impl CurvatureTarget {
    /// Curvature for a secular frequency `hz` via λ = mω².
    pub fn from_frequency(direction: Option<Vec3>, hz: f64, species: &IonSpecies, weight: f64) -> Self {
        Self { direction, curvature: curvature_from_hz(hz, species), weight }
    }
}

/// mω² in eV/µm² for a frequency in Hz.
pub fn curvature_from_hz(hz: f64, species: &IonSpecies) -> f64 {
    let w = 2.0 * std::f64::consts::PI * hz;
    species.mass * w * w / CODATA.elementary_charge * 1e-12
}

/// Inverse of [`curvature_from_hz`]; negative curvatures give negative Hz.
pub fn hz_from_curvature(k: f64, species: &IonSpecies) -> f64 {
    let w = (k.abs() * CODATA.elementary_charge * 1e12 / species.mass).sqrt();
    k.signum() * w / (2.0 * std::f64::consts::PI)
}

/// What a single step should achieve. The total field at the waypoint is
/// always driven to zero; `field_weight` applies to the axial component and
/// `radial_field_weight` to the transverse ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointTarget {
    pub field_weight: f64,
    pub radial_field_weight: f64,
    pub axial: Option<CurvatureTarget>,
    #[serde(default)]
    pub radial: Vec<CurvatureTarget>,
}

/// Default weight of a relative curvature error against (V/m)² of field.
pub const DEFAULT_CURVATURE_WEIGHT: f64 = 1e6;

impl WaypointTarget {
    pub fn axial_frequency(hz: f64, species: &IonSpecies) -> Self {
        Self {
            field_weight: 1.0,
            radial_field_weight: 1.0,
            axial: Some(CurvatureTarget::from_frequency(None, hz, species, DEFAULT_CURVATURE_WEIGHT)),
            radial: Vec::new(),
        }
    }

    /// Only the zero-field condition.
    pub fn field_only() -> Self {
        Self { field_weight: 1.0, radial_field_weight: 1.0, axial: None, radial: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(WaveformError::InvalidTarget(m).into());
        let weights = [self.field_weight, self.radial_field_weight]
            .into_iter()
            .chain(self.axial.iter().chain(&self.radial).map(|c| c.weight));
        for w in weights {
            if !(w >= 0.0) || !w.is_finite() {
                return bad(format!("weights must be finite and non-negative, got {w}"));
            }
        }
        for c in self.axial.iter().chain(&self.radial) {
            if !c.curvature.is_finite() {
                return bad("curvature target is not finite".into());
            }
            if c.direction.is_some_and(|d| !(d.norm() > 0.0)) {
                return bad("curvature direction must be non-zero".into());
            }
        }
        let active = self.field_weight > 0.0
            || self.radial_field_weight > 0.0
            || self.axial.iter().chain(&self.radial).any(|c| c.weight > 0.0);
        if !active {
            return bad("no target has a positive weight".into());
        }
        Ok(())
    }
}

/// Axial frequency interpolated linearly in path length from `f_start` to
/// `f_end` (Hz).
pub fn frequency_ramp(path: &TransportPath, species: &IonSpecies, f_start: f64, f_end: f64) -> Vec<WaypointTarget> {
    let s = path.arc_lengths();
    let total = *s.last().unwrap_or(&0.0);
    s.iter()
        .map(|si| {
            let t = if total > 0.0 { si / total } else { 0.0 };
            WaypointTarget::axial_frequency(f_start + (f_end - f_start) * t, species)
        })
        .collect()
}

/// Hard and soft constraints on the electrode voltages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportConstraints {
    pub v_min: Vec<f64>,
    pub v_max: Vec<f64>,
    /// Largest change of any electrode between consecutive steps (V).
    pub max_slew: f64,
    /// Penalty on ‖V − V_prev‖², in (V/m)² per V².
    pub slew_weight: f64,
    /// Electrode pairs forced to equal voltages.
    pub symmetry_pairs: Vec<(usize, usize)>,
    /// Electrode groups wired together.
    pub shorted: Vec<Vec<usize>>,
    /// Electrodes held at 0 V (RF rail, grounds).
    pub grounded: Vec<usize>,
    /// Scale w of the penalty w·(d/d₀)²·V² on each electrode.
    pub regularization: f64,
    /// d₀ (µm)
    pub reference_distance: f64,
    /// Largest acceptable residual field at a waypoint (V/m).
    pub field_tolerance: f64,
}

impl TransportConstraints {
    /// ±`bound` on every electrode, no pairing, nothing grounded.
    pub fn new(n_electrodes: usize, bound: f64, max_slew: f64) -> Self {
        Self {
            v_min: vec![-bound; n_electrodes],
            v_max: vec![bound; n_electrodes],
            max_slew,
            slew_weight: 1e-3,
            symmetry_pairs: Vec::new(),
            shorted: Vec::new(),
            grounded: Vec::new(),
            regularization: 1e-2,
            reference_distance: 500.0,
            field_tolerance: 1.0,
        }
    }

    /// Constraints for a layout: non-DC electrodes grounded and DC electrodes
    /// on either side of the axis of the first leg of `path` paired by a
    /// half-turn about that axis. Paths that turn a corner get no pairs.
    pub fn for_layout(layout: &TrapLayout, path: &TransportPath, bound: f64, max_slew: f64) -> Self {
        let mut c = Self::new(layout.electrodes.len(), bound, max_slew);
        c.grounded = layout.electrodes.iter().enumerate().filter(|(_, e)| !e.role.is_dc()).map(|(i, _)| i).collect();
        let p = &path.waypoints;
        let dir = tangent(p, 0);
        let straight = p.iter().all(|q| (q - p[0]).cross(&dir).norm() < 1e-6);
        if straight {
            c.symmetry_pairs = half_turn_pairs(layout, &p[0], &dir);
        }
        c
    }

    pub fn n_electrodes(&self) -> usize {
        self.v_min.len()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |m: String| Err(WaveformError::InvalidConstraints(m).into());
        if self.v_min.len() != n || self.v_max.len() != n {
            return bad(format!("bounds have {} / {} entries for {n} electrodes", self.v_min.len(), self.v_max.len()));
        }
        for i in 0..n {
            if !(self.v_min[i] < self.v_max[i]) {
                return bad(format!("electrode {i}: V_min {} is not below V_max {}", self.v_min[i], self.v_max[i]));
            }
        }
        if !(self.max_slew > 0.0) {
            return bad(format!("slew bound must be positive, got {}", self.max_slew));
        }
        if !(self.field_tolerance >= 0.0) {
            return bad(format!("field tolerance must be non-negative, got {}", self.field_tolerance));
        }
        for (name, v) in [("slew weight", self.slew_weight), ("regularization", self.regularization)] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if !(self.reference_distance > 0.0) {
            return bad("reference distance must be positive".into());
        }
        let mut partner: BTreeMap<usize, usize> = BTreeMap::new();
        for &(a, b) in &self.symmetry_pairs {
            if a >= n || b >= n {
                return bad(format!("symmetry pair ({a}, {b}) is out of range"));
            }
            for (x, y) in [(a, b), (b, a)] {
                if let Some(&old) = partner.get(&x) {
                    if old != y {
                        return bad(format!("electrode {x} is paired with both {old} and {y}"));
                    }
                }
                partner.insert(x, y);
            }
        }
        for g in &self.shorted {
            if let Some(i) = g.iter().find(|&&i| i >= n) {
                return bad(format!("shorted group refers to electrode {i}"));
            }
        }
        if let Some(i) = self.grounded.iter().find(|&&i| i >= n) {
            return bad(format!("grounded electrode {i} is out of range"));
        }
        Ok(())
    }

    /// Penalty weight of each electrode for a well at `p`.
    pub fn regularization_weights(&self, distance: impl Fn(usize) -> f64) -> Vec<f64> {
        (0..self.n_electrodes())
            .map(|i| {
                let d = distance(i);
                let r = if d.is_finite() { d / self.reference_distance } else { 1.0 };
                self.regularization * r * r
            })
            .collect()
    }
}

/// Pairs of DC electrodes exchanged by a half-turn about the line through
/// `origin` along `axis`.
pub fn half_turn_pairs(layout: &TrapLayout, origin: &Point, axis: &Vec3) -> Vec<(usize, usize)> {
    let a = axis.normalize();
    let map = |q: &Point| {
        let r = q - origin;
        let along = a * a.dot(&r);
        origin + along - (r - along)
    };
    layout
        .symmetry_pairs(map, 1e-3)
        .into_iter()
        .filter(|(i, j)| i < j && layout.electrodes[*i].role.is_dc())
        .collect()
}

/// Electrodes sharing a voltage, after merging pairs and shorted groups.
/// Variables containing a grounded electrode are pinned to zero.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Reduction {
    /// Variable of each electrode.
    pub var_of: Vec<usize>,
    pub members: Vec<Vec<usize>>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Reduction {
    pub fn new(c: &TransportConstraints) -> Result<Self> {
        let n = c.n_electrodes();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], i: usize) -> usize {
            let mut r = i;
            while parent[r] != r {
                r = parent[r];
            }
            let mut k = i;
            while parent[k] != r {
                let next = parent[k];
                parent[k] = r;
                k = next;
            }
            r
        }
        let mut union = |a: usize, b: usize| {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        };
        for &(a, b) in &c.symmetry_pairs {
            union(a, b);
        }
        for g in &c.shorted {
            for w in g.windows(2) {
                union(w[0], w[1]);
            }
        }
        let mut var_of = vec![usize::MAX; n];
        let mut members: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            let r = find(&mut parent, i);
            if var_of[r] == usize::MAX {
                var_of[r] = members.len();
                members.push(Vec::new());
            }
            var_of[i] = var_of[r];
            members[var_of[i]].push(i);
        }
        let mut lo = Vec::with_capacity(members.len());
        let mut hi = Vec::with_capacity(members.len());
        for m in &members {
            let mut l = m.iter().map(|&i| c.v_min[i]).fold(f64::NEG_INFINITY, f64::max);
            let mut h = m.iter().map(|&i| c.v_max[i]).fold(f64::INFINITY, f64::min);
            if m.iter().any(|i| c.grounded.contains(i)) {
                if l > 0.0 || h < 0.0 {
                    return Err(WaveformError::InvalidConstraints(format!(
                        "electrodes {m:?} are grounded but their bounds exclude 0 V"
                    ))
                    .into());
                }
                l = 0.0;
                h = 0.0;
            }
            if l > h {
                return Err(WaveformError::InvalidConstraints(format!(
                    "tied electrodes {m:?} have no common voltage range"
                ))
                .into());
            }
            lo.push(l);
            hi.push(h);
        }
        Ok(Self { var_of, members, lo, hi })
    }

    pub fn n_vars(&self) -> usize {
        self.members.len()
    }

    pub fn expand(&self, u: &[f64]) -> Vec<f64> {
        self.var_of.iter().map(|&k| u[k]).collect()
    }

    /// Variable values of a full voltage vector (taken from the first member).
    pub fn reduce(&self, v: &[f64]) -> Vec<f64> {
        self.members.iter().map(|m| v[m[0]]).collect()
    }
}

/// Voltages for every step of a transport, with the waypoint of each step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub electrode_names: Vec<String>,
    pub positions: Vec<Point>,
    /// steps × electrodes (V)
    pub voltages: Vec<Vec<f64>>,
    /// Residual field (V/m) and achieved axial frequency (Hz) from the
    /// local expansion used in the solve; empty for waveforms read from file.
    #[serde(default)]
    pub solve_metrics: Vec<WaypointSolution>,
    #[serde(default)]
    pub config_hash: String,
}

impl Waveform {
    pub fn len(&self) -> usize {
        self.voltages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voltages.is_empty()
    }

    pub fn tangent(&self, k: usize) -> Vec3 {
        tangent(&self.positions, k)
    }

    pub fn max_abs_voltage(&self) -> f64 {
        self.voltages.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest change of any electrode between consecutive steps (V).
    pub fn max_slew(&self) -> f64 {
        self.voltages
            .windows(2)
            .flat_map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }

    /// Checks bounds, exact equalities and the slew limit; returns the list
    /// of violations.
    pub fn check_constraints(&self, c: &TransportConstraints) -> Vec<String> {
        let mut out = Vec::new();
        for (k, v) in self.voltages.iter().enumerate() {
            for i in 0..v.len() {
                if v[i] < c.v_min[i] || v[i] > c.v_max[i] {
                    out.push(format!("step {k}: electrode {i} at {} V is outside its bounds", v[i]));
                }
            }
            for &(a, b) in &c.symmetry_pairs {
                if v[a] != v[b] {
                    out.push(format!("step {k}: pair ({a}, {b}) differs"));
                }
            }
            for g in &c.shorted {
                if g.iter().any(|&i| v[i] != v[g[0]]) {
                    out.push(format!("step {k}: shorted group {g:?} differs"));
                }
            }
            for &i in &c.grounded {
                if v[i] != 0.0 {
                    out.push(format!("step {k}: grounded electrode {i} at {} V", v[i]));
                }
            }
        }
        for (k, w) in self.voltages.windows(2).enumerate() {
            for i in 0..w[0].len() {
                if (w[1][i] - w[0][i]).abs() > c.max_slew {
                    out.push(format!("steps {k}->{}: electrode {i} changes by {} V", k + 1, w[1][i] - w[0][i]));
                }
            }
        }
        out
    }

    pub fn to_table(&self) -> Table {
        let mut cols: Vec<String> = ["step", "waypoint_x", "waypoint_y", "waypoint_z"].map(String::from).to_vec();
        cols.extend(self.electrode_names.iter().cloned());
        let mut t = Table::new(cols).with_meta("units", "um, V").with_meta("config_hash", &self.config_hash);
        for (k, (p, v)) in self.positions.iter().zip(&self.voltages).enumerate() {
            let mut row = vec![k.to_string(), fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.z)];
            row.extend(v.iter().map(|x| fmt_f64(*x)));
            t.push_cells(row);
        }
        t
    }

    pub fn from_table(t: &Table) -> std::result::Result<Self, String> {
        let fixed = ["step", "waypoint_x", "waypoint_y", "waypoint_z"];
        if t.columns.len() < 5 || t.columns[..4] != fixed {
            return Err(format!("expected columns {} followed by electrode names", fixed.join(",")));
        }
        let mut positions = Vec::new();
        let mut voltages = Vec::new();
        for (k, row) in t.rows.iter().enumerate() {
            let nums: std::result::Result<Vec<f64>, _> = row.iter().map(|c| c.parse::<f64>()).collect();
            let nums = nums.map_err(|e| format!("row {k}: {e}"))?;
            if nums.len() != t.columns.len() {
                return Err(format!("row {k} has {} cells, expected {}", nums.len(), t.columns.len()));
            }
            if nums[0] != k as f64 {
                return Err(format!("row {k} has step index {}", nums[0]));
            }
            positions.push(Point::new(nums[1], nums[2], nums[3]));
            voltages.push(nums[4..].to_vec());
        }
        if voltages.is_empty() {
            return Err("waveform has no steps".into());
        }
        Ok(Self {
            electrode_names: t.columns[4..].to_vec(),
            positions,
            voltages,
            solve_metrics: Vec::new(),
            config_hash: t.meta("config_hash").unwrap_or_default().to_string(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.to_table().write(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let t = Table::read(path)?;
        Self::from_table(&t).map_err(|m| Error::format(path, m))
    }

}
