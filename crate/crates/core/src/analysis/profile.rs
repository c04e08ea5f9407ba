use serde::{Deserialize, Serialize};

use super::{rf_field, pseudo_from_field, AnalysisError};
use crate::constants::{DriveConfig, IonSpecies, CODATA};
use crate::error::Result;
use crate::field::ElectrodeBasis;
use crate::table::Table;
use crate::{Point, Vec3};

/// Line along which a profile is sampled, through a given origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileAxis {
    Z,
    XLeg,
}

impl ProfileAxis {
    pub fn direction(self) -> Vec3 {
        match self {
            ProfileAxis::Z => Vec3::z(),
            ProfileAxis::XLeg => Vec3::x(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ProfileAxis::Z => "z",
            ProfileAxis::XLeg => "x-leg",
        }
    }
}

impl std::str::FromStr for ProfileAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "z" => Ok(ProfileAxis::Z),
            "x" | "x-leg" => Ok(ProfileAxis::XLeg),
            _ => Err(format!("unknown axis '{s}' (expected z or x-leg)")),
        }
    }
}

/// Samples along an axis. `e_axial` is the signed RF field component along
/// the axis at the configured drive amplitude (V/m).
#[derive(Debug, Clone, PartialEq)]
pub struct AxialProfile {
    pub axis: ProfileAxis,
    pub origin: Point,
    pub positions: Vec<f64>,
    pub pseudo: Vec<f64>,
    pub e_axial: Vec<f64>,
    pub dc: Option<Vec<f64>>,
}

impl AxialProfile {
    /// Builds a profile from raw samples, checking its invariants.
    pub fn new(axis: ProfileAxis, origin: Point, positions: Vec<f64>, pseudo: Vec<f64>, e_axial: Vec<f64>) -> Result<Self> {
        let p = Self { axis, origin, positions, pseudo, e_axial, dc: None };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.positions.len();
        if n == 0 || self.pseudo.len() != n || self.e_axial.len() != n || self.dc.as_ref().is_some_and(|d| d.len() != n) {
            return Err(AnalysisError::InvalidProfile("column lengths differ or profile is empty".into()).into());
        }
        let up = self.positions.windows(2).all(|w| w[1] > w[0]);
        let down = self.positions.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(AnalysisError::InvalidProfile("positions are not strictly monotone".into()).into());
        }
        if self.pseudo.iter().any(|v| !(*v >= 0.0)) {
            return Err(AnalysisError::InvalidProfile("negative or NaN pseudopotential".into()).into());
        }
        Ok(())
    }

    pub fn point(&self, s: f64) -> Point {
        self.origin + self.axis.direction() * s
    }

    pub fn to_table(&self) -> Table {
        let mut cols = vec!["position_um", "pseudopotential_eV", "e_axial_rf_V_per_m"];
        if self.dc.is_some() {
            cols.push("dc_potential_eV");
        }
        let mut t = Table::new(cols)
            .with_meta("axis", self.axis.name())
            .with_meta("origin_um", format!("{} {} {}", self.origin.x, self.origin.y, self.origin.z));
        for i in 0..self.positions.len() {
            let mut row = vec![self.positions[i], self.pseudo[i], self.e_axial[i]];
            if let Some(d) = &self.dc {
                row.push(d[i]);
            }
            t.push_numbers(&row);
        }
        t
    }
}

/// Samples Φ_ps, the axial RF field and (if `dc` is given) Q·φ_DC from
/// `range.0` to `range.1` in steps of `step` µm along `axis` through `origin`.
#[allow(clippy::too_many_arguments)]
pub fn axial_profile<B: ElectrodeBasis + ?Sized>(
    basis: &B,
    dc: Option<&[f64]>,
    drive: &DriveConfig,
    species: &IonSpecies,
    axis: ProfileAxis,
    origin: Point,
    range: (f64, f64),
    step: f64,
) -> Result<AxialProfile> {
    if !(step > 0.0) || !range.0.is_finite() || !range.1.is_finite() || range.1 <= range.0 {
        return Err(AnalysisError::InvalidProfile(format!("bad range {:?} / step {step}", range)).into());
    }
    if let Some(v) = dc {
        basis.check_voltages(v)?;
    }
    let n = ((range.1 - range.0) / step + 1e-9).floor() as usize + 1;
    let dir = axis.direction();
    let mut positions = Vec::with_capacity(n);
    let mut pseudo = Vec::with_capacity(n);
    let mut e_axial = Vec::with_capacity(n);
    let mut dcs = Vec::with_capacity(n);
    let rf = basis.rf_index();
    for k in 0..n {
        let s = range.0 + k as f64 * step;
        let all = basis.eval_all(&(origin + dir * s))?;
        let e = rf_field(basis, drive, &all);
        positions.push(s);
        pseudo.push(pseudo_from_field(&e, drive, species));
        e_axial.push(e.dot(&dir));
        if let Some(v) = dc {
            let phi: f64 = v.iter().enumerate().filter(|(i, _)| Some(*i) != rf).map(|(i, v)| v * all[i].0).sum();
            dcs.push(species.charge / CODATA.elementary_charge * phi);
        }
    }
    let mut p = AxialProfile::new(axis, origin, positions, pseudo, e_axial)?;
    p.dc = dc.map(|_| dcs);
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarrierMetrics {
    /// Highest peak minus the reference minimum (eV).
    pub height: f64,
    /// Largest |dΦ_ps/ds| along the profile (eV/µm).
    pub max_gradient: f64,
    /// Positions of the two highest interior maxima (one if there is only one).
    pub peaks: Vec<f64>,
    pub minimum_position: f64,
}

/// Barrier height of a pseudopotential profile. With two or more interior
/// maxima the reference is the lowest point between the two highest ones (the
/// junction centre); with a single maximum it is the profile minimum.
pub fn barrier_metrics(profile: &AxialProfile) -> Result<BarrierMetrics> {
    profile.validate()?;
    let v = &profile.pseudo;
    let s = &profile.positions;
    let scale = v.iter().cloned().fold(0.0, f64::max);
    let mut maxima: Vec<usize> = Vec::new();
    let mut i = 1;
    while i + 1 < v.len() {
        // plateaus count once, at their first sample
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        if j + 1 < v.len() && v[i] > v[i - 1] && v[i] > v[j + 1] && v[i] - v[i - 1].min(v[j + 1]) > 1e-12 * scale {
            maxima.push(i);
        }
        i = j + 1;
    }
    if maxima.is_empty() {
        return Err(AnalysisError::NoBarrier.into());
    }
    maxima.sort_by(|a, b| v[*b].total_cmp(&v[*a]));
    maxima.truncate(2);
    maxima.sort();
    let (lo, hi) = if maxima.len() == 2 { (maxima[0], maxima[1]) } else { (0, v.len() - 1) };
    let imin = (lo..=hi).min_by(|a, b| v[*a].total_cmp(&v[*b])).unwrap();
    let top = maxima.iter().map(|&i| v[i]).fold(f64::NEG_INFINITY, f64::max);
    let max_gradient = s
        .windows(2)
        .zip(v.windows(2))
        .map(|(x, y)| ((y[1] - y[0]) / (x[1] - x[0])).abs())
        .fold(0.0, f64::max);
    Ok(BarrierMetrics {
        height: top - v[imin],
        max_gradient,
        peaks: maxima.iter().map(|&i| s[i]).collect(),
        minimum_position: s[imin],
    })
}
