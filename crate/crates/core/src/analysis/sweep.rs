use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{axial_profile, axial_taylor, barrier_metrics, AnalysisError, Potential, ProfileAxis, TaylorOptions, DEFAULT_STEP};
use crate::constants::DriveConfig;
use crate::error::{Error, Result};
use crate::field::{BasisCache, ElectrodeBasis, FieldBasis};
use crate::geometry::{Perturbation, Recipe, TrapLayout};
use crate::table::{fmt_f64, Table};
use crate::{Point, Vec3};

pub use crate::scenario::Scenario;

/// Geometry or drive parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    BridgeGap,
    DcGapWidth,
    RfGapDepth,
    IndentationDepth,
    CurvedEdgeDepth,
    LinearShift,
    Tilt,
    SegmentWidth,
    JunctionDcWidth,
    RfAmplitude,
}

impl SweepParameter {
    pub const ALL: [SweepParameter; 10] = [
        SweepParameter::BridgeGap,
        SweepParameter::DcGapWidth,
        SweepParameter::RfGapDepth,
        SweepParameter::IndentationDepth,
        SweepParameter::CurvedEdgeDepth,
        SweepParameter::LinearShift,
        SweepParameter::Tilt,
        SweepParameter::SegmentWidth,
        SweepParameter::JunctionDcWidth,
        SweepParameter::RfAmplitude,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::BridgeGap => "bridge-gap",
            SweepParameter::DcGapWidth => "dc-gap-width",
            SweepParameter::RfGapDepth => "rf-gap-depth",
            SweepParameter::IndentationDepth => "indentation-depth",
            SweepParameter::CurvedEdgeDepth => "curved-edge-depth",
            SweepParameter::LinearShift => "linear-shift",
            SweepParameter::Tilt => "tilt",
            SweepParameter::SegmentWidth => "segment-width",
            SweepParameter::JunctionDcWidth => "junction-dc-width",
            SweepParameter::RfAmplitude => "rf-amplitude",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            SweepParameter::Tilt => "deg",
            SweepParameter::RfAmplitude => "V",
            _ => "um",
        }
    }

    /// The scenario with this parameter set to `value`.
    pub fn apply(self, base: &Scenario, value: f64) -> Result<Scenario> {
        let mut s = base.clone();
        let wrong = || Error::invalid(format!("parameter '{}' does not apply to scenario '{}'", self.name(), base.name));
        match (self, &mut s.recipe) {
            (SweepParameter::BridgeGap, Recipe::XJunction(p)) => p.bridge_gap = value,
            (SweepParameter::JunctionDcWidth, Recipe::XJunction(p)) => p.junction_dc_width = value,
            (SweepParameter::DcGapWidth, Recipe::LinearTrap(p)) => p.gap_width = value,
            (SweepParameter::DcGapWidth, Recipe::XJunction(p)) => p.gap_width = value,
            (SweepParameter::SegmentWidth, Recipe::LinearTrap(p)) => p.segment_width = value,
            (SweepParameter::RfGapDepth, Recipe::LinearTrap(_)) => s.perturbations.push(Perturbation::RfMirroredGap { d: value }),
            (SweepParameter::IndentationDepth, Recipe::LinearTrap(_)) => {
                s.perturbations.push(Perturbation::Indentation { w: 60.0, d: value })
            }
            (SweepParameter::CurvedEdgeDepth, Recipe::LinearTrap(_)) => {
                s.perturbations.push(Perturbation::CurvedEdge { depth: value })
            }
            (SweepParameter::LinearShift, _) => s.perturbations.push(Perturbation::LinearShift { l: value }),
            (SweepParameter::Tilt, _) => s.perturbations.push(Perturbation::Tilt { theta_deg: value }),
            (SweepParameter::RfAmplitude, _) => s.drive = DriveConfig::new(value, s.drive.rf_omega)?,
            _ => return Err(wrong()),
        }
        Ok(s)
    }
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepParameter::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown sweep parameter '{s}'")))
    }
}

/// Quantity recorded per sweep row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMetric {
    /// Pseudopotential barrier along z through the junction (eV).
    BarrierHeight,
    /// Axial (z) pseudopotential frequency at the junction centre, DC grounded (Hz).
    CenterAxialFrequency,
    /// Peak |E_z| of the RF field within one segment pitch of the trap centre (V/m).
    PeakAxialField,
    /// Peak |E_z - E_z(unperturbed)| over the same window (V/m).
    PeakAxialFieldChange,
    /// Mean radial pseudopotential frequency at the trap centre (Hz).
    RadialFrequency,
    /// Quartic Taylor coefficient of the central segment pair at 1 V (V/µm⁴).
    QuarticCoefficient,
}

impl SweepMetric {
    pub const ALL: [SweepMetric; 6] = [
        SweepMetric::BarrierHeight,
        SweepMetric::CenterAxialFrequency,
        SweepMetric::PeakAxialField,
        SweepMetric::PeakAxialFieldChange,
        SweepMetric::RadialFrequency,
        SweepMetric::QuarticCoefficient,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepMetric::BarrierHeight => "barrier-height",
            SweepMetric::CenterAxialFrequency => "center-axial-frequency",
            SweepMetric::PeakAxialField => "peak-axial-field",
            SweepMetric::PeakAxialFieldChange => "peak-axial-field-change",
            SweepMetric::RadialFrequency => "radial-frequency",
            SweepMetric::QuarticCoefficient => "quartic-coefficient",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            SweepMetric::BarrierHeight => "eV",
            SweepMetric::CenterAxialFrequency | SweepMetric::RadialFrequency => "Hz",
            SweepMetric::PeakAxialField | SweepMetric::PeakAxialFieldChange => "V/m",
            SweepMetric::QuarticCoefficient => "V/um^4",
        }
    }

    pub fn column(self) -> String {
        format!("{}_{}", self.name().replace('-', "_"), self.unit().replace('/', "_per_").replace('^', ""))
    }

    fn evaluate(self, ctx: &MetricContext) -> Result<f64> {
        let s = ctx.scenario;
        let b = ctx.basis.as_ref();
        match self {
            SweepMetric::BarrierHeight => {
                let c = s.landmark(ctx.layout, "junction_center")?;
                let ze = (s.landmark(ctx.layout, "experimental_zone")? - c).norm();
                let p = axial_profile(b, None, &s.drive, &s.species, ProfileAxis::Z, c, (-ze, ze), 2.0)?;
                Ok(barrier_metrics(&p)?.height)
            }
            SweepMetric::CenterAxialFrequency => {
                let c = s.landmark(ctx.layout, "junction_center")?;
                let modes = Potential::pseudo_only(b, &s.drive, &s.species).modes(&c, DEFAULT_STEP)?;
                let k = modes.mode_along(&Vec3::z());
                Ok(modes.signed_omega(k) / (2.0 * std::f64::consts::PI))
            }
            SweepMetric::PeakAxialField => {
                let (c, half) = field_window(s, ctx.layout)?;
                let e = axial_field_samples(b, &s.drive, c, half)?;
                Ok(e.iter().fold(0.0, |m, v| m.max(v.abs())))
            }
            SweepMetric::PeakAxialFieldChange => {
                let base = ctx
                    .baseline
                    .as_ref()
                    .ok_or_else(|| Error::invalid("peak-axial-field-change needs a baseline solve"))?;
                let (c, half) = field_window(s, ctx.layout)?;
                let e = axial_field_samples(b, &s.drive, c, half)?;
                let e0 = axial_field_samples(base.as_ref(), &s.drive, c, half)?;
                Ok(e.iter().zip(&e0).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
            }
            SweepMetric::RadialFrequency => {
                let c = s.landmark(ctx.layout, "trap_center")?;
                let modes = Potential::pseudo_only(b, &s.drive, &s.species).modes(&c, DEFAULT_STEP)?;
                let k = modes.mode_along(&Vec3::z());
                let radial: Vec<f64> = (0..3).filter(|i| *i != k).map(|i| modes.signed_omega(i)).collect();
                Ok(radial.iter().sum::<f64>() / radial.len() as f64 / (2.0 * std::f64::consts::PI))
            }
            SweepMetric::QuarticCoefficient => {
                let p = s.linear_params().ok_or_else(|| Error::invalid("quartic-coefficient needs a linear trap"))?;
                let mid = p.n_segments / 2 + 1;
                let mut v = vec![0.0; b.n_electrodes()];
                for name in [format!("dc_t{mid}"), format!("dc_b{mid}")] {
                    v[b.electrode_index(&name)?] = 1.0;
                }
                let c = s.landmark(ctx.layout, "trap_center")?;
                let opts = TaylorOptions { step: 0.1 * p.segment_width, ..Default::default() };
                Ok(axial_taylor(b, &v, &c, 4, &opts)?.coefficients[4])
            }
        }
    }
}

impl std::str::FromStr for SweepMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepMetric::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| Error::invalid(format!("unknown metric '{s}'")))
    }
}

struct MetricContext<'a> {
    scenario: &'a Scenario,
    layout: &'a TrapLayout,
    basis: Arc<FieldBasis>,
    baseline: Option<Arc<FieldBasis>>,
}

/// Centre and half width of the window used for axial-field metrics: one
/// segment pitch around the trap centre, or one finger pitch around the
/// experimental zone of a junction.
fn field_window(s: &Scenario, layout: &TrapLayout) -> Result<(Point, f64)> {
    match &s.recipe {
        Recipe::LinearTrap(p) => Ok((s.landmark(layout, "trap_center")?, p.pitch())),
        Recipe::XJunction(p) => {
            let w = p.arm_dc_widths.get(p.experimental_finger).copied().unwrap_or(160.0);
            Ok((s.landmark(layout, "experimental_zone")?, w + p.gap_width))
        }
    }
}

fn axial_field_samples<B: ElectrodeBasis + ?Sized>(basis: &B, drive: &DriveConfig, c: Point, half: f64) -> Result<Vec<f64>> {
    let rf = basis.rf_index().ok_or_else(|| Error::invalid("basis has no RF electrode"))?;
    let n = 200;
    (0..=n)
        .map(|k| {
            let z = -half + 2.0 * half * k as f64 / n as f64;
            Ok(basis.eval_all(&(c + Vec3::z() * z))?[rf].1.z * drive.rf_amplitude)
        })
        .collect()
}

/// Peak |E_z| of the RF field (V/m at the drive amplitude) on z ∈ [-half, half]
/// around `center`, sampled at 201 points.
pub fn peak_axial_field<B: ElectrodeBasis + ?Sized>(basis: &B, drive: &DriveConfig, center: Point, half: f64) -> Result<f64> {
    Ok(axial_field_samples(basis, drive, center, half)?.iter().fold(0.0, |m, v| m.max(v.abs())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub scenario: Scenario,
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub metrics: Vec<SweepMetric>,
    /// Worker threads; rows are independent and written in input order.
    #[serde(default = "one")]
    pub jobs: usize,
}

fn one() -> usize {
    1
}

impl SweepSpec {
    /// Values `start, start + step, ...` up to and including `end`.
    pub fn range(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
        if !(step > 0.0) || end < start || !start.is_finite() || !end.is_finite() {
            return Err(AnalysisError::InvalidSweep(format!("bad range {start}:{end}:{step}")).into());
        }
        let n = ((end - start) / step + 1e-9).floor() as usize;
        Ok((0..=n).map(|k| start + k as f64 * step).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    /// NaN where the row failed.
    pub metrics: Vec<f64>,
    pub basis_hash: String,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub parameter: SweepParameter,
    pub metrics: Vec<SweepMetric>,
    pub rows: Vec<SweepRow>,
    pub config_hash: String,
    pub solver_hash: String,
}

impl SweepTable {
    pub fn column(&self, m: SweepMetric) -> Option<Vec<f64>> {
        let i = self.metrics.iter().position(|x| *x == m)?;
        Some(self.rows.iter().map(|r| r.metrics[i]).collect())
    }

    pub fn to_table(&self) -> Table {
        let mut cols = vec![format!("{}_{}", self.parameter.name().replace('-', "_"), self.parameter.unit())];
        cols.extend(self.metrics.iter().map(|m| m.column()));
        cols.push("basis_hash".into());
        cols.push("error".into());
        let mut t = Table::new(cols)
            .with_meta("parameter", self.parameter.name())
            .with_meta("parameter_unit", self.parameter.unit())
            .with_meta(
                "metric_units",
                self.metrics.iter().map(|m| format!("{}:{}", m.name(), m.unit())).collect::<Vec<_>>().join(" "),
            )
            .with_meta("config_hash", &self.config_hash)
            .with_meta("solver_config_hash", &self.solver_hash);
        for r in &self.rows {
            let mut cells = vec![fmt_f64(r.value)];
            cells.extend(r.metrics.iter().map(|v| fmt_f64(*v)));
            cells.push(r.basis_hash.clone());
            cells.push(r.error.as_deref().unwrap_or("").replace([',', '\n'], ";"));
            t.push_cells(cells);
        }
        t
    }
}

/// Re-builds, re-solves and re-analyzes the scenario for every value. Failed
/// rows keep NaN metrics and their error message; the sweep continues.
pub fn sweep(spec: &SweepSpec, cache: &BasisCache) -> Result<SweepTable> {
    if spec.values.is_empty() || spec.metrics.is_empty() {
        return Err(AnalysisError::InvalidSweep("sweep needs at least one value and one metric".into()).into());
    }
    let baseline = if spec.metrics.contains(&SweepMetric::PeakAxialFieldChange) {
        Some(spec.scenario.solve(cache)?.1)
    } else {
        None
    };
    let row = |value: f64| -> SweepRow {
        let attempt = || -> Result<(Vec<f64>, String)> {
            let s = spec.parameter.apply(&spec.scenario, value)?;
            let (layout, basis) = s.solve(cache)?;
            let ctx = MetricContext { scenario: &s, layout: &layout, basis: basis.clone(), baseline: baseline.clone() };
            let mut out = Vec::with_capacity(spec.metrics.len());
            for m in &spec.metrics {
                out.push(m.evaluate(&ctx)?);
            }
            Ok((out, basis.content_hash()[..16].to_string()))
        };
        match attempt() {
            Ok((metrics, basis_hash)) => SweepRow { value, metrics, basis_hash, error: None },
            Err(e) => {
                log::warn!("sweep row {} = {value} failed: {e}", spec.parameter.name());
                SweepRow { value, metrics: vec![f64::NAN; spec.metrics.len()], basis_hash: String::new(), error: Some(e.to_string()) }
            }
        }
    };
    let jobs = spec.jobs.max(1).min(spec.values.len());
    let rows = if jobs == 1 {
        spec.values.iter().map(|v| row(*v)).collect()
    } else {
        let mut slots: Vec<Option<SweepRow>> = vec![None; spec.values.len()];
        let next = std::sync::atomic::AtomicUsize::new(0);
        let out = std::sync::Mutex::new(&mut slots);
        std::thread::scope(|sc| {
            for _ in 0..jobs {
                sc.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if i >= spec.values.len() {
                        break;
                    }
                    let r = row(spec.values[i]);
                    out.lock().unwrap()[i] = Some(r);
                });
            }
        });
        slots.into_iter().map(|r| r.expect("every row computed")).collect()
    };
    let mut h = crate::hashing::ContentHasher::new();
    h.json(spec);
    let mut sh = crate::hashing::ContentHasher::new();
    spec.scenario.solver.hash_into(&mut sh);
    Ok(SweepTable {
        parameter: spec.parameter,
        metrics: spec.metrics.clone(),
        rows,
        config_hash: h.finish_short(),
        solver_hash: sh.finish_short(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Preset;

    #[test]
    fn names_parse_back() {
        for p in SweepParameter::ALL {
            assert_eq!(p.name().parse::<SweepParameter>().unwrap(), p);
        }
        for m in SweepMetric::ALL {
            assert_eq!(m.name().parse::<SweepMetric>().unwrap(), m);
        }
    }

    #[test]
    fn parameters_bind_to_matching_recipes() {
        let lin = Preset::Appendix7Seg.scenario();
        let jun = Preset::JunctionFinal.scenario();
        assert!(SweepParameter::BridgeGap.apply(&lin, 200.0).is_err());
        assert!(SweepParameter::RfGapDepth.apply(&jun, 200.0).is_err());
        let s = SweepParameter::BridgeGap.apply(&jun, 300.0).unwrap();
        assert_eq!(s.junction_params().unwrap().bridge_gap, 300.0);
        let s = SweepParameter::Tilt.apply(&lin, 0.0).unwrap();
        assert_eq!(s.layout().unwrap(), lin.layout().unwrap());
    }

    #[test]
    fn range_includes_end() {
        assert_eq!(SweepSpec::range(150.0, 400.0, 25.0).unwrap().len(), 11);
        assert!(SweepSpec::range(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn failed_rows_do_not_stop_the_sweep() {
        let mut sc = Preset::Appendix7Seg.scenario();
        sc.mesh = crate::geometry::MeshConfig::uniform(400.0);
        if let Recipe::LinearTrap(p) = &mut sc.recipe {
            p.n_segments = 3;
            p.outer_elongation = 100.0;
        }
        let spec = SweepSpec {
            scenario: sc,
            parameter: SweepParameter::DcGapWidth,
            values: vec![500.0, 20.0],
            metrics: vec![SweepMetric::RadialFrequency],
            jobs: 2,
        };
        let t = sweep(&spec, &BasisCache::in_memory()).unwrap();
        assert!(t.rows[0].error.is_some() && t.rows[0].metrics[0].is_nan());
        assert!(t.rows[1].error.is_none() && t.rows[1].metrics[0] > 0.0);
        let csv = t.to_table().to_csv_string();
        assert!(csv.contains("# solver_config_hash="));
    }
}
