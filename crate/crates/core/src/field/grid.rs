use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BasisValue, ElectrodeBasis, FieldError};
use crate::error::{Error, Result};
use crate::hashing::ContentHasher;
use crate::table::Table;
use crate::{Point, Vec3};

const MAGIC: &[u8; 4] = b"PTFG";
const VERSION: u32 = 1;

/// Regular sampling grid, x index fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Point,
    /// Spacing per axis (µm).
    pub spacing: Vec3,
    pub dims: [usize; 3],
}

impl GridSpec {
    /// Grid spanning the box `[lo, hi]` with roughly `step` spacing.
    pub fn covering(lo: Point, hi: Point, step: f64) -> Self {
        let mut dims = [1usize; 3];
        let mut spacing = Vec3::repeat(step);
        for k in 0..3 {
            let len = hi[k] - lo[k];
            if len > 0.0 {
                dims[k] = (len / step).ceil() as usize + 1;
                spacing[k] = len / (dims[k] - 1) as f64;
            }
        }
        Self { origin: lo, spacing, dims }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        if self.is_empty() {
            return Err(FieldError::BadGrid("grid has no points".into()));
        }
        for k in 0..3 {
            if !(self.spacing[k].is_finite() && self.spacing[k] > 0.0) && self.dims[k] > 1 {
                return Err(FieldError::BadGrid(format!("spacing along axis {k} must be positive")));
            }
            if !self.origin[k].is_finite() {
                return Err(FieldError::BadGrid("origin must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn point(&self, i: usize, j: usize, k: usize) -> Point {
        Point::new(
            self.origin.x + i as f64 * self.spacing.x,
            self.origin.y + j as f64 * self.spacing.y,
            self.origin.z + k as f64 * self.spacing.z,
        )
    }

    /// Point of flat index `n`.
    pub fn point_at(&self, n: usize) -> Point {
        let i = n % self.dims[0];
        let j = (n / self.dims[0]) % self.dims[1];
        let k = n / (self.dims[0] * self.dims[1]);
        self.point(i, j, k)
    }
}

/// What a grid stores at every point.
#[derive(Debug, Clone, PartialEq)]
pub enum GridChannels {
    /// One channel: the combined field of a voltage vector.
    Voltages(Vec<f64>),
    /// One channel: a single unit-voltage basis.
    Basis(usize),
    /// One channel per electrode basis.
    AllBases,
}

/// Sampled potential (V) and field (V/m). Points inside conductors hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub spec: GridSpec,
    /// Channel labels (electrode names, or "combined").
    pub channels: Vec<String>,
    pub rf_channel: Option<usize>,
    /// Point-major, then channel, then (φ, Ex, Ey, Ez).
    pub data: Vec<f64>,
    /// Hash of the basis that produced the grid.
    pub source_hash: String,
}

/// Samples `basis` on `spec`. Points inside conductors are stored as NaN and
/// counted in the log rather than failing the whole grid.
pub fn eval_grid(basis: &dyn ElectrodeBasis, channels: &GridChannels, spec: &GridSpec) -> Result<FieldGrid, FieldError> {
    spec.validate()?;
    let (labels, rf_channel) = match channels {
        GridChannels::Voltages(v) => {
            basis.check_voltages(v)?;
            (vec!["combined".to_string()], None)
        }
        GridChannels::Basis(e) => {
            let name = basis
                .electrode_names()
                .get(*e)
                .ok_or_else(|| FieldError::UnknownElectrode(format!("#{e}")))?;
            (vec![name.clone()], (basis.rf_index() == Some(*e)).then_some(0))
        }
        GridChannels::AllBases => (basis.electrode_names().to_vec(), basis.rf_index()),
    };
    let nc = labels.len();
    let mut data = Vec::with_capacity(spec.len() * nc * 4);
    let mut inside = 0usize;
    for n in 0..spec.len() {
        let p = spec.point_at(n);
        let values: Result<Vec<BasisValue>, FieldError> = match channels {
            GridChannels::Voltages(v) => basis.eval(v, &p).map(|x| vec![x]),
            GridChannels::Basis(e) => basis.eval_all(&p).map(|all| vec![all[*e]]),
            GridChannels::AllBases => basis.eval_all(&p),
        };
        match values {
            Ok(vals) => {
                for (phi, e) in vals {
                    data.extend_from_slice(&[phi, e.x, e.y, e.z]);
                }
            }
            Err(FieldError::InsideConductor { .. }) => {
                inside += 1;
                data.extend(std::iter::repeat(f64::NAN).take(4 * nc));
            }
            Err(e) => return Err(e),
        }
    }
    if inside > 0 {
        log::warn!("{inside} of {} grid points lie inside conductors and are stored as NaN", spec.len());
    }
    let mut h = ContentHasher::new();
    h.str(&basis.content_hash());
    if let GridChannels::Voltages(v) = channels {
        for x in v {
            h.f64(*x);
        }
    }
    Ok(FieldGrid { spec: *spec, channels: labels, rf_channel, data, source_hash: h.finish() })
}

#[derive(Serialize, Deserialize)]
struct Trailer {
    channels: Vec<String>,
    rf_channel: Option<usize>,
    source_hash: String,
}

impl FieldGrid {
    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// Value of channel `c` at grid point `n`.
    pub fn value(&self, n: usize, c: usize) -> BasisValue {
        let o = (n * self.n_channels() + c) * 4;
        let d = &self.data[o..o + 4];
        (d[0], Vec3::new(d[1], d[2], d[3]))
    }

    /// Number of points flagged as inside a conductor.
    pub fn flagged(&self) -> usize {
        (0..self.spec.len()).filter(|&n| self.value(n, 0).0.is_nan()).count()
    }

    /// Binary encoding: header, point data, then a JSON trailer naming the
    /// channels.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.data.len() * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for k in 0..3 {
            out.extend_from_slice(&self.spec.origin[k].to_le_bytes());
        }
        for k in 0..3 {
            out.extend_from_slice(&self.spec.spacing[k].to_le_bytes());
        }
        for k in 0..3 {
            out.extend_from_slice(&(self.spec.dims[k] as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.n_channels() as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let trailer = serde_json::to_vec(&Trailer {
            channels: self.channels.clone(),
            rf_channel: self.rf_channel,
            source_hash: self.source_hash.clone(),
        })
        .expect("serializable trailer");
        out.extend_from_slice(&(trailer.len() as u32).to_le_bytes());
        out.extend_from_slice(&trailer);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut r = bytes;
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| "truncated header")?;
        if &magic != MAGIC {
            return Err("not a field grid file (bad magic)".into());
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(format!("unsupported field grid version {version}"));
        }
        let mut origin = Point::origin();
        let mut spacing = Vec3::zeros();
        for k in 0..3 {
            origin[k] = read_f64(&mut r)?;
        }
        for k in 0..3 {
            spacing[k] = read_f64(&mut r)?;
        }
        let mut dims = [0usize; 3];
        for d in &mut dims {
            *d = read_u32(&mut r)? as usize;
        }
        let nc = read_u32(&mut r)? as usize;
        let spec = GridSpec { origin, spacing, dims };
        spec.validate().map_err(|e| e.to_string())?;
        let n = spec.len() * nc * 4;
        if r.len() < n * 8 {
            return Err("truncated point data".into());
        }
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(read_f64(&mut r)?);
        }
        let (channels, rf_channel, source_hash) = if r.is_empty() {
            ((0..nc).map(|c| format!("channel{c}")).collect(), None, String::new())
        } else {
            let len = read_u32(&mut r)? as usize;
            let t: Trailer = serde_json::from_slice(r.get(..len).ok_or("truncated trailer")?)
                .map_err(|e| format!("bad trailer: {e}"))?;
            (t.channels, t.rf_channel, t.source_hash)
        };
        if channels.len() != nc {
            return Err("channel count mismatch between header and trailer".into());
        }
        Ok(Self { spec, channels, rf_channel, data, source_hash })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|m| Error::format(path, m))
    }

    /// Plotting export: one row per point.
    pub fn to_table(&self) -> Table {
        let mut cols = vec!["x_um".to_string(), "y_um".into(), "z_um".into()];
        for c in &self.channels {
            for q in ["phi_V", "ex_V_per_m", "ey_V_per_m", "ez_V_per_m"] {
                cols.push(format!("{c}:{q}"));
            }
        }
        let mut t = Table::new(cols).with_meta("source_hash", &self.source_hash);
        for n in 0..self.spec.len() {
            let p = self.spec.point_at(n);
            let mut row = vec![p.x, p.y, p.z];
            let o = n * self.n_channels() * 4;
            row.extend_from_slice(&self.data[o..o + self.n_channels() * 4]);
            t.push_numbers(&row);
        }
        t
    }
}

fn read_u32(r: &mut &[u8]) -> std::result::Result<u32, String> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| "truncated file")?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut &[u8]) -> std::result::Result<f64, String> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|_| "truncated file")?;
    Ok(f64::from_le_bytes(b))
}

/// Catmull-Rom weights for fractional offset `t` over nodes -1, 0, 1, 2.
fn cubic_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

/// Electrode basis interpolated from an all-bases grid.
///
/// Potential and field are interpolated independently with tricubic
/// Catmull-Rom weights; edge cells use linearly extrapolated ghost points.
#[derive(Debug, Clone)]
pub struct GridBasis {
    grid: FieldGrid,
    names: Vec<String>,
    hash: String,
}

impl GridBasis {
    pub fn new(grid: FieldGrid) -> Self {
        let names = grid.channels.clone();
        let hash = ContentHasher::new().str("grid-basis").str(&grid.source_hash).json(&grid.spec).finish();
        Self { grid, names, hash }
    }

    /// Samples `basis` on `spec` and wraps the result.
    pub fn sample(basis: &dyn ElectrodeBasis, spec: &GridSpec) -> Result<Self, FieldError> {
        Ok(Self::new(eval_grid(basis, &GridChannels::AllBases, spec)?))
    }

    pub fn grid(&self) -> &FieldGrid {
        &self.grid
    }

    pub fn contains(&self, p: &Point) -> bool {
        let s = &self.grid.spec;
        (0..3).all(|k| {
            let t = (p[k] - s.origin[k]) / s.spacing[k];
            if s.dims[k] == 1 {
                t.abs() < 1e-9
            } else {
                t >= -1e-9 && t <= (s.dims[k] - 1) as f64 + 1e-9
            }
        })
    }

    /// Flat indices and weights of the interpolation stencil.
    fn stencil(&self, p: &Point) -> Result<Vec<(usize, f64)>, FieldError> {
        if !self.contains(p) {
            return Err(FieldError::OutsideGrid { point: *p });
        }
        let s = &self.grid.spec;
        let mut axes: [Vec<(usize, f64)>; 3] = Default::default();
        for k in 0..3 {
            let n = s.dims[k];
            if n == 1 {
                axes[k] = vec![(0, 1.0)];
                continue;
            }
            let t = ((p[k] - s.origin[k]) / s.spacing[k]).clamp(0.0, (n - 1) as f64);
            let i0 = (t.floor() as usize).min(n - 2);
            let w = cubic_weights(t - i0 as f64);
            let mut ax: Vec<(usize, f64)> = Vec::with_capacity(4);
            let mut add = |idx: usize, wm: f64| match ax.iter_mut().find(|(i, _)| *i == idx) {
                Some(e) => e.1 += wm,
                None => ax.push((idx, wm)),
            };
            for (m, wm) in w.iter().enumerate() {
                let idx = i0 as isize + m as isize - 1;
                // ghost points by linear extrapolation
                if idx < 0 {
                    add(0, 2.0 * wm);
                    add(1, -wm);
                } else if idx >= n as isize {
                    add(n - 1, 2.0 * wm);
                    add(n - 2, -wm);
                } else {
                    add(idx as usize, *wm);
                }
            }
            axes[k] = ax;
        }
        let mut out = Vec::with_capacity(64);
        for &(k, wk) in &axes[2] {
            for &(j, wj) in &axes[1] {
                for &(i, wi) in &axes[0] {
                    out.push((s.index(i, j, k), wi * wj * wk));
                }
            }
        }
        Ok(out)
    }

    fn check(&self, v: BasisValue, p: &Point) -> Result<BasisValue, FieldError> {
        if v.0.is_finite() && v.1.iter().all(|x| x.is_finite()) {
            Ok(v)
        } else {
            Err(FieldError::InsideConductor { electrode: "(grid point inside conductor)".into(), point: *p })
        }
    }
}

impl ElectrodeBasis for GridBasis {
    fn electrode_names(&self) -> &[String] {
        &self.names
    }

    fn rf_index(&self) -> Option<usize> {
        self.grid.rf_channel
    }

    fn eval_all(&self, p: &Point) -> Result<Vec<BasisValue>, FieldError> {
        let st = self.stencil(p)?;
        let nc = self.grid.n_channels();
        let mut out = vec![(0.0, Vec3::zeros()); nc];
        for (n, w) in st {
            let d = &self.grid.data[n * nc * 4..(n + 1) * nc * 4];
            for c in 0..nc {
                out[c].0 += w * d[4 * c];
                out[c].1 += w * Vec3::new(d[4 * c + 1], d[4 * c + 2], d[4 * c + 3]);
            }
        }
        out.into_iter().map(|v| self.check(v, p)).collect()
    }

    fn eval(&self, voltages: &[f64], p: &Point) -> Result<BasisValue, FieldError> {
        self.check_voltages(voltages)?;
        let st = self.stencil(p)?;
        let nc = self.grid.n_channels();
        let mut phi = 0.0;
        let mut e = Vec3::zeros();
        for (n, w) in st {
            let d = &self.grid.data[n * nc * 4..(n + 1) * nc * 4];
            for (c, v) in voltages.iter().enumerate() {
                if *v != 0.0 {
                    let wv = w * v;
                    phi += wv * d[4 * c];
                    e += wv * Vec3::new(d[4 * c + 1], d[4 * c + 2], d[4 * c + 3]);
                }
            }
        }
        self.check((phi, e), p)
    }

    fn electrode_distance(&self, _e: usize, _p: &Point) -> f64 {
        f64::INFINITY
    }

    fn content_hash(&self) -> String {
        self.hash.clone()
    }
}
