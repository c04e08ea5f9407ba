//! Binary persistence of solved bases and an on-disk solve cache.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use super::bem::{solve_basis, FieldBasis, SolverConfig};
use super::ElectrodeBasis;
use crate::error::{Error, Result};
use crate::geometry::{Panel, PanelMesh};
use crate::hashing::ContentHasher;
use crate::Point;

const MAGIC: &[u8; 4] = b"PTBS";
const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a>(&'a [u8]);

impl Reader<'_> {
    fn bytes(&mut self, n: usize) -> std::result::Result<&[u8], String> {
        if self.0.len() < n {
            return Err("truncated basis file".into());
        }
        let (a, b) = self.0.split_at(n);
        self.0 = b;
        Ok(a)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> std::result::Result<String, String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.bytes(n)?.to_vec()).map_err(|_| "invalid UTF-8 in basis file".into())
    }
}

pub(crate) fn basis_to_bytes(b: &FieldBasis) -> Vec<u8> {
    let mesh = b.mesh();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    put_f64(&mut out, b.config().far_ratio);
    put_f64(&mut out, b.config().residual_tolerance);
    put_u32(&mut out, mesh.n_electrodes() as u32);
    for n in &mesh.electrode_names {
        put_str(&mut out, n);
    }
    put_u32(&mut out, mesh.len() as u32);
    for p in &mesh.panels {
        put_u32(&mut out, p.electrode as u32);
        put_u32(&mut out, p.vertices().len() as u32);
        for v in p.vertices() {
            put_f64(&mut out, v.x);
            put_f64(&mut out, v.y);
            put_f64(&mut out, v.z);
        }
    }
    for q in b.raw_charges() {
        put_f64(&mut out, *q);
    }
    for r in b.residuals() {
        put_f64(&mut out, *r);
    }
    out
}

pub(crate) fn basis_from_bytes(bytes: &[u8]) -> std::result::Result<FieldBasis, String> {
    let mut r = Reader(bytes);
    if r.bytes(4)? != MAGIC {
        return Err("not a basis file (bad magic)".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported basis file version {version}"));
    }
    let config = SolverConfig { far_ratio: r.f64()?, residual_tolerance: r.f64()? };
    let ne = r.u32()? as usize;
    let names = (0..ne).map(|_| r.string()).collect::<std::result::Result<Vec<_>, _>>()?;
    let np = r.u32()? as usize;
    let mut panels = Vec::with_capacity(np);
    for _ in 0..np {
        let e = r.u32()? as usize;
        let nv = r.u32()? as usize;
        if e >= ne || !(3..=4).contains(&nv) {
            return Err("corrupt panel record".into());
        }
        let mut v = Vec::with_capacity(nv);
        for _ in 0..nv {
            v.push(Point::new(r.f64()?, r.f64()?, r.f64()?));
        }
        panels.push(Panel::new(&v, e));
    }
    let charges = (0..np * ne).map(|_| r.f64()).collect::<std::result::Result<Vec<_>, _>>()?;
    let residuals = (0..ne).map(|_| r.f64()).collect::<std::result::Result<Vec<_>, _>>()?;
    if !r.0.is_empty() {
        return Err("trailing bytes after basis data".into());
    }
    let mesh = PanelMesh::from_panels(panels, names);
    Ok(FieldBasis::from_parts(Arc::new(mesh), charges, residuals, config))
}

pub fn write_basis(basis: &FieldBasis, path: &Path) -> Result<()> {
    write_atomic(path, &basis_to_bytes(basis))
}

pub fn read_basis(path: &Path) -> Result<FieldBasis> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    basis_from_bytes(&bytes).map_err(|m| Error::format(path, m))
}

/// Writes through a sibling temporary file and renames it into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Solve cache keyed by the content hash of (mesh, solver config).
///
/// Results are kept in memory and, if a directory is configured, on disk.
#[derive(Debug, Default)]
pub struct BasisCache {
    dir: Option<PathBuf>,
    memory: Mutex<HashMap<String, Arc<FieldBasis>>>,
}

impl BasisCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { dir: Some(dir), memory: Mutex::default() })
    }

    pub fn key(mesh: &PanelMesh, config: &SolverConfig) -> String {
        let mut h = ContentHasher::new();
        h.str(&mesh.hash());
        config.hash_into(&mut h);
        h.finish()
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{}.basis", &key[..32])))
    }

    /// Returns the cached solve or solves and stores it.
    pub fn get_or_solve(&self, mesh: &PanelMesh, config: &SolverConfig) -> Result<Arc<FieldBasis>> {
        let key = Self::key(mesh, config);
        if let Some(b) = self.memory.lock().unwrap().get(&key) {
            return Ok(b.clone());
        }
        if let Some(path) = self.path(&key) {
            if path.exists() {
                match read_basis(&path) {
                    Ok(b) if b.content_hash() == key => {
                        log::info!("basis cache hit {}", path.display());
                        let b = Arc::new(b);
                        self.memory.lock().unwrap().insert(key, b.clone());
                        return Ok(b);
                    }
                    _ => log::warn!("ignoring stale cache entry {}", path.display()),
                }
            }
        }
        let b = Arc::new(solve_basis(mesh, config)?);
        if let Some(path) = self.path(&key) {
            write_basis(&b, &path)?;
        }
        self.memory.lock().unwrap().insert(key, b.clone());
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.memory.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::sphere_mesh;

    #[test]
    fn basis_round_trips_through_bytes() {
        let mesh = sphere_mesh(5.0, 3);
        let b = solve_basis(&mesh, &SolverConfig::default()).unwrap();
        let back = basis_from_bytes(&basis_to_bytes(&b)).unwrap();
        assert_eq!(back.raw_charges(), b.raw_charges());
        assert_eq!(back.content_hash(), b.content_hash());
        let p = Point::new(9.0, 1.0, -2.0);
        assert_eq!(back.eval_all(&p).unwrap(), b.eval_all(&p).unwrap());
        assert!(basis_from_bytes(&basis_to_bytes(&b)[..100]).is_err());
    }

    #[test]
    fn cache_reuses_disk_entries() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = sphere_mesh(5.0, 2);
        let cfg = SolverConfig::default();
        let a = BasisCache::on_disk(dir.path()).unwrap().get_or_solve(&mesh, &cfg).unwrap();
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        let b = BasisCache::on_disk(dir.path()).unwrap().get_or_solve(&mesh, &cfg).unwrap();
        assert_eq!(a.raw_charges(), b.raw_charges());
    }
}
