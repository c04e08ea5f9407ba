//! Run directory plumbing: atomic artifact writes, upstream lookups, the run
//! manifest and the error type that decides the exit code.

use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use paultrap::hashing::ContentHasher;
use paultrap::table::Table;
use serde::Serialize;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_COMPUTE: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Compute,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Config, message: message.into() }
    }

    pub fn compute(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Compute, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config => EXIT_CONFIG,
            ErrorKind::Compute => EXIT_COMPUTE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<paultrap::Error> for CliError {
    fn from(e: paultrap::Error) -> Self {
        if e.is_config() {
            Self::config(e.to_string())
        } else {
            Self::compute(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Serialize)]
struct FileEntry {
    path: String,
    content_hash: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    argv: &'a [String],
    tool_version: &'a str,
    config_hash: &'a str,
    inputs: Vec<FileEntry>,
    outputs: Vec<FileEntry>,
    wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    created_unix_s: Option<u64>,
}

/// One subcommand invocation against a run directory.
pub struct Run {
    pub dir: PathBuf,
    pub timestamps: bool,
    subcommand: String,
    argv: Vec<String>,
    started: Instant,
    config_hash: String,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Run {
    pub fn new(dir: PathBuf, timestamps: bool, subcommand: &str, argv: Vec<String>) -> CliResult<Self> {
        std::fs::create_dir_all(&dir).map_err(|e| CliError::config(format!("cannot create run directory {}: {e}", dir.display())))?;
        Ok(Self {
            dir,
            timestamps,
            subcommand: subcommand.into(),
            argv,
            started: Instant::now(),
            config_hash: String::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn set_config_hash(&mut self, hash: &str) {
        self.config_hash = hash.to_string();
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    /// Path of an upstream artifact, or a config error naming the producer.
    pub fn input(&mut self, name: &str, producer: &str) -> CliResult<PathBuf> {
        let p = self.path(name);
        if !p.is_file() {
            return Err(CliError::config(format!(
                "missing {} (run `paultrap {producer}` with --run-dir {} first)",
                p.display(),
                self.dir.display()
            )));
        }
        self.inputs.push(p.clone());
        Ok(p)
    }

    pub fn record_input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn record_output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.path(name);
        write_atomic(&path, bytes)?;
        self.outputs.push(path.clone());
        Ok(path)
    }

    /// Writes a CSV with the run's config hash and, unless suppressed, a
    /// creation timestamp.
    pub fn write_table(&mut self, name: &str, artifact: &str, mut table: Table) -> CliResult<PathBuf> {
        table.set_meta("artifact", artifact);
        table.set_meta("config_hash", &self.config_hash);
        if self.timestamps {
            table.set_meta("created_unix_s", unix_now());
        }
        self.write_bytes(name, table.to_csv_string().as_bytes())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::compute(e.to_string()))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Writes `<subcommand>.manifest.json` listing inputs, outputs and hashes.
    pub fn finish(self) -> CliResult<()> {
        let entries = |paths: &[PathBuf]| -> CliResult<Vec<FileEntry>> {
            paths
                .iter()
                .map(|p| {
                    let bytes = std::fs::read(p).map_err(|e| CliError::compute(format!("cannot read {}: {e}", p.display())))?;
                    Ok(FileEntry { path: p.display().to_string(), content_hash: ContentHasher::new().bytes(&bytes).finish() })
                })
                .collect()
        };
        let manifest = Manifest {
            subcommand: &self.subcommand,
            argv: &self.argv,
            tool_version: env!("CARGO_PKG_VERSION"),
            config_hash: &self.config_hash,
            inputs: entries(&self.inputs)?,
            outputs: entries(&self.outputs)?,
            wall_time_s: self.started.elapsed().as_secs_f64(),
            created_unix_s: self.timestamps.then(unix_now),
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::compute(e.to_string()))?;
        text.push('\n');
        write_atomic(&self.path(&format!("{}.manifest.json", self.subcommand)), text.as_bytes())
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let fail = |e: std::io::Error| CliError::compute(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}
