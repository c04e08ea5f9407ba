//! Minimal CSV tables with `# key=value` metadata lines.
//!
//! Every exported CSV carries its provenance (units, config hash) in leading
//! comment lines, followed by one header row and data rows. Floats are written
//! with Rust's shortest round-trip formatting so identical inputs produce
//! byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { meta: Vec::new(), columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.set_meta(key, value);
        self
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl ToString) {
        let key = key.into();
        let value = value.to_string().replace('\n', " ");
        if let Some(entry) = self.meta.iter_mut().find(|(k, _)| *k == key) {
            entry.1 = value;
        } else {
            self.meta.push((key, value));
        }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|v| fmt_f64(*v)).collect());
    }

    pub fn push_cells(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Parses one column as numbers; unparsable cells become NaN.
    pub fn column_f64(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r.get(idx).and_then(|c| c.parse().ok()).unwrap_or(f64::NAN)).collect())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k}={v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut table = Table::default();
        let mut header_seen = false;
        for line in text.lines() {
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim_start();
                match rest.split_once('=') {
                    Some((k, v)) => table.meta.push((k.to_string(), v.to_string())),
                    None => return Err(format!("metadata line without '=': {line}")),
                }
            } else if !header_seen {
                table.columns = line.split(',').map(str::to_string).collect();
                header_seen = true;
            } else {
                let row: Vec<String> = line.split(',').map(str::to_string).collect();
                if row.len() != table.columns.len() {
                    return Err(format!("row has {} cells, header has {}", row.len(), table.columns.len()));
                }
                table.rows.push(row);
            }
        }
        if !header_seen {
            return Err("missing header row".into());
        }
        Ok(table)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|m| Error::format(path, m))
    }

    /// Writes the CSV atomically (temporary file, then rename).
    pub fn write(&self, path: &Path) -> Result<()> {
        crate::field::write_atomic(path, self.to_csv_string().as_bytes())
    }
}

/// Shortest round-trip representation; non-finite values are spelled out.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut t = Table::new(["a", "b"]).with_meta("config_hash", "abc").with_meta("units", "um,V/m");
        t.push_numbers(&[0.1, -2.5e-7]);
        t.push_numbers(&[f64::NAN, f64::INFINITY]);
        let text = t.to_csv_string();
        let back = Table::parse(&text).unwrap();
        assert_eq!(back.meta("config_hash"), Some("abc"));
        assert_eq!(back.column_f64("a").unwrap()[0], 0.1);
        assert_eq!(back.column_f64("b").unwrap()[0], -2.5e-7);
        assert_eq!(back.rows[1][1], "inf");
        assert!(Table::parse("# x\n").is_err());
    }
}
