use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrapLayout;
use crate::error::{Error, Result};

pub const LAYOUT_SCHEMA_VERSION: u32 = 1;

/// On-disk geometry document (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutDocument {
    pub schema_version: u32,
    #[serde(flatten)]
    pub layout: TrapLayout,
}

impl LayoutDocument {
    pub fn to_json(layout: &TrapLayout) -> String {
        let doc = LayoutDocument { schema_version: LAYOUT_SCHEMA_VERSION, layout: layout.clone() };
        serde_json::to_string_pretty(&doc).expect("layout serializes")
    }

    pub fn from_json(text: &str) -> std::result::Result<TrapLayout, String> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            None => return Err("missing schema_version".into()),
            Some(v) if v != LAYOUT_SCHEMA_VERSION as u64 => {
                return Err(format!("unsupported schema_version {v} (expected {LAYOUT_SCHEMA_VERSION})"))
            }
            _ => {}
        }
        let doc: LayoutDocument = serde_json::from_value(value).map_err(|e| e.to_string())?;
        doc.layout.validate().map_err(|e| e.to_string())?;
        Ok(doc.layout)
    }
}

pub fn write_layout(path: &Path, layout: &TrapLayout) -> Result<()> {
    std::fs::write(path, LayoutDocument::to_json(layout)).map_err(|e| Error::io(path, e))
}

pub fn read_layout(path: &Path) -> Result<TrapLayout> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    LayoutDocument::from_json(&text).map_err(|m| Error::format(path, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{apply_perturbation, build_x_junction, JunctionParams, Perturbation};

    #[test]
    fn json_round_trip_is_lossless() {
        let l = build_x_junction(&JunctionParams::final_design()).unwrap();
        let l = apply_perturbation(&l, &Perturbation::Tilt { theta_deg: 0.05 }).unwrap();
        let text = LayoutDocument::to_json(&l);
        assert_eq!(LayoutDocument::from_json(&text).unwrap(), l);
    }

    #[test]
    fn schema_version_is_mandatory() {
        let l = build_x_junction(&JunctionParams::final_design()).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&LayoutDocument::to_json(&l)).unwrap();
        v.as_object_mut().unwrap().remove("schema_version");
        assert!(LayoutDocument::from_json(&v.to_string()).unwrap_err().contains("schema_version"));
    }
}
