//! `report`: collates the CSV artifacts of one configuration into a bundle
//! grouped by the plot each one reproduces.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use paultrap::table::Table;

use crate::run::{CliError, CliResult, Run};

#[derive(Args, Debug, Clone)]
pub struct ReportArgs {
    /// Bundle directory inside the run directory.
    #[arg(long, default_value = "report")]
    pub bundle: String,
}

/// Plot group a CSV belongs to, from its file name and metadata.
pub fn plot_group(stem: &str, table: &Table) -> (&'static str, &'static str) {
    match stem {
        "sweep_bridge-gap" => ("bridge-gap-trend", "barrier height and centre axial frequency vs bridge gap"),
        "profile" if table.meta("landmark") == Some("junction_center") => ("junction-pseudopotential", "pseudopotential along the transport axis"),
        "profile" => ("axial-field-profile", "axial RF field along the trap axis"),
        "waveform" => ("transport-waveform", "transport voltages per step"),
        "waveform_verify" => ("transport-waveform", "verified well positions and mode frequencies per step"),
        "sweep_dc-gap-width" | "sweep_segment-width" => ("dc-gap-study", "axial field vs DC gap geometry"),
        "sweep_rf-gap-depth" => ("rf-gap-depth", "axial field vs mirrored RF gap depth"),
        "sweep_indentation-depth" | "sweep_curved-edge-depth" => ("electrode-shaping", "axial field vs electrode shaping"),
        "sweep_tilt" | "sweep_linear-shift" => ("misalignment", "axial field change vs wafer misalignment"),
        _ => ("extra", "supporting data"),
    }
}

pub fn report(run: &mut Run, args: &ReportArgs) -> CliResult<()> {
    let bundle = run.path(&args.bundle);
    let mut entries: Vec<(PathBuf, String, Table)> = Vec::new();
    let listing = std::fs::read_dir(&run.dir).map_err(|e| CliError::config(format!("cannot list {}: {e}", run.dir.display())))?;
    let mut paths: Vec<PathBuf> = listing
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    for p in paths {
        let t = Table::read(&p)?;
        let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        entries.push((p, stem, t));
    }
    if entries.is_empty() {
        return Err(CliError::config(format!(
            "no CSV artifacts in {} (run `paultrap analyze`, `paultrap sweep` or `paultrap waveform` first)",
            run.dir.display()
        )));
    }
    let mut by_hash: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (p, _, t) in &entries {
        let h = t.meta("config_hash").unwrap_or("<none>").to_string();
        by_hash.entry(h).or_default().push(p.file_name().unwrap().to_string_lossy().into_owned());
    }
    if by_hash.len() > 1 {
        let groups: Vec<String> = by_hash.iter().map(|(h, files)| format!("{h}: {}", files.join(" "))).collect();
        return Err(CliError::config(format!(
            "artifacts come from different configurations; refusing to mix them ({})",
            groups.join("; ")
        )));
    }
    let hash = by_hash.into_keys().next().unwrap();
    run.set_config_hash(&hash);
    std::fs::create_dir_all(&bundle).map_err(|e| CliError::compute(format!("cannot create {}: {e}", bundle.display())))?;
    let mut index = Table::new(["group", "file", "source", "rows", "description"]);
    for (p, stem, t) in &entries {
        run.record_input(p);
        let (group, what) = plot_group(stem, t);
        let name = format!("{group}_{stem}.csv");
        let bytes = std::fs::read(p).map_err(|e| CliError::compute(format!("cannot read {}: {e}", p.display())))?;
        run.write_bytes(&format!("{}/{name}", args.bundle), &bytes)?;
        index.push_cells(vec![group.into(), name, p.file_name().unwrap().to_string_lossy().into_owned(), t.rows.len().to_string(), what.into()]);
    }
    run.write_table(&format!("{}/index.csv", args.bundle), "report-index", index)?;
    println!("{} artifacts collated into {}", entries.len(), bundle.display());
    Ok(())
}
