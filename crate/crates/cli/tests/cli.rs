use std::path::Path;
use std::process::{Command, Output};

use paultrap::geometry::{build_linear_trap, read_layout, LinearTrapParams};
use paultrap::table::Table;

const COARSE: [&str; 4] = ["--fine-panel-um", "60", "--coarse-panel-um", "200"];

fn paultrap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_paultrap"))
        .arg("--run-dir")
        .arg(dir)
        .arg("--no-timestamp")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = paultrap(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn coarse_junction(dir: &Path) {
    let mut geom = vec!["geom", "--preset", "junction-final", "--rf-volts", "200", "--rf-mhz", "36", "--species", "ca40"];
    geom.extend(COARSE);
    ok(dir, &geom);
    ok(dir, &["solve"]);
}

#[test]
fn diag_micromotion_reproduces_the_quoted_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["diag", "micromotion", "--beta", "0.05", "--species", "ca40", "--rf-mhz", "36.3", "--lambda-nm", "729", "--angle-deg", "45"]);
    let value: f64 = out.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!((value - 178.0).abs() < 1.0, "{out}");
    let t = Table::read(&dir.path().join("diag_micromotion.csv")).unwrap();
    assert_eq!(t.rows.last().unwrap()[0], "axial_rf_field");
    assert!(dir.path().join("diag.manifest.json").is_file());
}

#[test]
fn diag_inverse_formulas() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["diag", "sideband", "--ratio", "0.025"]);
    let beta: f64 = out.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!((beta - 0.05).abs() < 1e-4);
    let out = ok(dir.path(), &["diag", "rescale", "--beta", "3", "--from", "be9", "--to", "ca40"]);
    assert!(out.starts_with("beta = 0.675"), "{out}");
    let out = ok(dir.path(), &["diag", "noise", "--rate-per-s", "80", "--species", "ca40", "--freq-mhz", "4.4"]);
    let s_e: f64 = out.split_whitespace().nth(2).unwrap().parse().unwrap();
    let back = ok(dir.path(), &["diag", "heating", "--noise-v2-per-m2-hz", &s_e.to_string(), "--species", "ca40", "--freq-mhz", "4.4"]);
    let rate: f64 = back.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!((rate - 80.0).abs() < 1e-9);
}

#[test]
fn usage_and_config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(paultrap(dir.path(), &["frobnicate"]).status.code(), Some(2));
    let out = paultrap(dir.path(), &["diag", "micromotion", "--beta", "0.05", "--species", "xe", "--rf-mhz", "36", "--lambda-nm", "729", "--angle-deg", "45"]);
    assert_eq!(out.status.code(), Some(2));
    let out = paultrap(dir.path(), &["diag", "micromotion", "--beta", "0.05", "--species", "ca40", "--rf-mhz", "36", "--lambda-nm", "729", "--angle-deg", "90"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let out = paultrap(dir.path(), &["sweep", "--param", "bridge-gap", "--range", "1:2", "--metric", "barrier-height"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("start:end:step"));
}

#[test]
fn missing_upstream_artifacts_name_their_producer() {
    let dir = tempfile::tempdir().unwrap();
    let out = paultrap(dir.path(), &["report"]);
    assert_eq!(out.status.code(), Some(2));
    for (cmd, producer) in [("solve", "geom"), ("analyze", "geom"), ("waveform", "geom"), ("simulate", "geom")] {
        let out = paultrap(dir.path(), &[cmd]);
        assert_eq!(out.status.code(), Some(2), "{cmd}");
        assert!(stderr(&out).contains(&format!("paultrap {producer}")), "{cmd}: {}", stderr(&out));
    }
    ok(dir.path(), &["geom", "--preset", "junction-final"]);
    let out = paultrap(dir.path(), &["analyze"]);
    assert!(stderr(&out).contains("paultrap solve"), "{}", stderr(&out));
}

#[test]
fn geom_preset_passes_the_builder_defaults_through() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["geom", "--preset", "appendix-7seg"]);
    let layout = read_layout(&dir.path().join("geometry.json")).unwrap();
    assert_eq!(layout, build_linear_trap(&LinearTrapParams::appendix_seven_segment()).unwrap());
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("geometry.json")).unwrap()).unwrap();
    assert!(doc["config_hash"].as_str().is_some_and(|h| h.len() == 16));
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("geom.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"], doc["config_hash"]);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 3);
    assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn identical_runs_write_identical_csvs() {
    let runs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for r in &runs {
        let mut geom = vec!["geom", "--preset", "appendix-7seg"];
        geom.extend(COARSE);
        ok(r.path(), &geom);
        ok(r.path(), &["solve"]);
        ok(r.path(), &["analyze", "--step-um", "10"]);
    }
    for name in ["landmarks.csv", "electrodes.csv", "profile.csv", "modes.csv"] {
        let a = std::fs::read(runs[0].path().join(name)).unwrap();
        let b = std::fs::read(runs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
    // with timestamps on, only the creation line changes
    let out = Command::new(env!("CARGO_BIN_EXE_paultrap"))
        .arg("--run-dir")
        .arg(runs[1].path())
        .args(["analyze", "--step-um", "10"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let a = std::fs::read_to_string(runs[0].path().join("profile.csv")).unwrap();
    let b = std::fs::read_to_string(runs[1].path().join("profile.csv")).unwrap();
    let stripped: Vec<&str> = b.lines().filter(|l| !l.starts_with("# created_unix_s=")).collect();
    assert_ne!(a, b);
    assert_eq!(a.lines().collect::<Vec<_>>(), stripped);
}

#[test]
fn junction_pipeline_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    coarse_junction(d);
    ok(d, &["analyze"]);
    ok(d, &["waveform", "--spacing-um", "50"]);
    let w = Table::read(&d.join("waveform.csv")).unwrap();
    let hash = w.meta("config_hash").unwrap().to_string();
    assert_eq!(&w.columns[..4], ["step", "waypoint_x", "waypoint_y", "waypoint_z"]);
    assert!(d.join("waveform_verify.csv").is_file());
    let out = ok(d, &["simulate", "--durations-us", "2", "--tube-step-um", "3", "--trajectory-stride", "100"]);
    assert!(out.contains("2 us"));
    let x = Table::read(&d.join("excitation.csv")).unwrap();
    assert_eq!(x.rows.len(), 3);
    assert_eq!(x.meta("config_hash"), Some(hash.as_str()));
    ok(d, &["report"]);
    let index = Table::read(&d.join("report/index.csv")).unwrap();
    let groups: Vec<&str> = index.rows.iter().map(|r| r[0].as_str()).collect();
    assert!(groups.contains(&"junction-pseudopotential") && groups.contains(&"transport-waveform"), "{groups:?}");
    for row in &index.rows {
        assert!(d.join("report").join(&row[1]).is_file());
    }
}

#[test]
fn infeasible_waveform_is_a_compute_error() {
    let dir = tempfile::tempdir().unwrap();
    coarse_junction(dir.path());
    let out = paultrap(dir.path(), &["waveform", "--spacing-um", "50", "--bound-v", "0.001"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn stale_artifacts_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    coarse_junction(d);
    ok(d, &["waveform", "--spacing-um", "50"]);
    // a new geometry invalidates the solved basis and the waveform
    let mut geom = vec!["geom", "--preset", "closed-bridge"];
    geom.extend(COARSE);
    ok(d, &geom);
    let out = paultrap(d, &["analyze"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("paultrap solve"), "{}", stderr(&out));
}

#[test]
fn report_refuses_to_mix_configurations() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["geom", "--preset", "appendix-7seg"]);
    ok(dir.path(), &["diag", "sideband", "--ratio", "0.025"]);
    let out = paultrap(dir.path(), &["report"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("refusing to mix"), "{}", stderr(&out));
}

#[test]
fn bridge_gap_sweep_gives_a_monotone_barrier_column() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["sweep", "--param", "bridge-gap", "--range", "150:400:25", "--metric", "barrier-height"];
    args.extend(COARSE);
    ok(dir.path(), &args);
    let t = Table::read(&dir.path().join("sweep_bridge-gap.csv")).unwrap();
    assert!(t.meta("config_hash").is_some());
    let h = t.column_f64("barrier_height_eV").unwrap();
    assert_eq!(h.len(), 11);
    assert!(h.windows(2).all(|w| w[1] < w[0]), "{h:?}");
}
