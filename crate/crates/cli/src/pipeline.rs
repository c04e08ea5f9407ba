//! The pipeline stages. Each reads its upstream artifacts from the run
//! directory and writes its own.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, ValueEnum};
use paultrap::analysis::{
    axial_profile, barrier_metrics, find_minimum, sweep, MinimizeOptions, Potential, ProfileAxis, SweepMetric, SweepParameter,
    SweepSpec, DEFAULT_STEP,
};
use paultrap::dynamics::{
    integrate, transport_excitation, tube_basis, DcSource, ExcitationOptions, ExcitationResult, IntegrateOptions, IonState, Ramp,
    TransportSchedule,
};
use paultrap::field::{eval_grid, read_basis, write_basis, BasisCache, ElectrodeBasis, FieldBasis, GridChannels, GridSpec};
use paultrap::geometry::{LayoutDocument, Recipe, TrapLayout};
use paultrap::scenario::{Preset, Scenario};
use paultrap::table::{fmt_f64, Table};
use paultrap::waveform::{
    discretize_path, frequency_ramp, synthesize, verify, SynthesisOptions, TransportConstraints, VerifyOptions, Waveform,
};
use paultrap::{DriveConfig, IonSpecies, Point, Vec3};
use serde::{Deserialize, Serialize};

use crate::run::{CliError, CliResult, Run};

pub const SCENARIO_FILE: &str = "scenario.json";
pub const GEOMETRY_FILE: &str = "geometry.json";
pub const BASIS_FILE: &str = "basis.bin";
pub const WAVEFORM_FILE: &str = "waveform.csv";

/// Scenario selection and overrides shared by `geom` and `sweep`.
#[derive(Args, Debug, Clone, Default)]
pub struct ScenarioArgs {
    /// Named preset: appendix-7seg, junction-final or closed-bridge.
    #[arg(long, conflicts_with = "scenario")]
    pub preset: Option<String>,
    /// Scenario JSON (the scenario.json written by `geom`, or a bare scenario).
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// RF amplitude, zero to peak (V).
    #[arg(long)]
    pub rf_volts: Option<f64>,
    /// RF drive frequency Ω/2π (MHz).
    #[arg(long)]
    pub rf_mhz: Option<f64>,
    /// Ion species label (ca40, be9).
    #[arg(long)]
    pub species: Option<String>,
    /// Panel size away from refinement regions (µm).
    #[arg(long)]
    pub coarse_panel_um: Option<f64>,
    /// Panel size inside refinement regions (µm).
    #[arg(long)]
    pub fine_panel_um: Option<f64>,
    /// Largest accepted panel count.
    #[arg(long)]
    pub panel_budget: Option<usize>,
    /// Largest accepted boundary-condition residual (V).
    #[arg(long)]
    pub residual_tol_v: Option<f64>,
}

impl ScenarioArgs {
    fn selects(&self) -> bool {
        self.preset.is_some() || self.scenario.is_some()
    }

    fn has_overrides(&self) -> bool {
        self.rf_volts.is_some()
            || self.rf_mhz.is_some()
            || self.species.is_some()
            || self.coarse_panel_um.is_some()
            || self.fine_panel_um.is_some()
            || self.panel_budget.is_some()
            || self.residual_tol_v.is_some()
    }

    fn base(&self, run: &mut Run) -> CliResult<Scenario> {
        match (&self.preset, &self.scenario) {
            (Some(p), _) => Ok(p.parse::<Preset>()?.scenario()),
            (None, Some(path)) => {
                run.record_input(path);
                Ok(read_scenario(path)?.1)
            }
            (None, None) => Err(CliError::config("select a scenario with --preset or --scenario")),
        }
    }

    fn apply(&self, mut s: Scenario) -> CliResult<Scenario> {
        if self.rf_volts.is_some() || self.rf_mhz.is_some() {
            let volts = self.rf_volts.unwrap_or(s.drive.rf_amplitude);
            s.drive = match self.rf_mhz {
                Some(mhz) => DriveConfig::from_mhz(volts, mhz)?,
                None => DriveConfig::new(volts, s.drive.rf_omega)?,
            };
        }
        if let Some(label) = &self.species {
            s.species = IonSpecies::builtin(label)?;
        }
        if let Some(size) = self.coarse_panel_um {
            positive("--coarse-panel-um", size)?;
            s.mesh.max_panel_size = size;
        }
        if let Some(size) = self.fine_panel_um {
            positive("--fine-panel-um", size)?;
            for r in &mut s.mesh.refinements {
                r.size = size;
            }
        }
        if let Some(n) = self.panel_budget {
            s.mesh.panel_budget = n;
        }
        if let Some(tol) = self.residual_tol_v {
            positive("--residual-tol-v", tol)?;
            s.solver.residual_tolerance = tol;
        }
        Ok(s)
    }

    pub fn resolve(&self, run: &mut Run) -> CliResult<Scenario> {
        let base = self.base(run)?;
        self.apply(base)
    }
}

fn positive(flag: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(format!("{flag} must be positive, got {v}")))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioFile {
    config_hash: String,
    scenario: Scenario,
}

/// Reads either the wrapped scenario written by `geom` or a bare scenario.
fn read_scenario(path: &Path) -> CliResult<(String, Scenario)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let bad = |e: serde_json::Error| CliError::config(format!("{} is not a scenario: {e}", path.display()));
    let value: serde_json::Value = serde_json::from_str(&text).map_err(bad)?;
    let scenario: Scenario = if value.get("scenario").is_some() {
        serde_json::from_value::<ScenarioFile>(value).map_err(bad)?.scenario
    } else {
        serde_json::from_value(value).map_err(bad)?
    };
    Ok((scenario.config_hash(), scenario))
}

/// Scenario of the run directory, checked against its recorded hash.
fn run_scenario(run: &mut Run) -> CliResult<Scenario> {
    let path = run.input(SCENARIO_FILE, "geom")?;
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let file: ScenarioFile = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{} is not a scenario file: {e}", path.display())))?;
    if file.scenario.config_hash() != file.config_hash {
        return Err(CliError::config(format!("{} was edited after `paultrap geom` wrote it; rerun geom", path.display())));
    }
    run.set_config_hash(&file.config_hash);
    Ok(file.scenario)
}

/// Scenario, layout and solved basis of the run directory.
struct Solved {
    scenario: Scenario,
    layout: TrapLayout,
    basis: Arc<FieldBasis>,
}

fn load_solved(run: &mut Run) -> CliResult<Solved> {
    let scenario = run_scenario(run)?;
    let path = run.input(BASIS_FILE, "solve")?;
    let layout = scenario.layout()?;
    let mesh = scenario.panel_mesh(&layout)?;
    let basis = read_basis(&path)?;
    if basis.content_hash() != BasisCache::key(&mesh, &scenario.solver) {
        return Err(CliError::config(format!(
            "{} does not belong to the geometry in {SCENARIO_FILE}; rerun `paultrap solve`",
            path.display()
        )));
    }
    let basis = Arc::new(basis.with_layout(&layout));
    Ok(Solved { scenario, layout, basis })
}

fn default_center(s: &Scenario) -> &'static str {
    match s.recipe {
        Recipe::XJunction(_) => "junction_center",
        Recipe::LinearTrap(_) => "trap_center",
    }
}

fn landmark(s: &Scenario, layout: &TrapLayout, name: &str) -> CliResult<Point> {
    s.landmark(layout, name).map_err(|_| {
        let names: Vec<&str> = layout.landmarks.keys().map(String::as_str).collect();
        CliError::config(format!("unknown landmark '{name}' (layout has: {})", names.join(", ")))
    })
}

pub fn geom(run: &mut Run, args: &ScenarioArgs) -> CliResult<()> {
    let s = args.resolve(run)?;
    let hash = s.config_hash();
    run.set_config_hash(&hash);
    let layout = s.layout()?;
    run.write_json(SCENARIO_FILE, &ScenarioFile { config_hash: hash.clone(), scenario: s.clone() })?;
    let mut doc: serde_json::Value =
        serde_json::from_str(&LayoutDocument::to_json(&layout)).map_err(|e| CliError::compute(e.to_string()))?;
    doc["config_hash"] = serde_json::Value::String(hash.clone());
    run.write_json(GEOMETRY_FILE, &doc)?;
    let mut t = Table::new(["landmark", "x_um", "y_um", "z_um"]);
    for (name, p) in &layout.landmarks {
        t.push_cells(vec![name.clone(), fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.z)]);
    }
    run.write_table("landmarks.csv", "landmarks", t)?;
    println!("{}: {} electrodes, config {hash}", s.name, layout.electrodes.len());
    Ok(())
}

#[derive(Args, Debug, Clone)]
pub struct SolveArgs {
    /// Also sample every basis on a cube of this half width around the landmark (µm).
    #[arg(long)]
    pub grid_half_um: Option<f64>,
    /// Grid spacing (µm).
    #[arg(long, default_value_t = 5.0)]
    pub grid_step_um: f64,
    /// Centre of the grid (defaults to the trap or junction centre).
    #[arg(long)]
    pub grid_landmark: Option<String>,
}

pub fn solve(run: &mut Run, cache: &BasisCache, args: &SolveArgs) -> CliResult<()> {
    let s = run_scenario(run)?;
    let (layout, basis) = s.solve(cache)?;
    let path = run.path(BASIS_FILE);
    write_basis(&basis, &path)?;
    run.record_output(&path);
    let mesh = basis.mesh();
    let cap = basis.capacitance_matrix();
    let mut t = Table::new(["electrode", "panels", "residual_V", "self_capacitance_F"]);
    for (e, name) in mesh.electrode_names.iter().enumerate() {
        let panels = mesh.panels.iter().filter(|p| p.electrode == e).count();
        t.push_cells(vec![name.clone(), panels.to_string(), fmt_f64(basis.residuals()[e]), fmt_f64(cap[e][e])]);
    }
    t.set_meta("basis_hash", basis.content_hash());
    run.write_table("electrodes.csv", "electrodes", t)?;
    if let Some(half) = args.grid_half_um {
        positive("--grid-half-um", half)?;
        positive("--grid-step-um", args.grid_step_um)?;
        let name = args.grid_landmark.clone().unwrap_or_else(|| default_center(&s).to_string());
        let c = landmark(&s, &layout, &name)?;
        let spec = GridSpec::covering(c - Vec3::repeat(half), c + Vec3::repeat(half), args.grid_step_um);
        let grid = eval_grid(basis.as_ref(), &GridChannels::AllBases, &spec).map_err(paultrap::Error::from)?;
        run.write_bytes("field_grid.bin", &grid.to_bytes())?;
        run.write_table("field_grid.csv", "field-grid", grid.to_table())?;
    }
    println!("solved {} panels, {} electrodes", basis.panel_count(), mesh.n_electrodes());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    Z,
    XLeg,
}

#[derive(Args, Debug, Clone)]
pub struct AnalyzeArgs {
    /// Profile origin (defaults to the trap or junction centre).
    #[arg(long)]
    pub landmark: Option<String>,
    #[arg(long, value_enum, default_value = "z")]
    pub axis: AxisArg,
    /// Half length of the profile (defaults to the experimental zone distance
    /// for junctions, three segment pitches for linear traps) (µm).
    #[arg(long)]
    pub half_range_um: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    pub step_um: f64,
}

pub fn analyze(run: &mut Run, args: &AnalyzeArgs) -> CliResult<()> {
    let Solved { scenario: s, layout, basis } = load_solved(run)?;
    let name = args.landmark.clone().unwrap_or_else(|| default_center(&s).to_string());
    let c = landmark(&s, &layout, &name)?;
    let half = match (args.half_range_um, &s.recipe) {
        (Some(h), _) => h,
        (None, Recipe::XJunction(_)) => (landmark(&s, &layout, "experimental_zone")? - landmark(&s, &layout, "junction_center")?).norm(),
        (None, Recipe::LinearTrap(p)) => 3.0 * p.pitch(),
    };
    positive("--half-range-um", half)?;
    let axis = match args.axis {
        AxisArg::Z => ProfileAxis::Z,
        AxisArg::XLeg => ProfileAxis::XLeg,
    };
    let profile = axial_profile(basis.as_ref(), None, &s.drive, &s.species, axis, c, (-half, half), args.step_um)?;
    let mut t = profile.to_table().with_meta("landmark", &name);
    match barrier_metrics(&profile) {
        Ok(b) => {
            t.set_meta("barrier_height_eV", fmt_f64(b.height));
            t.set_meta("max_gradient_eV_per_um", fmt_f64(b.max_gradient));
        }
        Err(e) => log::info!("no barrier metrics: {e}"),
    }
    run.write_table("profile.csv", "profile", t)?;

    let pot = Potential::pseudo_only(basis.as_ref(), &s.drive, &s.species);
    let mut m = Table::new(["landmark", "x_um", "y_um", "z_um", "mode0_Hz", "mode1_Hz", "mode2_Hz", "axial_mode"])
        .with_meta("note", "pseudopotential only; DC grounded; negative frequency = unconfined");
    for (lname, p) in &layout.landmarks {
        let modes = pot.modes(p, DEFAULT_STEP)?;
        let hz: Vec<String> = (0..3).map(|k| fmt_f64(modes.signed_omega(k) / (2.0 * std::f64::consts::PI))).collect();
        let mut row = vec![lname.clone(), fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.z)];
        row.extend(hz);
        row.push(modes.mode_along(&Vec3::z()).to_string());
        m.push_cells(row);
    }
    run.write_table("modes.csv", "modes", m)?;
    println!("profile of {} points around {name}", profile.positions.len());
    Ok(())
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    /// Parameter to vary.
    #[arg(long)]
    pub param: String,
    /// start:end:step in the parameter's unit.
    #[arg(long)]
    pub range: String,
    /// One or more metrics (comma separated or repeated).
    #[arg(long = "metric", required = true, value_delimiter = ',')]
    pub metrics: Vec<String>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
}

fn natural_preset(p: SweepParameter) -> Preset {
    match p {
        SweepParameter::BridgeGap | SweepParameter::JunctionDcWidth | SweepParameter::RfAmplitude => Preset::JunctionFinal,
        _ => Preset::Appendix7Seg,
    }
}

fn parse_range(text: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let nums: Result<Vec<f64>, _> = parts.iter().map(|p| p.trim().parse::<f64>()).collect();
    match nums {
        Ok(n) if n.len() == 3 => Ok(SweepSpec::range(n[0], n[1], n[2])?),
        _ => Err(CliError::config(format!("--range expects start:end:step, got '{text}'"))),
    }
}

pub fn sweep_cmd(run: &mut Run, cache: &BasisCache, args: &SweepArgs) -> CliResult<()> {
    let parameter: SweepParameter = args.param.parse()?;
    let metrics = args.metrics.iter().map(|m| m.parse::<SweepMetric>()).collect::<Result<Vec<_>, _>>()?;
    let values = parse_range(&args.range)?;
    let scenario = if args.scenario.selects() {
        args.scenario.resolve(run)?
    } else if run.path(SCENARIO_FILE).is_file() {
        let base = run_scenario(run)?;
        args.scenario.apply(base)?
    } else {
        let base = natural_preset(parameter).scenario();
        if args.scenario.has_overrides() {
            args.scenario.apply(base)?
        } else {
            base
        }
    };
    run.set_config_hash(&scenario.config_hash());
    let spec = SweepSpec { scenario, parameter, values, metrics, jobs: args.jobs.max(1) };
    let table = sweep(&spec, cache)?;
    let failed = table.rows.iter().filter(|r| r.error.is_some()).count();
    let mut t = table.to_table();
    t.set_meta("sweep_hash", &table.config_hash);
    t.set_meta("scenario", &spec.scenario.name);
    run.write_table(&format!("sweep_{}.csv", parameter.name()), "sweep", t)?;
    println!("{} rows over {}, {failed} failed", table.rows.len(), parameter.name());
    if failed == table.rows.len() {
        return Err(CliError::compute("every sweep row failed; see the error column"));
    }
    Ok(())
}

#[derive(Args, Debug, Clone)]
pub struct WaveformArgs {
    #[arg(long, default_value = "experimental_zone")]
    pub from: String,
    #[arg(long, default_value = "junction_center")]
    pub to: String,
    /// Waypoint spacing (µm).
    #[arg(long, default_value_t = 10.0)]
    pub spacing_um: f64,
    /// Axial frequency at the first waypoint (MHz).
    #[arg(long, default_value_t = 1.0)]
    pub start_mhz: f64,
    /// Axial frequency at the last waypoint (MHz); defaults to the
    /// pseudopotential axial frequency there.
    #[arg(long)]
    pub end_mhz: Option<f64>,
    /// Voltage bound on every DC electrode (V).
    #[arg(long, default_value_t = 10.0)]
    pub bound_v: f64,
    /// Largest change of any electrode between steps (V).
    #[arg(long, default_value_t = 1.0)]
    pub slew_v: f64,
    /// Accepted distance between waypoint and verified minimum (µm).
    #[arg(long, default_value_t = 1.0)]
    pub tolerance_um: f64,
}

pub fn waveform(run: &mut Run, args: &WaveformArgs) -> CliResult<()> {
    let Solved { scenario: s, layout, basis } = load_solved(run)?;
    positive("--spacing-um", args.spacing_um)?;
    positive("--start-mhz", args.start_mhz)?;
    let path = discretize_path(&layout, &args.from, &args.to, args.spacing_um)?;
    let end_hz = match args.end_mhz {
        Some(f) => {
            positive("--end-mhz", f)?;
            f * 1e6
        }
        None => {
            let end = *path.waypoints.last().expect("non-empty path");
            let modes = Potential::pseudo_only(basis.as_ref(), &s.drive, &s.species).modes(&end, DEFAULT_STEP)?;
            let k = modes.mode_along(&path.tangent(path.len() - 1));
            let hz = modes.signed_omega(k) / (2.0 * std::f64::consts::PI);
            if !(hz > 0.0) {
                return Err(CliError::config(format!("no pseudopotential confinement along the path at '{}'; pass --end-mhz", args.to)));
            }
            hz
        }
    };
    let targets = frequency_ramp(&path, &s.species, args.start_mhz * 1e6, end_hz);
    let constraints = TransportConstraints::for_layout(&layout, &path, args.bound_v, args.slew_v);
    let mut w = synthesize(basis.as_ref(), &s.drive, &s.species, &path, &targets, &constraints, &SynthesisOptions::default())?;
    w.config_hash = run.config_hash().to_string();
    run.write_table(WAVEFORM_FILE, "waveform", w.to_table())?;
    let report = verify(basis.as_ref(), &s.drive, &s.species, &w, &VerifyOptions::default())?;
    let mut t = report.to_table(Some(&w));
    t.set_meta("max_position_error_um", fmt_f64(report.max_position_error()));
    run.write_table("waveform_verify.csv", "waveform-verify", t)?;
    let violations = w.check_constraints(&constraints);
    println!(
        "{} steps, max |V| {:.3} V, max slew {:.3} V, max position error {:.3} um",
        w.len(),
        w.max_abs_voltage(),
        w.max_slew(),
        report.max_position_error()
    );
    if !violations.is_empty() {
        return Err(CliError::compute(format!("waveform violates its constraints: {}", violations.join("; "))));
    }
    if !report.passed(args.tolerance_um) {
        return Err(CliError::compute(format!(
            "verification failed: max position error {:.3} um exceeds {} um",
            report.max_position_error(),
            args.tolerance_um
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RampArg {
    Smooth,
    Linear,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    /// Transport durations (µs), comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.5,5,50,200")]
    pub durations_us: Vec<f64>,
    /// Clearance of the interpolation grid around the path (µm).
    #[arg(long, default_value_t = 6.0)]
    pub tube_radius_um: f64,
    /// Interpolation grid spacing (µm).
    #[arg(long, default_value_t = 2.0)]
    pub tube_step_um: f64,
    #[arg(long, value_enum, default_value = "smooth")]
    pub ramp: RampArg,
    /// Integrator steps per RF period.
    #[arg(long, default_value_t = 40)]
    pub samples_per_period: usize,
    /// Hold before and after the transport, in RF periods.
    #[arg(long, default_value_t = 10.0)]
    pub settle_periods: f64,
    /// RF phase at t = 0 (rad).
    #[arg(long, default_value_t = 0.0)]
    pub rf_phase_rad: f64,
    /// Skip the static verification of the waveform on the interpolated field.
    #[arg(long)]
    pub no_verify: bool,
    /// Also write trajectory.csv for the longest duration, keeping every n-th step.
    #[arg(long)]
    pub trajectory_stride: Option<usize>,
}

pub fn simulate(run: &mut Run, args: &SimulateArgs) -> CliResult<()> {
    let Solved { scenario: s, basis, .. } = load_solved(run)?;
    let wpath = run.input(WAVEFORM_FILE, "waveform")?;
    let w = Waveform::read(&wpath)?;
    if w.config_hash != run.config_hash() {
        return Err(CliError::config(format!(
            "{} has config hash {} but the run is {}; rerun `paultrap waveform`",
            wpath.display(),
            w.config_hash,
            run.config_hash()
        )));
    }
    if w.electrode_names != basis.electrode_names() {
        return Err(CliError::config("waveform electrodes do not match the solved basis; rerun `paultrap waveform`"));
    }
    if args.durations_us.is_empty() {
        return Err(CliError::config("--durations-us needs at least one value"));
    }
    for d in &args.durations_us {
        positive("--durations-us", *d)?;
    }
    let ramp = match args.ramp {
        RampArg::Smooth => Ramp::Smooth,
        RampArg::Linear => Ramp::Linear,
    };
    let tube = tube_basis(basis.as_ref(), &w.positions, args.tube_radius_um, args.tube_step_um).map_err(paultrap::Error::from)?;
    let opts = ExcitationOptions {
        samples_per_period: args.samples_per_period,
        settle_periods: args.settle_periods,
        rf_phase: args.rf_phase_rad,
        verify: !args.no_verify,
        ..ExcitationOptions::default()
    };
    let mut results: Vec<ExcitationResult> = Vec::new();
    for &d in &args.durations_us {
        let sched = TransportSchedule::new(w.clone(), d, ramp)?;
        let r = transport_excitation(&tube, &s.drive, &s.species, &sched, &opts)?;
        match r.lost_at {
            Some(p) => println!("{d} us: ion lost at ({:.2}, {:.2}, {:.2}) um", p.x, p.y, p.z),
            None => println!("{d} us: axial gain {:.4} quanta", r.axial_gain()),
        }
        results.push(r);
    }
    let mut t = ExcitationResult::table(&results);
    t.set_meta("ramp", format!("{:?}", ramp).to_lowercase());
    run.write_table("excitation.csv", "excitation", t)?;
    if let Some(stride) = args.trajectory_stride {
        let d = args.durations_us.iter().copied().fold(0.0, f64::max);
        let sched = TransportSchedule::new(w.clone(), d, ramp)?;
        let start = well_point(&tube, &w, &s)?;
        let initial = IonState::secular_rest(&tube, &s.drive, &s.species, start, args.rf_phase_rad)?;
        let iopts = IntegrateOptions {
            stride: stride.max(1),
            rf_phase: args.rf_phase_rad,
            ..IntegrateOptions::for_drive(&s.drive, args.samples_per_period, d + args.settle_periods * s.drive.period() * 1e6)
        };
        let traj = integrate(&tube, &s.drive, &DcSource::Schedule { schedule: &sched, start: 0.0 }, &s.species, &initial, &iopts)?;
        let mut tt = traj.to_table();
        tt.set_meta("duration_us", fmt_f64(d));
        run.write_table("trajectory.csv", "trajectory", tt)?;
    }
    Ok(())
}

fn well_point(basis: &dyn ElectrodeBasis, w: &Waveform, s: &Scenario) -> CliResult<Point> {
    let p0 = w.positions[0];
    let box_ = (p0 - Vec3::repeat(5.0), p0 + Vec3::repeat(5.0));
    let opts = MinimizeOptions { tolerance: 1e-6, max_iterations: 200, ..Default::default() };
    Ok(find_minimum(basis, &w.voltages[0], &s.drive, &s.species, &p0, box_, &opts)?.point)
}
