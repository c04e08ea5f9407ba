//! `diag`: measurement conversion formulas with unit-suffixed flags.

use clap::{Args, Subcommand};
use paultrap::constants::mhz_to_omega;
use paultrap::diagnostics::{
    beta_from_field, beta_from_sideband_ratio, heating_rate, micromotion_field, noise_from_heating, rescale_beta, sideband_ratio,
    LaserGeometry, MicromotionIndex, NoiseSpectralDensity,
};
use paultrap::hashing::config_hash;
use paultrap::table::{fmt_f64, Table};
use paultrap::IonSpecies;

use crate::run::{CliResult, Run};

#[derive(Args, Debug, Clone)]
pub struct Probe {
    /// Ion species label (ca40, be9).
    #[arg(long)]
    pub species: String,
    /// RF drive frequency Ω/2π (MHz).
    #[arg(long)]
    pub rf_mhz: f64,
    /// Probe laser wavelength (nm).
    #[arg(long)]
    pub lambda_nm: f64,
    /// Angle between beam and trap axis (degrees).
    #[arg(long)]
    pub angle_deg: f64,
}

#[derive(Subcommand, Debug, Clone)]
pub enum DiagCommand {
    /// Axial RF field amplitude from a micromotion modulation index.
    Micromotion {
        #[arg(long)]
        beta: f64,
        #[command(flatten)]
        probe: Probe,
    },
    /// Modulation index from an axial RF field amplitude.
    MicromotionBeta {
        #[arg(long)]
        field_v_per_m: f64,
        #[command(flatten)]
        probe: Probe,
    },
    /// Modulation index from a first-sideband to carrier Rabi frequency ratio.
    Sideband {
        #[arg(long)]
        ratio: f64,
    },
    /// Modulation index of another species in the same field and beam.
    Rescale {
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
    },
    /// Heating rate from an electric-field noise spectral density.
    Heating {
        /// S_E (V²/(m²·Hz)).
        #[arg(long)]
        noise_v2_per_m2_hz: f64,
        #[arg(long)]
        species: String,
        /// Mode frequency ω/2π (MHz).
        #[arg(long)]
        freq_mhz: f64,
    },
    /// Electric-field noise spectral density from a heating rate.
    Noise {
        /// Heating rate (quanta/s).
        #[arg(long)]
        rate_per_s: f64,
        #[arg(long)]
        species: String,
        /// Mode frequency ω/2π (MHz).
        #[arg(long)]
        freq_mhz: f64,
    },
}

struct Outcome {
    kind: &'static str,
    inputs: Vec<(&'static str, f64, &'static str)>,
    labels: Vec<(&'static str, String)>,
    output: (&'static str, f64, &'static str),
}

fn laser(p: &Probe) -> CliResult<LaserGeometry> {
    Ok(LaserGeometry::new(p.lambda_nm * 1e-9, p.angle_deg)?)
}

fn evaluate(cmd: &DiagCommand) -> CliResult<Outcome> {
    Ok(match cmd {
        DiagCommand::Micromotion { beta, probe } => {
            let sp = IonSpecies::builtin(&probe.species)?;
            let e = micromotion_field(&MicromotionIndex::axial(*beta)?, &sp, mhz_to_omega(probe.rf_mhz), &laser(probe)?)?;
            Outcome {
                kind: "micromotion",
                inputs: vec![("beta", *beta, "1"), ("rf", probe.rf_mhz, "MHz"), ("lambda", probe.lambda_nm, "nm"), ("angle", probe.angle_deg, "deg")],
                labels: vec![("species", sp.label)],
                output: ("axial_rf_field", e, "V/m"),
            }
        }
        DiagCommand::MicromotionBeta { field_v_per_m, probe } => {
            let sp = IonSpecies::builtin(&probe.species)?;
            let b = beta_from_field(*field_v_per_m, &sp, mhz_to_omega(probe.rf_mhz), &laser(probe)?)?;
            Outcome {
                kind: "micromotion-beta",
                inputs: vec![
                    ("axial_rf_field", *field_v_per_m, "V/m"),
                    ("rf", probe.rf_mhz, "MHz"),
                    ("lambda", probe.lambda_nm, "nm"),
                    ("angle", probe.angle_deg, "deg"),
                ],
                labels: vec![("species", sp.label)],
                output: ("beta", b.beta, "1"),
            }
        }
        DiagCommand::Sideband { ratio } => {
            let b = beta_from_sideband_ratio(*ratio)?;
            log::info!("check: J1/J0 at the solution = {}", sideband_ratio(b.beta));
            Outcome { kind: "sideband", inputs: vec![("ratio", *ratio, "1")], labels: vec![], output: ("beta", b.beta, "1") }
        }
        DiagCommand::Rescale { beta, from, to } => {
            let (a, b) = (IonSpecies::builtin(from)?, IonSpecies::builtin(to)?);
            let r = rescale_beta(&MicromotionIndex::axial(*beta)?, &a, &b);
            Outcome {
                kind: "rescale",
                inputs: vec![("beta", *beta, "1")],
                labels: vec![("from", a.label), ("to", b.label)],
                output: ("beta", r.beta, "1"),
            }
        }
        DiagCommand::Heating { noise_v2_per_m2_hz, species, freq_mhz } => {
            let sp = IonSpecies::builtin(species)?;
            let w = mhz_to_omega(*freq_mhz);
            let rate = heating_rate(&NoiseSpectralDensity::new(*noise_v2_per_m2_hz, w)?, &sp, w)?;
            Outcome {
                kind: "heating",
                inputs: vec![("noise", *noise_v2_per_m2_hz, "V^2/(m^2 Hz)"), ("frequency", *freq_mhz, "MHz")],
                labels: vec![("species", sp.label)],
                output: ("heating_rate", rate, "quanta/s"),
            }
        }
        DiagCommand::Noise { rate_per_s, species, freq_mhz } => {
            let sp = IonSpecies::builtin(species)?;
            let n = noise_from_heating(*rate_per_s, &sp, mhz_to_omega(*freq_mhz))?;
            Outcome {
                kind: "noise",
                inputs: vec![("heating_rate", *rate_per_s, "quanta/s"), ("frequency", *freq_mhz, "MHz")],
                labels: vec![("species", sp.label)],
                output: ("noise", n.s_e, "V^2/(m^2 Hz)"),
            }
        }
    })
}

pub fn diag(run: &mut Run, cmd: &DiagCommand) -> CliResult<()> {
    let o = evaluate(cmd)?;
    let mut t = Table::new(["quantity", "value", "unit", "role"]).with_meta("formula", o.kind);
    for (k, v) in &o.labels {
        t.set_meta(*k, v);
    }
    for (name, v, unit) in &o.inputs {
        t.push_cells(vec![name.to_string(), fmt_f64(*v), unit.to_string(), "input".into()]);
    }
    let (name, v, unit) = o.output;
    t.push_cells(vec![name.into(), fmt_f64(v), unit.into(), "output".into()]);
    run.set_config_hash(&config_hash(&(o.kind, &t.meta, &t.rows[..t.rows.len() - 1])));
    run.write_table(&format!("diag_{}.csv", o.kind), "diag", t)?;
    println!("{name} = {} {unit}", fmt_f64(v));
    Ok(())
}
