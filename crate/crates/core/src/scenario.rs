//! Complete run configurations (geometry recipe, mesh, solver, drive, ion)
//! and the named presets for the standard trap designs.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constants::{DriveConfig, IonSpecies};
use crate::error::{Error, Result};
use crate::field::{BasisCache, FieldBasis, SolverConfig};
use crate::geometry::{
    apply_perturbation, build_linear_trap, build_x_junction, panelize, JunctionParams, LinearTrapParams, MeshConfig,
    PanelMesh, Perturbation, Recipe, Refinement, TrapLayout,
};
use crate::hashing::ContentHasher;
use crate::Point;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub recipe: Recipe,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub perturbations: Vec<Perturbation>,
    pub mesh: MeshConfig,
    pub solver: SolverConfig,
    pub drive: DriveConfig,
    pub species: IonSpecies,
}

impl Scenario {
    pub fn layout(&self) -> Result<TrapLayout> {
        let mut layout = match &self.recipe {
            Recipe::LinearTrap(p) => build_linear_trap(p)?,
            Recipe::XJunction(p) => build_x_junction(p)?,
        };
        for p in &self.perturbations {
            layout = apply_perturbation(&layout, p)?;
        }
        Ok(layout)
    }

    pub fn panel_mesh(&self, layout: &TrapLayout) -> Result<PanelMesh> {
        Ok(panelize(layout, &self.mesh)?)
    }

    /// Solves (or fetches from `cache`) the basis of this scenario's geometry.
    pub fn solve(&self, cache: &BasisCache) -> Result<(TrapLayout, Arc<FieldBasis>)> {
        let layout = self.layout()?;
        let mesh = self.panel_mesh(&layout)?;
        let basis = cache.get_or_solve(&mesh, &self.solver)?;
        let basis = Arc::new(FieldBasis::clone(&basis).with_layout(&layout));
        Ok((layout, basis))
    }

    /// Hash of every setting that influences results.
    pub fn config_hash(&self) -> String {
        ContentHasher::new().json(self).finish_short()
    }

    pub fn landmark(&self, layout: &TrapLayout, name: &str) -> Result<Point> {
        layout
            .landmarks
            .get(name)
            .copied()
            .ok_or_else(|| Error::invalid(format!("layout has no landmark '{name}'")))
    }

    pub fn linear_params(&self) -> Option<&LinearTrapParams> {
        match &self.recipe {
            Recipe::LinearTrap(p) => Some(p),
            Recipe::XJunction(_) => None,
        }
    }

    pub fn junction_params(&self) -> Option<&JunctionParams> {
        match &self.recipe {
            Recipe::XJunction(p) => Some(p),
            Recipe::LinearTrap(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Seven-segment linear trap used for the gap, shaping and misalignment studies.
    Appendix7Seg,
    /// Double-junction design with the 230 µm open bridge.
    JunctionFinal,
    /// The same junction with the bridge closed.
    ClosedBridge,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Appendix7Seg, Preset::JunctionFinal, Preset::ClosedBridge];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Appendix7Seg => "appendix-7seg",
            Preset::JunctionFinal => "junction-final",
            Preset::ClosedBridge => "closed-bridge",
        }
    }

    pub fn recipe(self) -> Recipe {
        match self {
            Preset::Appendix7Seg => Recipe::LinearTrap(LinearTrapParams::appendix_seven_segment()),
            Preset::JunctionFinal => Recipe::XJunction(JunctionParams::final_design()),
            Preset::ClosedBridge => Recipe::XJunction(JunctionParams::closed_bridge()),
        }
    }

    /// Preset with its design drive: 370 V zero-peak at 2π×90 MHz for ⁹Be⁺.
    pub fn scenario(self) -> Scenario {
        let recipe = self.recipe();
        let mesh = match recipe {
            Recipe::LinearTrap(_) => linear_mesh(),
            Recipe::XJunction(_) => junction_mesh(),
        };
        Scenario {
            name: self.name().into(),
            recipe,
            perturbations: Vec::new(),
            mesh,
            solver: SolverConfig::default(),
            drive: design_drive(),
            species: IonSpecies::beryllium9(),
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
            Error::invalid(format!("unknown preset '{s}' (expected one of {})", names.join(", ")))
        })
    }
}

/// 370 V zero-peak at 2π×90 MHz.
pub fn design_drive() -> DriveConfig {
    DriveConfig::from_mhz(370.0, 90.0).expect("valid constant drive")
}

/// 200 V zero-peak at 2π×36 MHz.
pub fn operating_drive() -> DriveConfig {
    DriveConfig::from_mhz(200.0, 36.0).expect("valid constant drive")
}

/// 10 µm panels around the axis over the central segments, z strips of 40 µm.
pub fn linear_mesh() -> MeshConfig {
    MeshConfig { growth: 0.5, ..MeshConfig::uniform(100.0) }
        .with_refinement(Refinement::new(Point::new(-150.0, -120.0, -400.0), Point::new(150.0, 120.0, 400.0), 10.0))
        .with_axial_step(40.0)
}

/// 10 µm panels around the junction and along the +z arm to the experimental zone.
pub fn junction_mesh() -> MeshConfig {
    MeshConfig { growth: 0.5, ..MeshConfig::uniform(100.0) }
        .with_refinement(Refinement::new(Point::new(-150.0, -120.0, -150.0), Point::new(150.0, 120.0, 800.0), 10.0))
        .with_axial_step(40.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_by_name() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
            let s = p.scenario();
            s.layout().unwrap();
            let back: Scenario = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
            assert_eq!(back, s);
            assert_eq!(back.config_hash(), s.config_hash());
        }
        assert!("nope".parse::<Preset>().is_err());
    }

    #[test]
    fn preset_meshes_fit_the_budget() {
        for p in Preset::ALL {
            let s = p.scenario();
            let m = s.panel_mesh(&s.layout().unwrap()).unwrap();
            assert!(m.len() < 12_000, "{} has {} panels", p.name(), m.len());
        }
    }
}
