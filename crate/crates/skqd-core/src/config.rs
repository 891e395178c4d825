//! Run configuration: strict-schema JSON config files, material presets, and
//! resolution into the typed inputs of the pipeline.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::EdCaps;
use crate::error::{Error, Result};
use crate::evolution::{EvolutionConfig, Method, EXACT_TOL_DEFAULT};
use crate::hamiltonian::ModelParams;
use crate::lattice::Geometry;
use crate::sampling::NoiseModel;
use crate::skqd::ShotSpec;
use crate::states::{InitialStateSpec, LayoutKind, StateKind};

/// Quasi-1D spin-½ magnets with reported exchange coupling (meV) and
/// anisotropy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaterialPreset {
    pub name: &'static str,
    pub j_mev: f64,
    pub delta: f64,
}

pub const MATERIAL_PRESETS: [MaterialPreset; 7] = [
    MaterialPreset { name: "Cs2CoCl4", j_mev: 0.23, delta: 0.25 },
    MaterialPreset { name: "CuPzN", j_mev: 0.91, delta: 1.00 },
    MaterialPreset { name: "KCuF3", j_mev: 33.5, delta: 1.00 },
    MaterialPreset { name: "BaCo2V2O8", j_mev: 3.05, delta: 1.90 },
    MaterialPreset { name: "SrCo2V2O8", j_mev: 3.7, delta: 2.10 },
    MaterialPreset { name: "CsCoBr3", j_mev: 1.25, delta: 6.25 },
    MaterialPreset { name: "CsCoCl3", j_mev: 0.595, delta: 10.42 },
];

pub fn find_preset(name: &str) -> Option<&'static MaterialPreset> {
    MATERIAL_PRESETS
        .iter()
        .find(|p| p.name.eq_ignore_ascii_case(name))
}

// ---------------------------------------------------------------------------
// Config file schema (strict: unknown keys rejected)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub init: InitSection,
    #[serde(default)]
    pub evolution: EvolutionSection,
    /// Shots per Krylov state.
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_shots() -> u64 {
    300_000
}

fn default_output_dir() -> PathBuf {
    PathBuf::from(".")
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelSection::default(),
            init: InitSection::default(),
            evolution: EvolutionSection::default(),
            shots: default_shots(),
            noise: None,
            sweep: None,
            seed: 0,
            output_dir: default_output_dir(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n: usize,
    /// Exchange coupling; explicit values win over a preset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default)]
    pub h_z: f64,
    #[serde(default)]
    pub h_x: f64,
    #[serde(default)]
    pub geometry: GeometryKind,
    /// Material preset name supplying J (meV) and Δ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    #[default]
    Chain,
    Rect,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    #[serde(default = "default_init_kind")]
    pub kind: InitKind,
    /// Sector for `w_state_product`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default = "default_layout")]
    pub layout: LayoutName,
}

impl Default for InitSection {
    fn default() -> Self {
        InitSection { kind: default_init_kind(), k: None, layout: default_layout() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    SingletProduct,
    Neel,
    WStateProduct,
}

fn default_init_kind() -> InitKind {
    InitKind::SingletProduct
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutName {
    Identity,
    Snake,
}

fn default_layout() -> LayoutName {
    LayoutName::Snake
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_krylov_dim")]
    pub krylov_dim: usize,
    #[serde(default = "default_method")]
    pub method: MethodName,
    /// Trotter repetitions per step.
    #[serde(default = "default_reps")]
    pub reps: usize,
    /// Exact-evolution tolerance.
    #[serde(default = "default_exact_tol")]
    pub tolerance: f64,
}

impl Default for EvolutionSection {
    fn default() -> Self {
        EvolutionSection {
            dt: default_dt(),
            krylov_dim: default_krylov_dim(),
            method: default_method(),
            reps: default_reps(),
            tolerance: default_exact_tol(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Trotter2,
    Exact,
}

fn default_dt() -> f64 {
    0.3
}
fn default_krylov_dim() -> usize {
    5
}
fn default_method() -> MethodName {
    MethodName::Trotter2
}
fn default_reps() -> usize {
    3
}
fn default_exact_tol() -> f64 {
    EXACT_TOL_DEFAULT
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub readout_flip_prob: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hz_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hz_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hz_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector_window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sectors: Option<Vec<usize>>,
}

impl SweepSection {
    pub fn grid(&self) -> Result<Vec<f64>> {
        match (&self.hz_grid, self.hz_min, self.hz_max, self.steps) {
            (Some(grid), None, None, None) => {
                if grid.is_empty() {
                    Err(Error::Config("sweep.hz_grid is empty".into()))
                } else {
                    Ok(grid.clone())
                }
            }
            (None, Some(lo), Some(hi), Some(steps)) if steps >= 1 => {
                Ok(crate::sweep::linspace(lo, hi, steps))
            }
            _ => Err(Error::Config(
                "sweep needs either hz_grid or all of hz_min/hz_max/steps".into(),
            )),
        }
    }
}

// ---------------------------------------------------------------------------
// Resolution
// ---------------------------------------------------------------------------

/// Typed pipeline inputs after defaults and presets are applied.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub params: ModelParams,
    pub init: InitialStateSpec,
    pub evolution: EvolutionConfig,
    pub shots: ShotSpec,
    pub noise: Option<NoiseModel>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub caps: EdCaps,
    /// The effective configuration, echoed into outputs for provenance.
    pub echo: RunConfig,
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn resolve(&self) -> Result<ResolvedRun> {
        if self.model.n < 1 {
            return Err(Error::Config("model.n must be at least 1".into()));
        }
        let (preset_j, preset_delta) = match &self.model.preset {
            Some(name) => {
                let p = find_preset(name).ok_or_else(|| {
                    Error::Config(format!(
                        "unknown preset '{name}'; see the materials subcommand"
                    ))
                })?;
                (Some(p.j_mev), Some(p.delta))
            }
            None => (None, None),
        };
        let geometry = match self.model.geometry {
            GeometryKind::Chain => Geometry::chain(self.model.n)?,
            GeometryKind::Rect => Geometry::rectangle(self.model.n)?,
        };
        let params = ModelParams {
            j: self.model.j.or(preset_j).unwrap_or(1.0),
            delta: self.model.delta.or(preset_delta).unwrap_or(1.0),
            h_z: self.model.h_z,
            h_x: self.model.h_x,
            geometry,
        };
        params.validate().map_err(|e| Error::Config(e.to_string()))?;

        let kind = match self.init.kind {
            InitKind::SingletProduct => StateKind::SingletProduct,
            InitKind::Neel => StateKind::Neel,
            InitKind::WStateProduct => {
                let k = self.init.k.ok_or_else(|| {
                    Error::Config("init.kind = w_state_product needs init.k".into())
                })?;
                StateKind::WStateProduct { k }
            }
        };
        if self.init.kind != InitKind::WStateProduct && self.init.k.is_some() {
            return Err(Error::Config("init.k only applies to w_state_product".into()));
        }
        let layout = match self.init.layout {
            LayoutName::Identity => LayoutKind::Identity,
            LayoutName::Snake => LayoutKind::Snake,
        };
        let init = InitialStateSpec { kind, layout };
        init.validate(self.model.n).map_err(|e| Error::Config(e.to_string()))?;

        let method = match self.evolution.method {
            MethodName::Trotter2 => Method::Trotter2 { reps: self.evolution.reps },
            MethodName::Exact => Method::Exact { tol: self.evolution.tolerance },
        };
        let evolution = EvolutionConfig {
            dt: self.evolution.dt,
            krylov_dim: self.evolution.krylov_dim,
            method,
        };
        evolution.validate().map_err(|e| Error::Config(e.to_string()))?;

        if self.shots < 1 {
            return Err(Error::Config("shots must be at least 1".into()));
        }
        let noise = self
            .noise
            .map(|n| NoiseModel { readout_flip_prob: n.readout_flip_prob });
        if let Some(n) = &noise {
            n.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(sweep) = &self.sweep {
            sweep.grid()?;
            if let Some(sectors) = &sweep.sectors {
                for &k in sectors {
                    if k > self.model.n / 2 {
                        return Err(Error::Config(format!(
                            "sweep.sectors entry {k} exceeds n/2 = {}",
                            self.model.n / 2
                        )));
                    }
                }
            }
        }

        Ok(ResolvedRun {
            params,
            init,
            evolution,
            shots: ShotSpec::Count(self.shots),
            noise,
            seed: self.seed,
            output_dir: self.output_dir.clone(),
            caps: EdCaps::default(),
            echo: self.clone(),
        })
    }
}
