//! Run configuration: a TOML file whose every field has a default, plus
//! dotted-path overrides (`--set solver.dt=0.0038`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use seabed_core::bayes::NoiseModel;
use seabed_core::material::{MaterialConstants, MaterialSampling};
use seabed_core::mesh::{equidistant_sensors, Domain, Mesh};
use seabed_core::prior::{KlConfig, OutOfPriorConfig, SBounds};
use seabed_core::samplers::{AdaptConfig, FesConfig};
use seabed_core::solver::{ForwardContext, SolverConfig};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshDims {
    pub nx: usize,
    pub ny: usize,
}

/// `count` sensors on consecutive top nodes of an `nx`-cell mesh. Overrides
/// `solver.sensor_xs` when present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorLayout {
    pub count: usize,
    pub nx: usize,
}

/// Synthetic data generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    pub nx: usize,
    pub ny: usize,
    /// Solver steps per observation interval on the data mesh.
    pub substeps: usize,
    pub noise: NoiseModel,
    pub noise_seed: u64,
    /// Seed and regularity of the prior draw used when no seabed is given.
    pub truth_seed: u64,
    pub truth_s: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            nx: 377,
            ny: 189,
            substeps: 2,
            noise: NoiseModel::default(),
            noise_seed: 1,
            truth_seed: 7,
            truth_s: 0.75,
        }
    }
}

/// Step sizes and their adaptation, shared by all samplers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    pub beta_h: f64,
    pub beta_s: f64,
    pub adapt: AdaptConfig,
    pub bounds: SBounds,
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { beta_h: 0.05, beta_s: 0.1, adapt: AdaptConfig::default(), bounds: SBounds::default(), seed: 0 }
    }
}

/// Fixed-regularity pCN run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PcnSchedule {
    pub s: f64,
    pub n_warmup: usize,
    pub n_sample: usize,
}

impl Default for PcnSchedule {
    fn default() -> Self {
        Self { s: 0.75, n_warmup: 10_000, n_sample: 20_000 }
    }
}

/// Metropolis-within-Gibbs run; warm-up and online phases use different
/// inner-loop lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MwgSchedule {
    pub s_init: f64,
    pub n_warmup: usize,
    pub n_inner_warmup: usize,
    pub n_sample: usize,
    pub n_inner_online: usize,
}

impl Default for MwgSchedule {
    fn default() -> Self {
        Self { s_init: 2.0, n_warmup: 20, n_inner_warmup: 250, n_sample: 1000, n_inner_online: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FesSchedule {
    pub s: f64,
    #[serde(flatten)]
    pub ensemble: FesConfig,
    pub n_sample: usize,
}

impl Default for FesSchedule {
    fn default() -> Self {
        Self { s: 0.75, ensemble: FesConfig { n_warmup: 250, ..FesConfig::default() }, n_sample: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Inference (and `forward`) mesh.
    pub mesh: MeshDims,
    pub domain: Domain,
    pub material: MaterialConstants,
    pub material_sampling: MaterialSampling,
    pub solver: SolverConfig,
    pub sensors: Option<SensorLayout>,
    pub kl: KlConfig,
    pub mean_offset: f64,
    pub data: DataConfig,
    pub chain: ChainConfig,
    pub pcn: PcnSchedule,
    pub mwg: MwgSchedule,
    pub fes: FesSchedule,
    pub oop: OutOfPriorConfig,
    /// Worker threads; `SEABED_THREADS` takes precedence.
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mesh: MeshDims { nx: 188, ny: 95 },
            domain: Domain::default(),
            material: MaterialConstants::default(),
            material_sampling: MaterialSampling::default(),
            solver: SolverConfig::default(),
            sensors: None,
            kl: KlConfig::default(),
            mean_offset: 0.0,
            data: DataConfig::default(),
            chain: ChainConfig::default(),
            pcn: PcnSchedule::default(),
            mwg: MwgSchedule::default(),
            fes: FesSchedule::default(),
            oop: OutOfPriorConfig::default(),
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> CliResult<Self> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                text.parse::<toml::Table>().map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for ov in overrides {
            apply_override(&mut value, ov)?;
        }
        let cfg: RunConfig = toml::Value::Table(value)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.finish()
    }

    /// Resolves the sensor layout and validates the pieces used everywhere.
    fn finish(mut self) -> CliResult<Self> {
        if let Some(layout) = self.sensors {
            self.solver.sensor_xs = equidistant_sensors(layout.count, layout.nx, self.domain)?;
        }
        self.solver.validate()?;
        self.kl.validate()?;
        self.material.validate()?;
        self.chain.bounds.validate()?;
        self.oop.validate()?;
        Ok(self)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn forward_context(&self, dims: MeshDims, substeps: usize) -> CliResult<ForwardContext> {
        let mesh = Mesh::new(dims.nx, dims.ny, self.domain)?;
        let cfg = SolverConfig { substeps, ..self.solver.clone() };
        let mut ctx = ForwardContext::new(mesh, self.material, cfg)?;
        ctx.sampling = self.material_sampling;
        Ok(ctx)
    }

    pub fn inference_context(&self) -> CliResult<ForwardContext> {
        self.forward_context(self.mesh, self.solver.substeps)
    }

    pub fn data_context(&self) -> CliResult<ForwardContext> {
        self.forward_context(MeshDims { nx: self.data.nx, ny: self.data.ny }, self.data.substeps)
    }
}

/// Applies `a.b.c=value`, where `value` is parsed as a TOML value and falls
/// back to a bare string.
fn apply_override(table: &mut toml::Table, spec: &str) -> CliResult<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override '{spec}' is not of the form key=value")))?;
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Usage(format!("bad override key '{path}'")));
    }
    let mut node = table;
    for k in &keys[..keys.len() - 1] {
        let entry = node.entry(k.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override '{path}': '{k}' is not a table")))?;
    }
    node.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}
