//! Run configuration: one TOML document merged over built-in defaults.
//!
//! Every table and key is optional; missing entries take the defaults below,
//! which reproduce the headline 11x11, 4000-sample, 5000-epoch tanh run.
//! Command-line flags are applied on top by the CLI.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{FolError, Result};
use crate::fem::BoundaryConditions;
use crate::mesh::{build_mesh, Mesh};
use crate::microstructure::SamplerConfig;
use crate::training::TrainingConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            nx: 11,
            ny: 11,
            lx: 1.0,
            ly: 1.0,
        }
    }
}

/// Applied temperatures on the left and right edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundaryConfig {
    pub t_left: f64,
    pub t_right: f64,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        BoundaryConfig {
            t_left: 1.0,
            t_right: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub count: usize,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig { count: 4000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Write an intermediate checkpoint every this many epochs (0 = never).
    pub checkpoint_every: usize,
    /// Fine grid resolution for exported fields.
    pub fine_resolution: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            checkpoint_every: 1000,
            fine_resolution: 165,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub repeats: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { repeats: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub mesh: MeshConfig,
    pub boundary: BoundaryConfig,
    pub sampler: SamplerConfig,
    pub generate: GenerateConfig,
    pub training: TrainingConfig,
    pub output: OutputConfig,
    pub bench: BenchConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Defaults overlaid with the file at `path`, if any.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| FolError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| FolError::parse(path, e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config serialises")
    }

    pub fn mesh(&self) -> Result<Mesh> {
        build_mesh(self.mesh.nx, self.mesh.ny, self.mesh.lx, self.mesh.ly)
    }

    pub fn boundary_conditions(&self, mesh: &Mesh) -> BoundaryConditions {
        BoundaryConditions::left_right(mesh, self.boundary.t_left, self.boundary.t_right)
    }
}

/// Command-line values that override the configuration file. `None` keeps
/// the file or default value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub threads: Option<usize>,
    pub count: Option<usize>,
    pub seed: Option<u64>,
    pub no_rings: bool,
    pub mode: Option<crate::training::TrainingMode>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub activation: Option<crate::neural::ActivationKind>,
    pub network: Option<crate::neural::NetworkMode>,
    pub lambda_b: Option<f64>,
    pub learning_rate: Option<f64>,
    pub checkpoint_every: Option<usize>,
    pub fine_resolution: Option<usize>,
    pub repeats: Option<usize>,
}

impl Overrides {
    /// Apply to `config`. The seed drives both sampling and training.
    pub fn apply(&self, config: &mut RunConfig) {
        fn set<T: Clone>(slot: &mut T, value: &Option<T>) {
            if let Some(v) = value {
                *slot = v.clone();
            }
        }
        set(&mut config.threads, &self.threads);
        set(&mut config.generate.count, &self.count);
        set(&mut config.sampler.seed, &self.seed);
        set(&mut config.training.seed, &self.seed);
        if self.no_rings {
            config.sampler.no_rings = true;
        }
        set(&mut config.training.mode, &self.mode);
        set(&mut config.training.epochs, &self.epochs);
        set(&mut config.training.batch_size, &self.batch_size);
        set(&mut config.training.activation, &self.activation);
        set(&mut config.training.network, &self.network);
        set(&mut config.training.lambda_b, &self.lambda_b);
        set(&mut config.training.adam.learning_rate, &self.learning_rate);
        set(&mut config.output.checkpoint_every, &self.checkpoint_every);
        set(&mut config.output.fine_resolution, &self.fine_resolution);
        set(&mut config.bench.repeats, &self.repeats);
    }
}

/// Default path of a sibling output: `dir/run.json` + `history.csv` ->
/// `dir/run.history.csv`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}
