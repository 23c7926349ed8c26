//! Project configuration: one TOML file drives the whole pipeline.
//!
//! Every field has a default; an empty file (or no file at all) runs the
//! desk-scale synthetic pipeline end to end.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DecalibRange, Representation};
use crate::model::ModelConfig;
use crate::pipeline::FilterMode;
use crate::sampling::SampleParams;
use crate::scene::SceneConfig;
use crate::tensor::AdamParams;

/// Training schedule and encoding settings for one expert.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub steps: u64,
    pub seed: u64,
    pub solver: AdamParams,
    /// Per-axis decalibration bounds the expert is trained for.
    pub x_max_m: f64,
    pub y_max_deg: f64,
    pub densify_kernel: usize,
    pub val_size: usize,
    pub val_every: u64,
    pub loss_every: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            steps: 20_000,
            seed: 1,
            solver: AdamParams::default(),
            x_max_m: 0.3,
            y_max_deg: 5.0,
            densify_kernel: 5,
            val_size: 200,
            val_every: 2000,
            loss_every: 100,
        }
    }
}

impl TrainingConfig {
    pub fn range(&self) -> Result<DecalibRange> {
        DecalibRange::new(self.x_max_m, self.y_max_deg)
    }
}

/// Expert-cascade settings for the inference side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct CascadeConfig {
    /// Checkpoint paths ordered coarsest to finest.
    pub experts: Vec<PathBuf>,
    pub passes_per_stage: usize,
}

/// Temporal-filter settings for sequence evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub mode: FilterMode,
    /// Frame window; absent means the whole sequence.
    pub window_frames: Option<usize>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            mode: FilterMode::Median,
            window_frames: None,
        }
    }
}

/// The complete project configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ProjectConfig {
    pub scene: SceneConfig,
    pub model: ModelConfig,
    pub training: TrainingConfig,
    pub cascade: CascadeConfig,
    pub filter: FilterConfig,
}

impl ProjectConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()?).map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Sampling parameters implied by the training section and model
    /// representation.
    pub fn sample_params(&self) -> Result<SampleParams> {
        Ok(SampleParams {
            range: self.training.range()?,
            representation: self.model.representation,
            balance_factor: self.model.balance_factor,
            densify_kernel: self.training.densify_kernel,
        })
    }

    /// Model configuration adjusted so the output width matches the
    /// representation (keeps hand-edited configs consistent).
    pub fn model_config(&self) -> ModelConfig {
        self.model.clone().with_representation(self.model.representation)
    }
}

/// Representation override used by the CLI and comparison harness.
pub fn with_representation(cfg: &ProjectConfig, rep: Representation) -> ProjectConfig {
    let mut out = cfg.clone();
    out.model = out.model.with_representation(rep);
    out
}
