use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compress::CompressConfig;
use crate::error::{Error, Result};
use crate::features::FeatureRecipe;
use crate::hag::HagBinning;
use crate::learn::{HagLossKind, LossConfig, TrainConfig};
use crate::partition::PartitionConfig;

/// Radii must agree between partition and compression to this precision.
const RADIUS_MATCH: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossSection {
    pub lambda: f64,
    pub hag_loss: HagLossKind,
}

impl Default for LossSection {
    fn default() -> Self {
        let d = LossConfig::default();
        Self {
            lambda: d.lambda,
            hag_loss: d.hag_loss,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: vec![16, 16],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    #[serde(flatten)]
    pub optimizer: TrainConfig,
    /// Upper bound on training samples; larger pools are subsampled with the train seed.
    pub max_samples: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            optimizer: TrainConfig::default(),
            max_samples: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DtmConfig {
    pub cell_size: f64,
}

impl Default for DtmConfig {
    fn default() -> Self {
        Self { cell_size: 1.0 }
    }
}

/// Every tunable of the pipeline, loaded from one TOML file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub partition: PartitionConfig,
    pub compress: CompressConfig,
    pub features: FeatureRecipe,
    pub hag: HagBinning,
    pub loss: LossSection,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub dtm: DtmConfig,
    /// Checkpoint used by predict and evaluate runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classifier: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let (Some(c), Some(dir)) = (&cfg.classifier, path.parent()) {
            if c.is_relative() {
                cfg.classifier = Some(dir.join(c));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            lambda: self.loss.lambda,
            hag_binning: self.hag.clone(),
            hag_loss: self.loss.hag_loss,
        }
    }

    /// Checks every section and the radii shared by partition and compression.
    pub fn validate(&self) -> Result<()> {
        self.partition.validate()?;
        self.compress.validate()?;
        let p = &self.partition;
        let c = &self.compress;
        if (p.outer_radius - c.outer_radius).abs() > RADIUS_MATCH
            || (p.inner_radius - c.inner_radius).abs() > RADIUS_MATCH
        {
            return Err(Error::Config(format!(
                "partition radii (outer {}, inner {}) differ from compression radii (outer {}, inner {})",
                p.outer_radius, p.inner_radius, c.outer_radius, c.inner_radius
            )));
        }
        self.features.validate()?;
        self.loss_config().validate()?;
        self.train.optimizer.validate()?;
        if self.model.hidden.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        if self.train.max_samples == 0 {
            return Err(Error::Config("max_samples must be positive".into()));
        }
        if !(self.dtm.cell_size > 0.0 && self.dtm.cell_size.is_finite()) {
            return Err(Error::Config(format!(
                "DTM cell size must be positive, got {}",
                self.dtm.cell_size
            )));
        }
        Ok(())
    }

    /// Sets both the partition and compression outer radius.
    pub fn set_outer_radius(&mut self, r: f64) {
        self.partition.outer_radius = r;
        self.compress.outer_radius = r;
    }

    /// Sets both the partition and compression inner radius.
    pub fn set_inner_radius(&mut self, r: f64) {
        self.partition.inner_radius = r;
        self.compress.inner_radius = r;
    }
}
