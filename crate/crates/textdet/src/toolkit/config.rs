//! Run configuration: every tunable of the pipeline in one TOML-backed
//! struct, with the stock defaults embedded so a partial file only needs to
//! name what it overrides.

use serde::{Deserialize, Serialize};

use crate::anchors::APLConfig;
use crate::losses::{LossNorm, LossWeights, OhemPolicy};
use crate::postprocess::FusionConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub input_width: u32,
    pub input_height: u32,
    /// Stride of the pixel-branch prediction grid.
    pub pixel_stride: u32,
    /// Shrunk-polygon ratio for pixel label assignment.
    pub shrink_ratio: f64,
    /// Anchor-matching IoU threshold.
    pub match_iou: f64,
    pub loss_norm: LossNorm,
    pub apl: APLConfig,
    pub fusion: FusionConfig,
    pub loss_weights: LossWeights,
    pub ohem: OhemPolicy,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input_width: 256,
            input_height: 256,
            pixel_stride: 4,
            shrink_ratio: 0.3,
            match_iou: 0.5,
            loss_norm: LossNorm::default(),
            apl: APLConfig::default(),
            fusion: FusionConfig::default(),
            loss_weights: LossWeights::default(),
            ohem: OhemPolicy::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_width == 0 || self.input_height == 0 {
            return Err(Error::InvalidInput("zero input size".into()));
        }
        if self.pixel_stride == 0 {
            return Err(Error::InvalidInput("pixel stride must be >= 1".into()));
        }
        if !(0.0..0.5).contains(&self.shrink_ratio) {
            return Err(Error::InvalidInput(format!(
                "shrink ratio {} outside [0, 0.5)",
                self.shrink_ratio
            )));
        }
        if !(0.0..=1.0).contains(&self.match_iou) {
            return Err(Error::InvalidInput(format!(
                "match iou {} outside [0, 1]",
                self.match_iou
            )));
        }
        self.apl.validate()?;
        self.fusion.validate()?;
        self.loss_weights.validate()?;
        self.ohem.validate()?;
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load<P: AsRef<std::path::Path>>(path: P) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
