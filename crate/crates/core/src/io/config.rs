use super::filter::FilterThresholds;
use super::overlay::OverlayOptions;
use super::IoError;
use crate::baselines::CamHeightPrior;
use crate::prior::PriorTable;
use crate::solver::{Method, RefinementConfig};
use crate::synth::{NoiseModel, SceneRanges};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Objects per generated scene.
    pub objects: usize,
    pub ranges: SceneRanges,
    pub noise: NoiseModel,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            objects: 5,
            // Small enough boxes would be dropped by the default filter.
            ranges: SceneRanges {
                min_box_height: FilterThresholds::default().box_height[0],
                ..SceneRanges::default()
            },
            noise: NoiseModel::default(),
        }
    }
}

/// Everything the command-line tool can be configured with. Every field has
/// a default, so an empty file is a valid configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolkitConfig {
    pub method: Method,
    pub priors: PriorTable,
    pub refinement: RefinementConfig,
    pub cam_height_prior: CamHeightPrior,
    pub filter: FilterThresholds,
    pub overlay: OverlayOptions,
    pub synth: SynthConfig,
}

impl ToolkitConfig {
    pub fn from_toml(text: &str) -> Result<Self, IoError> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    pub fn validate(&self) -> Result<(), IoError> {
        self.priors
            .validate()
            .map_err(|e| IoError::Config(e.to_string()))?;
        self.refinement
            .validate()
            .map_err(|e| IoError::Config(e.to_string()))?;
        if !(self.cam_height_prior.sigma_m > 0.0) {
            return Err(IoError::Config(
                "cam_height_prior.sigma_m must be positive".into(),
            ));
        }
        if !(self.overlay.reference_height_m > 0.0) {
            return Err(IoError::Config(
                "overlay.reference_height_m must be positive".into(),
            ));
        }
        self.filter.validate()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("configuration serializes to JSON");
        hex::encode(Sha256::digest(&canonical))
    }
}
