//! Effective run configuration: built-in defaults, overlaid by an optional
//! TOML config file, overlaid by CLI flags. The merged result is hashed
//! (SHA-256 of its canonical JSON) and echoed into every output file so a
//! report can always be traced back to the exact settings that produced it.

use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use whisperkit::acoustics::{PitchRange, SlopeBand};
use whisperkit::features::{FeatureConfig, FeatureKind};
use whisperkit::trainer::{ModelHyper, TrainConfig};

use crate::UsageError;

fn default_feature_kind() -> FeatureKind {
    FeatureKind::LogMel
}

/// Everything a run can be configured with. All sections optional in the
/// file; missing values fall back to defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EffectiveConfig {
    pub features: FeatureConfig,
    /// Which feature kind feeds the acoustic model.
    pub feature_kind: FeatureKind,
    pub model: ModelHyper,
    pub train: TrainConfig,
    pub slope_band: SlopeBand,
    pub pitch: PitchRange,
}

impl Default for EffectiveConfig {
    fn default() -> Self {
        Self {
            features: FeatureConfig::default(),
            feature_kind: default_feature_kind(),
            model: ModelHyper::default(),
            train: TrainConfig::default(),
            slope_band: SlopeBand::default(),
            pitch: PitchRange::default(),
        }
    }
}

impl EffectiveConfig {
    /// Defaults overlaid with the TOML file at `path`, when given.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config file {}", p.display()))
                    .map_err(UsageError::from_anyhow)?;
                let cfg: EffectiveConfig = toml::from_str(&text)
                    .with_context(|| format!("parsing config file {}", p.display()))
                    .map_err(UsageError::from_anyhow)?;
                Ok(cfg)
            }
        }
    }

    /// SHA-256 over the canonical JSON form (paths never enter the config,
    /// so the hash is location-independent).
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
