//! Run configuration, read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::DepthQuota;
use crate::explore::ExplorerConfig;
use crate::extract::DomainLabel;
use crate::manifold::{GtConfig, ManifoldConfig};
use crate::oracle::OracleConfig;
use crate::topics::TopicConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("bad config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SliceSettings {
    pub id: String,
    pub roots: Vec<String>,
    pub domain_label: DomainLabel,
    /// Also project to three dimensions.
    pub project_3d: bool,
}

impl Default for SliceSettings {
    fn default() -> Self {
        Self {
            id: "econ".into(),
            roots: vec!["inflation".into(), "interest rates".into(), "unemployment".into()],
            domain_label: DomainLabel::RootTopic,
            project_3d: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSettings {
    pub questions: DepthQuota,
    pub statements: DepthQuota,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderSettings {
    pub dim: usize,
    pub seed: u64,
}

impl Default for EncoderSettings {
    fn default() -> Self {
        Self { dim: 256, seed: 0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LcmConfig {
    pub slice: SliceSettings,
    pub topics: TopicConfig,
    pub corpus: CorpusSettings,
    pub oracle: OracleConfig,
    pub encoder: EncoderSettings,
    pub gt: GtConfig,
    pub manifold: ManifoldConfig,
    pub explorer: ExplorerConfig,
}

impl LcmConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let id = &self.slice.id;
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return bad(format!("slice id {id:?} must be non-empty [A-Za-z0-9_-]"));
        }
        if self.slice.roots.iter().all(|r| r.trim().is_empty()) {
            return bad("at least one root topic is required".into());
        }
        if self.corpus.questions.per_topic == 0 || self.corpus.statements.per_topic == 0 {
            return bad("per-topic quotas must be positive".into());
        }
        if self.encoder.dim == 0 {
            return bad("encoder dim must be positive".into());
        }
        self.oracle.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.gt.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.explorer.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }
}
