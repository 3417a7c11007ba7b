//! Experiment configuration: a single JSON document merging training
//! settings, variant flags and baseline knobs. CLI flags override file keys;
//! unknown keys are rejected. Every output artifact is stamped with the
//! (config hash, seed, corpus hash) triple for rerun checks.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::TextRankConfig;
use crate::trainer::{fnv1a_hex, TrainConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {reason}")]
    Invalid { path: String, reason: String },
}

#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Overrides `train.seed` when set; the OG_SEED environment variable
    /// overrides both.
    pub seed: Option<u64>,
    /// Worker cap for internally parallel stages (corpus parsing, gradient
    /// checking, per-document evaluation).
    pub workers: Option<usize>,
    pub train: TrainConfig,
    pub textrank: TextRankConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| ConfigError::Invalid {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    /// Hash of the effective configuration, for provenance stamps.
    pub fn hash(&self) -> String {
        fnv1a_hex(serde_json::to_string(self).expect("serializable").as_bytes())
    }
}
