//! Run configuration: TOML file, environment, then flags, each overriding
//! the one before.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use reasonconf_core::gateway::{DEFAULT_PARALLELISM, DEFAULT_TIMEOUT_SECS, DEFAULT_TOP_K};
use reasonconf_core::SamplingConfig;

use crate::error::CliError;

pub const ENV_API_KEY: &str = "REASONCONF_API_KEY";
pub const ENV_ENDPOINT: &str = "REASONCONF_ENDPOINT";

/// Per-preset overrides on top of the built-in sampling presets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetOverride {
    pub temperature: Option<f64>,
    pub top_p: Option<f64>,
    pub n: Option<usize>,
    pub max_tokens: Option<u32>,
}

/// Keys accepted in the config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key: Option<String>,
    pub judge_endpoint: Option<String>,
    pub judge_model: Option<String>,
    pub parallelism: Option<usize>,
    pub timeout_secs: Option<u64>,
    pub seed: Option<u64>,
    pub top_k: Option<usize>,
    pub max_distractors: Option<usize>,
    #[serde(default)]
    pub presets: BTreeMap<String, PresetOverride>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))
    }
}

/// Values given on the command line.
#[derive(Debug, Clone, Default)]
pub struct FlagConfig {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key: Option<String>,
    pub judge_endpoint: Option<String>,
    pub judge_model: Option<String>,
    pub parallelism: Option<usize>,
    pub timeout_secs: Option<u64>,
    pub seed: Option<u64>,
}

/// The resolved configuration. `api_key` never reaches manifests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub endpoint: Option<String>,
    pub model: String,
    #[serde(skip)]
    pub api_key: Option<String>,
    pub judge_endpoint: Option<String>,
    pub judge_model: Option<String>,
    pub parallelism: usize,
    pub timeout_secs: u64,
    pub seed: u64,
    pub top_k: usize,
    pub max_distractors: usize,
    #[serde(skip)]
    pub presets: BTreeMap<String, PresetOverride>,
}

pub const DEFAULT_MODEL: &str = "default";

impl Settings {
    pub fn resolve(
        file: FileConfig,
        env: impl Fn(&str) -> Option<String>,
        flags: FlagConfig,
    ) -> Self {
        Settings {
            endpoint: flags.endpoint.or_else(|| env(ENV_ENDPOINT)).or(file.endpoint),
            model: flags.model.or(file.model).unwrap_or_else(|| DEFAULT_MODEL.into()),
            api_key: flags.api_key.or_else(|| env(ENV_API_KEY)).or(file.api_key),
            judge_endpoint: flags.judge_endpoint.or(file.judge_endpoint),
            judge_model: flags.judge_model.or(file.judge_model),
            parallelism: flags
                .parallelism
                .or(file.parallelism)
                .unwrap_or(DEFAULT_PARALLELISM)
                .max(1),
            timeout_secs: flags
                .timeout_secs
                .or(file.timeout_secs)
                .unwrap_or(DEFAULT_TIMEOUT_SECS),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            top_k: file.top_k.unwrap_or(DEFAULT_TOP_K),
            max_distractors: file
                .max_distractors
                .unwrap_or(reasonconf_core::confidence::DEFAULT_MAX_DISTRACTORS),
            presets: file.presets,
        }
    }

    /// A built-in preset with any file overrides applied.
    pub fn preset(&self, name: &str) -> Result<SamplingConfig, CliError> {
        let mut cfg = SamplingConfig::preset(name)
            .ok_or_else(|| CliError::Usage(format!("unknown preset {name:?} (train, scale, greedy)")))?;
        if let Some(o) = self.presets.get(name) {
            if let Some(t) = o.temperature {
                cfg.temperature = t;
            }
            if let Some(p) = o.top_p {
                cfg.top_p = p;
            }
            if let Some(n) = o.n {
                cfg.n = n;
            }
            if let Some(m) = o.max_tokens {
                cfg.max_tokens = m;
            }
        }
        Ok(cfg)
    }
}
