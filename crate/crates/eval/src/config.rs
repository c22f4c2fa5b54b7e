//! Run configuration: an optional TOML file, overridden by command-line flags.

use std::path::{Path, PathBuf};
use std::time::Duration;

use contrast_core::{DatasetName, MetricKind};
use serde::{Deserialize, Serialize};

use crate::http::{HttpSettings, RetryPolicy};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointConfig {
    /// Base URL; the client appends `/nli`, `/embed` or `/chat`.
    pub endpoint: Option<String>,
    /// Model name recorded as the backend identity and in cache keys.
    pub model: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub nli: EndpointConfig,
    pub embed: EndpointConfig,
    pub chat: EndpointConfig,
    pub cache_dir: Option<PathBuf>,
    pub fixtures: Option<PathBuf>,
    /// Empty means every metric whose backends are configured.
    pub metrics: Vec<MetricKind>,
    pub datasets: Vec<DatasetName>,
    pub bootstrap_n: usize,
    pub confidence: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub decompose_baselines: bool,
    pub dump_matrix: bool,
    /// Upper bound on concurrently scored pairs.
    pub workers: usize,
    pub retry_attempts: u32,
    pub retry_base_ms: u64,
    pub timeout_secs: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            nli: EndpointConfig::default(),
            embed: EndpointConfig::default(),
            chat: EndpointConfig::default(),
            cache_dir: None,
            fixtures: None,
            metrics: Vec::new(),
            datasets: DatasetName::ALL.to_vec(),
            bootstrap_n: 10_000,
            confidence: 0.95,
            seed: 0,
            out_dir: PathBuf::from("contrast-report"),
            decompose_baselines: false,
            dump_matrix: false,
            workers: 4,
            retry_attempts: 3,
            retry_base_ms: 250,
            timeout_secs: 60,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {reason}")]
    File { path: PathBuf, reason: String },
    #[error("{0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let file = |reason: String| ConfigError::File {
            path: path.to_path_buf(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| file(e.to_string()))?;
        Self::from_toml(&text).map_err(file)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.bootstrap_n == 0 {
            return Err(ConfigError::Invalid("bootstrap-n must be at least 1".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(ConfigError::Invalid(format!(
                "confidence {} must lie strictly between 0 and 1",
                self.confidence
            )));
        }
        if self.workers == 0 {
            return Err(ConfigError::Invalid("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn http_settings(&self) -> HttpSettings {
        HttpSettings {
            retry: RetryPolicy {
                attempts: self.retry_attempts.max(1),
                base_delay: Duration::from_millis(self.retry_base_ms),
            },
            timeout: Duration::from_secs(self.timeout_secs.max(1)),
            ..HttpSettings::from_env()
        }
    }
}

/// Parses a comma-separated metric list such as `caspr,ds`.
pub fn parse_metrics(list: &str) -> Result<Vec<MetricKind>, ConfigError> {
    let mut out = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let m = MetricKind::parse(item).ok_or_else(|| ConfigError::Invalid(format!("unknown metric {item:?}")))?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(ConfigError::Invalid("metric list is empty".into()));
    }
    Ok(out)
}

pub fn parse_datasets(list: &str) -> Result<Vec<DatasetName>, ConfigError> {
    let mut out = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let d = DatasetName::parse(item).ok_or_else(|| ConfigError::Invalid(format!("unknown dataset {item:?}")))?;
        if !out.contains(&d) {
            out.push(d);
        }
    }
    if out.is_empty() {
        return Err(ConfigError::Invalid("dataset list is empty".into()));
    }
    Ok(out)
}
