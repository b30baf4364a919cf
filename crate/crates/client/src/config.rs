use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("temperature {0} outside [0, 2]")]
    Temperature(f64),
    #[error("concurrency_limit must be at least 1")]
    Concurrency,
    #[error("timeout_ms must be positive")]
    Timeout,
    #[error("backoff: {0}")]
    Backoff(String),
    #[error("base_url {0:?} is not an http(s) url")]
    BaseUrl(String),
    #[error("environment variable {0} is not set")]
    MissingKey(String),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Exponential backoff with multiplicative jitter: attempt `n` (0-based)
/// waits `min(cap, base * factor^n) * (1 ± jitter)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Backoff {
    pub base_ms: u64,
    pub factor: f64,
    pub jitter: f64,
    pub cap_ms: u64,
}

impl Default for Backoff {
    fn default() -> Self {
        Backoff {
            base_ms: 1000,
            factor: 2.0,
            jitter: 0.2,
            cap_ms: 60_000,
        }
    }
}

impl Backoff {
    /// Delay before retry `attempt`, with `u` in [0, 1) supplying the jitter.
    pub fn delay(&self, attempt: u32, u: f64) -> Duration {
        let raw = self.base_ms as f64 * self.factor.powi(attempt.min(64) as i32);
        let capped = raw.min(self.cap_ms as f64);
        let scale = 1.0 + self.jitter * (2.0 * u - 1.0);
        Duration::from_secs_f64((capped * scale).max(0.0) / 1000.0)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if !(self.factor >= 1.0) {
            return Err(ConfigError::Backoff(format!("factor {} < 1", self.factor)));
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(ConfigError::Backoff(format!("jitter {} outside [0, 1)", self.jitter)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    /// Prefix for `/chat/completions`, e.g. `https://api.openai.com/v1`.
    pub base_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the bearer token. The key
    /// itself never appears in config files or run records.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_concurrency")]
    pub concurrency_limit: usize,
    #[serde(default)]
    pub backoff: Backoff,
}

fn default_max_tokens() -> u32 {
    512
}
fn default_timeout_ms() -> u64 {
    60_000
}
fn default_max_retries() -> u32 {
    5
}
fn default_concurrency() -> usize {
    4
}

impl EndpointConfig {
    pub fn new(base_url: &str, model_name: &str) -> EndpointConfig {
        EndpointConfig {
            base_url: base_url.trim_end_matches('/').to_string(),
            model_name: model_name.to_string(),
            api_key_env: None,
            temperature: 0.0,
            max_tokens: default_max_tokens(),
            timeout_ms: default_timeout_ms(),
            max_retries: default_max_retries(),
            concurrency_limit: default_concurrency(),
            backoff: Backoff::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ConfigError::Temperature(self.temperature));
        }
        if self.concurrency_limit == 0 {
            return Err(ConfigError::Concurrency);
        }
        if self.timeout_ms == 0 {
            return Err(ConfigError::Timeout);
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(ConfigError::BaseUrl(self.base_url.clone()));
        }
        self.backoff.validate()
    }

    pub fn from_toml(text: &str) -> Result<EndpointConfig, ConfigError> {
        let cfg: EndpointConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<EndpointConfig, ConfigError> {
        EndpointConfig::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn completions_url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }

    /// Resolves the bearer token, if one is configured.
    pub fn api_key(&self) -> Result<Option<String>, ConfigError> {
        match &self.api_key_env {
            None => Ok(None),
            Some(var) => std::env::var(var).map(Some).map_err(|_| ConfigError::MissingKey(var.clone())),
        }
    }
}
