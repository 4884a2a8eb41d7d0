//! Provider configuration file (JSON, `${VAR}` expansion in string values).

use std::path::{Path, PathBuf};
use std::sync::{Arc, LazyLock};
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::http::{HttpChat, HttpImageGeneration, HttpImageSearch};
use super::mock::{FixtureStore, MockProvider, RecordingProvider};
use super::{Gateway, Provider, RetryPolicy, DEFAULT_CONCURRENCY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    LiveChat,
    LiveImageGen,
    LiveImageSearch,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    /// URL for live providers; fixture directory for `mock`.
    pub endpoint: String,
    #[serde(default)]
    pub credentials: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    /// When set on a live provider, every response is also written as a fixture here.
    #[serde(default)]
    pub record_to: Option<String>,
}

fn default_timeout_ms() -> u64 {
    60_000
}

fn default_retries() -> u32 {
    2
}

fn default_backoff_ms() -> u64 {
    200
}

fn default_concurrency() -> usize {
    DEFAULT_CONCURRENCY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayConfig {
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    pub chat: ProviderConfig,
    pub image_generation: ProviderConfig,
    pub image_search: ProviderConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing provider config: {0}")]
    Parse(String),
    #[error("environment variable `{0}` referenced by provider config is not set")]
    MissingEnv(String),
    #[error("invalid provider config: {0}")]
    Invalid(String),
}

static ENV_REF: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}").expect("static regex"));

fn expand(value: &mut Value, lookup: &dyn Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
    match value {
        Value::String(s) => {
            let mut missing = None;
            let expanded = ENV_REF.replace_all(s, |caps: &regex::Captures<'_>| {
                lookup(&caps[1]).unwrap_or_else(|| {
                    missing.get_or_insert_with(|| caps[1].to_string());
                    String::new()
                })
            });
            if let Some(name) = missing {
                return Err(ConfigError::MissingEnv(name));
            }
            *s = expanded.into_owned();
        }
        Value::Array(items) => items.iter_mut().try_for_each(|v| expand(v, lookup))?,
        Value::Object(map) => map.values_mut().try_for_each(|v| expand(v, lookup))?,
        _ => {}
    }
    Ok(())
}

impl ProviderConfig {
    pub fn mock(fixture_dir: impl Into<String>) -> Self {
        ProviderConfig {
            kind: ProviderKind::Mock,
            endpoint: fixture_dir.into(),
            credentials: None,
            model: None,
            timeout_ms: 10_000,
            retries: 0,
            backoff_ms: 0,
            record_to: None,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.timeout_ms == 0 {
            return Err(ConfigError::Invalid("timeout_ms must be positive".into()));
        }
        if self.endpoint.trim().is_empty() {
            return Err(ConfigError::Invalid("endpoint must be non-empty".into()));
        }
        Ok(())
    }

    pub fn policy(&self) -> RetryPolicy {
        RetryPolicy {
            retries: self.retries,
            timeout: Duration::from_millis(self.timeout_ms),
            backoff: Duration::from_millis(self.backoff_ms),
        }
    }

    fn build(&self, base: &Path) -> Result<Arc<dyn Provider>, ConfigError> {
        self.validate()?;
        let resolve = |p: &str| {
            let path = Path::new(p);
            if path.is_absolute() {
                path.to_path_buf()
            } else {
                base.join(path)
            }
        };
        let provider: Arc<dyn Provider> = match self.kind {
            ProviderKind::Mock => Arc::new(MockProvider::new(FixtureStore::dir(resolve(&self.endpoint)))),
            ProviderKind::LiveChat => Arc::new(HttpChat::new(
                &self.endpoint,
                self.credentials.clone(),
                self.model.clone().unwrap_or_else(|| "gpt-4o-mini".to_string()),
            )),
            ProviderKind::LiveImageGen => Arc::new(HttpImageGeneration::new(&self.endpoint, self.credentials.clone())),
            ProviderKind::LiveImageSearch => Arc::new(HttpImageSearch::new(&self.endpoint, self.credentials.clone())),
        };
        Ok(match (&self.record_to, self.kind) {
            (Some(dir), kind) if kind != ProviderKind::Mock => {
                Arc::new(RecordingProvider::new(provider, FixtureStore::dir(resolve(dir))))
            }
            _ => provider,
        })
    }
}

impl GatewayConfig {
    /// Every operation replays from one fixture directory.
    pub fn mock(fixture_dir: impl Into<String>) -> Self {
        let p = ProviderConfig::mock(fixture_dir);
        GatewayConfig {
            concurrency: DEFAULT_CONCURRENCY,
            chat: p.clone(),
            image_generation: p.clone(),
            image_search: p,
        }
    }

    pub fn from_json(text: &str, lookup: &dyn Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let mut value: Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        expand(&mut value, lookup)?;
        serde_json::from_value(value).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Read a config file, expanding `${VAR}` from the process environment.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text, &|name| std::env::var(name).ok())
    }

    /// Relative fixture paths resolve against `base` (normally the config file's directory).
    pub fn build(&self, base: &Path) -> Result<Gateway, ConfigError> {
        if self.concurrency == 0 {
            return Err(ConfigError::Invalid("concurrency must be at least 1".into()));
        }
        Ok(Gateway::new(
            (self.chat.build(base)?, self.chat.policy()),
            (self.image_generation.build(base)?, self.image_generation.policy()),
            (self.image_search.build(base)?, self.image_search.policy()),
            self.concurrency,
        ))
    }
}
