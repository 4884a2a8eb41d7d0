//! Application settings: `personagram.json` plus `PERSONAGRAM_*` overrides.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::PersonaCorpus;
use crate::engine::{clock_from_env, Engine, SessionStore};
use crate::gateway::config::{GatewayConfig, ProviderKind};
use crate::gateway::Gateway;

pub const CONFIG_ENV: &str = "PERSONAGRAM_CONFIG";
pub const DEFAULT_CONFIG_FILE: &str = "personagram.json";

/// Environment variables that override individual settings.
pub const ENV_OVERRIDES: [(&str, &str); 6] = [
    ("PERSONAGRAM_PORT", "port"),
    ("PERSONAGRAM_CORPUS", "corpus"),
    ("PERSONAGRAM_PROVIDERS", "providers"),
    ("PERSONAGRAM_FIXTURES", "fixtures"),
    ("PERSONAGRAM_SESSIONS", "sessions"),
    ("PERSONAGRAM_STATIC", "static_dir"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[serde(default = "default_host")]
    pub host: String,
    #[serde(default = "default_port")]
    pub port: u16,
    pub corpus: PathBuf,
    /// Provider config file; without one every operation replays from `fixtures`.
    #[serde(default)]
    pub providers: Option<PathBuf>,
    /// Fixture directory for mock providers; overrides the endpoint of any mock entry.
    #[serde(default)]
    pub fixtures: Option<PathBuf>,
    /// Where session documents are persisted; in memory when unset.
    #[serde(default)]
    pub sessions: Option<PathBuf>,
    #[serde(default)]
    pub static_dir: Option<PathBuf>,
}

fn default_host() -> String {
    "127.0.0.1".to_string()
}

fn default_port() -> u16 {
    8080
}

#[derive(Debug, thiserror::Error)]
pub enum SettingsError {
    #[error("reading {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("invalid settings: {0}")]
    Invalid(String),
    #[error(transparent)]
    Providers(#[from] crate::gateway::config::ConfigError),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::LoadError),
    #[error(transparent)]
    Sessions(#[from] crate::engine::EngineError),
}

impl Settings {
    pub fn with_corpus(corpus: impl Into<PathBuf>) -> Self {
        Settings {
            host: default_host(),
            port: default_port(),
            corpus: corpus.into(),
            providers: None,
            fixtures: None,
            sessions: None,
            static_dir: None,
        }
    }

    /// Parse settings; relative paths resolve against `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self, SettingsError> {
        let mut s: Settings = serde_json::from_str(text).map_err(|e| SettingsError::Invalid(e.to_string()))?;
        s.resolve(base);
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SettingsError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SettingsError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// `explicit` if given, else `$PERSONAGRAM_CONFIG`, else `./personagram.json` if it exists.
    pub fn discover(explicit: Option<&Path>, lookup: &dyn Fn(&str) -> Option<String>) -> Option<PathBuf> {
        if let Some(p) = explicit {
            return Some(p.to_path_buf());
        }
        if let Some(p) = lookup(CONFIG_ENV).filter(|p| !p.is_empty()) {
            return Some(PathBuf::from(p));
        }
        let local = PathBuf::from(DEFAULT_CONFIG_FILE);
        local.exists().then_some(local)
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.corpus);
        for p in [
            &mut self.providers,
            &mut self.fixtures,
            &mut self.sessions,
            &mut self.static_dir,
        ]
        .into_iter()
        .flatten()
        {
            join(p);
        }
    }

    /// Apply `PERSONAGRAM_*` overrides; paths from the environment are taken as given.
    pub fn apply_env(&mut self, lookup: &dyn Fn(&str) -> Option<String>) -> Result<(), SettingsError> {
        for (var, field) in ENV_OVERRIDES {
            let Some(value) = lookup(var).filter(|v| !v.is_empty()) else {
                continue;
            };
            match field {
                "port" => {
                    self.port = value
                        .parse()
                        .map_err(|_| SettingsError::Invalid(format!("{var} must be a port number, got `{value}`")))?
                }
                "corpus" => self.corpus = value.into(),
                "providers" => self.providers = Some(value.into()),
                "fixtures" => self.fixtures = Some(value.into()),
                "sessions" => self.sessions = Some(value.into()),
                _ => self.static_dir = Some(value.into()),
            }
        }
        Ok(())
    }

    pub fn gateway_config(&self) -> Result<(GatewayConfig, PathBuf), SettingsError> {
        let (mut config, base) = match &self.providers {
            Some(path) => (
                GatewayConfig::load(path)?,
                path.parent().map(Path::to_path_buf).unwrap_or_default(),
            ),
            None => {
                let dir = self.fixtures.clone().ok_or_else(|| {
                    SettingsError::Invalid("either a provider config or a fixture directory is required".into())
                })?;
                (GatewayConfig::mock(dir.to_string_lossy()), PathBuf::new())
            }
        };
        if let Some(dir) = &self.fixtures {
            for p in [&mut config.chat, &mut config.image_generation, &mut config.image_search] {
                if p.kind == ProviderKind::Mock {
                    p.endpoint = dir.to_string_lossy().into_owned();
                }
            }
        }
        Ok((config, base))
    }

    pub fn gateway(&self) -> Result<Gateway, SettingsError> {
        let (config, base) = self.gateway_config()?;
        Ok(config.build(&base)?)
    }

    pub fn corpus(&self) -> Result<PersonaCorpus, SettingsError> {
        Ok(PersonaCorpus::load_path(&self.corpus)?)
    }

    /// Corpus, gateway and session store wired into an engine; the clock
    /// honours `PERSONAGRAM_CLOCK_MS`.
    pub fn engine(&self) -> Result<Engine, SettingsError> {
        let sessions = match &self.sessions {
            Some(dir) => SessionStore::open(dir)?,
            None => SessionStore::in_memory(),
        };
        Ok(Engine::new(
            Arc::new(self.corpus()?),
            self.gateway()?,
            sessions,
            clock_from_env(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_follow_the_file_and_env_wins() {
        let s = Settings::from_json(
            r#"{"corpus": "personas.jsonl", "fixtures": "fx", "port": 9000}"#,
            Path::new("/srv/demo"),
        )
        .unwrap();
        assert_eq!(s.corpus, PathBuf::from("/srv/demo/personas.jsonl"));
        assert_eq!(s.fixtures, Some(PathBuf::from("/srv/demo/fx")));
        let mut s = s;
        s.apply_env(&|v| match v {
            "PERSONAGRAM_PORT" => Some("7000".into()),
            "PERSONAGRAM_FIXTURES" => Some("/other".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(s.port, 7000);
        assert_eq!(s.fixtures, Some(PathBuf::from("/other")));
        let (cfg, _) = s.gateway_config().unwrap();
        assert_eq!(cfg.chat.endpoint, "/other");
        assert!(s.apply_env(&|v| (v == "PERSONAGRAM_PORT").then(|| "x".into())).is_err());
    }

    #[test]
    fn unknown_keys_and_missing_providers_rejected() {
        assert!(Settings::from_json(r#"{"corpus": "a", "prot": 1}"#, Path::new(".")).is_err());
        let s = Settings::with_corpus("a");
        assert!(s.gateway_config().is_err());
    }

    #[test]
    fn discovery_order() {
        let explicit = Path::new("/x.json");
        let env = |v: &str| (v == CONFIG_ENV).then(|| "/env.json".to_string());
        assert_eq!(Settings::discover(Some(explicit), &env), Some(explicit.to_path_buf()));
        assert_eq!(Settings::discover(None, &env), Some(PathBuf::from("/env.json")));
    }
}
