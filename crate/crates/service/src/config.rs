use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use argverify_core::{PipelineConfig, ProviderSet, RemoteSettings};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::store::{FsStore, MemStore, Store, StoreBackend, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderMode {
    #[default]
    Mock,
    Remote,
}

impl FromStr for ProviderMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mock" => Ok(ProviderMode::Mock),
            "remote" => Ok(ProviderMode::Remote),
            other => Err(format!("unknown provider mode `{other}` (expected mock or remote)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoreConfig {
    pub backend: StoreBackend,
    pub path: PathBuf,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self { backend: StoreBackend::Fs, path: PathBuf::from("argverify-data") }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProvidersConfig {
    pub mode: ProviderMode,
    pub remote: RemoteSettings,
}

impl ProvidersConfig {
    pub fn build(&self) -> ProviderSet {
        match self.mode {
            ProviderMode::Mock => ProviderSet::mock(),
            ProviderMode::Remote => ProviderSet::remote(self.remote.clone()),
        }
    }
}

/// Service configuration, read from TOML and then overridden from the
/// environment (`ARGVERIFY_*`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    pub store: StoreConfig,
    pub providers: ProvidersConfig,
    /// Defaults for verification runs; a verify request may override fields.
    pub pipeline: PipelineConfig,
    /// Origin allowed by CORS, e.g. `http://localhost:5173`.
    pub ui_origin: Option<String>,
    /// When set, every request needs `Authorization: Bearer <token>`.
    pub api_token: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".to_owned(),
            store: StoreConfig::default(),
            providers: ProvidersConfig::default(),
            pipeline: PipelineConfig::default(),
            ui_origin: None,
            api_token: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("invalid value for {var}: {message}")]
    Env { var: &'static str, message: String },
    #[error("invalid pipeline defaults: {0}")]
    Pipeline(String),
}

impl ServiceConfig {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse { path: path.to_owned(), source })
    }

    /// Reads the file if given, applies environment overrides and checks
    /// the pipeline defaults.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.to_owned(), source })?;
                Self::from_toml_str(&text, p)?
            }
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        cfg.pipeline.check().map_err(ConfigError::Pipeline)?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = get("ARGVERIFY_LISTEN") {
            self.listen = v;
        }
        if let Some(v) = get("ARGVERIFY_STORE_BACKEND") {
            self.store.backend = v.parse().map_err(|message| ConfigError::Env { var: "ARGVERIFY_STORE_BACKEND", message })?;
        }
        if let Some(v) = get("ARGVERIFY_STORE_PATH") {
            self.store.path = PathBuf::from(v);
        }
        if let Some(v) = get("ARGVERIFY_PROVIDERS") {
            self.providers.mode = v.parse().map_err(|message| ConfigError::Env { var: "ARGVERIFY_PROVIDERS", message })?;
        }
        if let Some(v) = get("ARGVERIFY_UI_ORIGIN") {
            self.ui_origin = Some(v);
        }
        if let Some(v) = get("ARGVERIFY_API_TOKEN") {
            self.api_token = Some(v);
        }
        self.providers.remote.apply_env(&get);
        Ok(())
    }

    pub fn open_store(&self) -> Result<Arc<dyn Store>, StoreError> {
        Ok(match self.store.backend {
            StoreBackend::Fs => Arc::new(FsStore::open(&self.store.path)?),
            StoreBackend::Memory => Arc::new(MemStore::new()),
        })
    }
}
