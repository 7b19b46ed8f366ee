//! Tool configuration: `.smartdoc/config.toml`, overridden by command-line flags.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::engine::EngineSettings;
use crate::eval::CorpusOptions;
use crate::java::ScanOptions;

pub const CONFIG_DIR: &str = ".smartdoc";
pub const CONFIG_FILE: &str = "config.toml";
pub const DEFAULT_PORT: u16 = 7430;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Http,
}

impl std::str::FromStr for BackendKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mock" => Ok(Self::Mock),
            "http" => Ok(Self::Http),
            other => Err(format!("unknown backend {other:?} (expected mock or http)")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub backend: BackendKind,
    pub endpoint: Option<String>,
    /// Required for the http backend; no default model is assumed.
    pub model: Option<String>,
    /// Separate model for callee summaries; defaults to `model`.
    pub summary_model: Option<String>,
    pub temperature: f64,
    pub timeout_secs: u64,
    pub max_retries: usize,
    pub depth: usize,
    pub summary_token_budget: usize,
    pub prompt_token_budget: usize,
    pub concurrency: usize,
    pub embedder: BackendKind,
    pub embedding_endpoint: Option<String>,
    pub embedding_model: Option<String>,
    /// Response table for the mock backend; relative to the project root.
    pub mock_responses: Option<PathBuf>,
    /// Prompt template file; relative to the project root.
    pub prompt_template: Option<PathBuf>,
    pub port: u16,
    /// Built review UI assets served at `/`; relative to the project root.
    pub ui_dir: Option<PathBuf>,
    pub include: Vec<String>,
    pub exclude: Vec<String>,
    pub min_methods: usize,
    pub min_ref_tokens: usize,
    pub raw_tokens: bool,
}

impl Default for Config {
    fn default() -> Self {
        let settings = EngineSettings::default();
        let scan = ScanOptions::default();
        let corpus = CorpusOptions::default();
        Self {
            backend: BackendKind::Mock,
            endpoint: None,
            model: None,
            summary_model: None,
            temperature: 0.2,
            timeout_secs: 60,
            max_retries: settings.max_retries,
            depth: settings.depth_cap,
            summary_token_budget: settings.summary_token_budget,
            prompt_token_budget: settings.prompt_token_budget,
            concurrency: settings.concurrency,
            embedder: BackendKind::Mock,
            embedding_endpoint: None,
            embedding_model: None,
            mock_responses: None,
            prompt_template: None,
            port: DEFAULT_PORT,
            ui_dir: None,
            include: scan.include,
            exclude: scan.exclude,
            min_methods: corpus.min_methods,
            min_ref_tokens: corpus.min_ref_tokens,
            raw_tokens: false,
        }
    }
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub backend: Option<BackendKind>,
    pub model: Option<String>,
    pub endpoint: Option<String>,
    pub max_retries: Option<usize>,
    pub depth: Option<usize>,
    pub concurrency: Option<usize>,
    pub port: Option<u16>,
    pub raw_tokens: Option<bool>,
}

impl Config {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let config: Config =
            toml::from_str(text).map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text, path)
    }

    /// `explicit` if given (must exist), else `<root>/.smartdoc/config.toml`
    /// if present, else defaults.
    pub fn discover(root: &Path, explicit: Option<&Path>) -> Result<Self, ConfigError> {
        if let Some(path) = explicit {
            return Self::load(path);
        }
        let path = root.join(CONFIG_DIR).join(CONFIG_FILE);
        if path.is_file() {
            Self::load(&path)
        } else {
            Ok(Self::default())
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.backend {
            self.backend = v;
        }
        if let Some(v) = &o.model {
            self.model = Some(v.clone());
        }
        if let Some(v) = &o.endpoint {
            self.endpoint = Some(v.clone());
        }
        if let Some(v) = o.max_retries {
            self.max_retries = v;
        }
        if let Some(v) = o.depth {
            self.depth = v;
        }
        if let Some(v) = o.concurrency {
            self.concurrency = v;
        }
        if let Some(v) = o.port {
            self.port = v;
        }
        if let Some(v) = o.raw_tokens {
            self.raw_tokens = v;
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.max_retries == 0 {
            return bad("max_retries must be at least 1");
        }
        if self.concurrency == 0 {
            return bad("concurrency must be at least 1");
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad("temperature must be within 0..=2");
        }
        if self.timeout_secs == 0 {
            return bad("timeout_secs must be positive");
        }
        if self.summary_token_budget == 0 || self.prompt_token_budget == 0 {
            return bad("token budgets must be positive");
        }
        if self.backend == BackendKind::Http {
            if self.endpoint.is_none() {
                return bad("backend \"http\" needs an endpoint");
            }
            if self.model.is_none() {
                return bad("backend \"http\" needs a model");
            }
        }
        if self.embedder == BackendKind::Http && (self.embedding_endpoint.is_none() || self.embedding_model.is_none()) {
            return bad("embedder \"http\" needs embedding_endpoint and embedding_model");
        }
        if self.include.is_empty() {
            return bad("include must list at least one pattern");
        }
        Ok(())
    }

    pub fn engine_settings(&self) -> EngineSettings {
        EngineSettings {
            max_retries: self.max_retries,
            depth_cap: self.depth,
            summary_token_budget: self.summary_token_budget,
            prompt_token_budget: self.prompt_token_budget,
            concurrency: self.concurrency,
        }
    }

    pub fn scan_options(&self) -> ScanOptions {
        ScanOptions { include: self.include.clone(), exclude: self.exclude.clone() }
    }

    pub fn corpus_options(&self) -> CorpusOptions {
        CorpusOptions { min_methods: self.min_methods, min_ref_tokens: self.min_ref_tokens, strip_tags: !self.raw_tokens }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }

    /// Model label for reports: the configured model, or "mock".
    pub fn model_label(&self) -> String {
        self.model.clone().unwrap_or_else(|| "mock".to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = Config::default();
        c.validate().unwrap();
        assert_eq!(c.port, 7430);
        assert_eq!(c.temperature, 0.2);
        assert_eq!(c.depth, 5);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = Config::from_toml_str("modle = \"x\"\n", Path::new("c.toml")).unwrap_err();
        assert!(err.to_string().contains("modle"), "{err}");
    }

    #[test]
    fn http_needs_model() {
        let c = Config::from_toml_str("backend = \"http\"\nendpoint = \"http://x\"\n", Path::new("c.toml")).unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn flags_override_file() {
        let mut c = Config::from_toml_str("max_retries = 5\ndepth = 2\n", Path::new("c.toml")).unwrap();
        c.apply(&Overrides { depth: Some(4), ..Default::default() });
        assert_eq!((c.max_retries, c.depth), (5, 4));
    }

    #[test]
    fn zero_retries_invalid() {
        let c = Config { max_retries: 0, ..Config::default() };
        assert!(c.validate().is_err());
    }
}
