//! Service configuration, read from a TOML file.
//!
//! ```toml
//! data_dir = "data"                       # sessions are stored under <data_dir>/sessions
//! selective_path = "data/selective.jsonl" # optional; defaults to <data_dir>/selective.jsonl
//! bind = "127.0.0.1:8080"
//! k = 5
//! retries = 3
//!
//! [model]                  # editing model backend
//! url = "http://localhost:9000/complete"
//! token = "..."            # sent as a bearer token
//! script = "tests.jsonl"   # optional: answer from a triplet file instead of url
//! timeout_secs = 120
//!
//! [embedder]               # optional, enables D-CLIP in /eval
//! url = "http://localhost:9001/embed"
//!
//! [sampling]
//! temperature = 0.9
//! top_p = 0.9
//! max_tokens = 1024
//! ```
//!
//! `SKETCHEDIT_BACKEND_URL` and `SKETCHEDIT_BACKEND_TOKEN` override `model.url`
//! and `model.token`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sketchedit_core::pipeline::{EditOptions, SamplingConfig};
use sketchedit_core::session::DEFAULT_K;

pub const ENV_BACKEND_URL: &str = "SKETCHEDIT_BACKEND_URL";
pub const ENV_BACKEND_TOKEN: &str = "SKETCHEDIT_BACKEND_TOKEN";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Endpoint {
    pub url: Option<String>,
    pub token: Option<String>,
    /// Triplet JSONL answering prompts from ground truth; takes precedence over `url`.
    pub script: Option<PathBuf>,
    pub timeout_secs: u64,
}

impl Default for Endpoint {
    fn default() -> Self {
        Endpoint { url: None, token: None, script: None, timeout_secs: 120 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoreConfig {
    pub data_dir: PathBuf,
    pub selective_path: Option<PathBuf>,
    pub bind: String,
    pub k: usize,
    pub retries: usize,
    pub model: Endpoint,
    pub captioner: Endpoint,
    pub embedder: Endpoint,
    pub sampling: SamplingConfig,
}

impl Default for StoreConfig {
    fn default() -> Self {
        StoreConfig {
            data_dir: PathBuf::from("data"),
            selective_path: None,
            bind: "127.0.0.1:8080".into(),
            k: DEFAULT_K,
            retries: 3,
            model: Endpoint::default(),
            captioner: Endpoint::default(),
            embedder: Endpoint::default(),
            sampling: SamplingConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl StoreConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Reads `path` and applies environment overrides. Relative paths in the
    /// file are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.to_path_buf(), message: e.to_string() })?;
        let mut cfg = Self::from_toml(&text)
            .map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        if let Some(base) = path.parent() {
            cfg.resolve_relative(base);
        }
        cfg.apply_env(|k| std::env::var(k).ok());
        Ok(cfg)
    }

    fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data_dir);
        for p in
            [&mut self.selective_path, &mut self.model.script, &mut self.captioner.script, &mut self.embedder.script]
                .into_iter()
                .flatten()
        {
            fix(p);
        }
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) {
        if let Some(url) = get(ENV_BACKEND_URL).filter(|v| !v.is_empty()) {
            self.model.url = Some(url);
        }
        if let Some(token) = get(ENV_BACKEND_TOKEN).filter(|v| !v.is_empty()) {
            self.model.token = Some(token);
        }
    }

    pub fn selective_path(&self) -> PathBuf {
        self.selective_path.clone().unwrap_or_else(|| self.data_dir.join("selective.jsonl"))
    }

    pub fn edit_options(&self) -> EditOptions {
        EditOptions { k: self.k, sampling: self.sampling, retries: self.retries, parallel: true }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = StoreConfig::default();
        cfg.model.url = Some("http://h/complete".into());
        cfg.sampling.seed = Some(4);
        cfg.selective_path = Some("s.jsonl".into());
        assert_eq!(StoreConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(StoreConfig::from_toml("").unwrap(), StoreConfig::default());
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(StoreConfig::from_toml("colour = 1").is_err());
    }

    #[test]
    fn env_overrides_backend() {
        let mut cfg = StoreConfig::from_toml("[model]\nurl = \"http://a\"\ntoken = \"t\"").unwrap();
        cfg.apply_env(|k| (k == ENV_BACKEND_URL).then(|| "http://b".to_string()));
        assert_eq!(cfg.model.url.as_deref(), Some("http://b"));
        assert_eq!(cfg.model.token.as_deref(), Some("t"));
        cfg.apply_env(|k| (k == ENV_BACKEND_TOKEN).then(|| "u".to_string()));
        assert_eq!(cfg.model.token.as_deref(), Some("u"));
    }

    #[test]
    fn load_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "data_dir = \"d\"\n[model]\nscript = \"t.jsonl\"\n").unwrap();
        let cfg = StoreConfig::load(&path).unwrap();
        assert_eq!(cfg.data_dir, dir.path().join("d"));
        assert_eq!(cfg.model.script, Some(dir.path().join("t.jsonl")));
        assert_eq!(cfg.selective_path(), dir.path().join("d/selective.jsonl"));
    }
}
