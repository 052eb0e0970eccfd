//! The daemon's TOML configuration file.
//!
//! Secrets never live in the file: the backend API key is read from the
//! environment variable named by `backend.api_key_env_var`.

use std::path::{Path, PathBuf};
use std::time::Duration;

use jammin_gen::{BackendConfig, SelectionMode};
use jammin_live::protocol::MAX_COLOR;
use jammin_live::ColorScheme;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_host")]
    pub daw_host: String,
    #[serde(default = "default_daw_port")]
    pub daw_port: u16,
    #[serde(default = "default_listen_port")]
    pub listen_port: u16,
    #[serde(default = "default_poll_interval")]
    pub poll_interval_s: f64,
    #[serde(default)]
    pub selection_mode: SelectionMode,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub colors: ColorScheme,
    #[serde(default = "default_snapshot")]
    pub snapshot_path: PathBuf,
    /// Serve replies from this fixture directory instead of the backend.
    #[serde(default)]
    pub fixture_dir: Option<PathBuf>,
}

fn default_host() -> String {
    "127.0.0.1".into()
}
fn default_daw_port() -> u16 {
    19000
}
fn default_listen_port() -> u16 {
    19001
}
fn default_poll_interval() -> f64 {
    1.0
}
fn default_workers() -> usize {
    crate::engine::DEFAULT_WORKERS
}
fn default_snapshot() -> PathBuf {
    PathBuf::from("jammin-state.json")
}

impl Default for Config {
    fn default() -> Self {
        Config::from_toml("").expect("defaults are valid")
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Config, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`. Relative `snapshot_path` and `fixture_dir` are taken
    /// relative to the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Config, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let mut cfg = Config::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if cfg.snapshot_path.is_relative() {
            cfg.snapshot_path = base.join(&cfg.snapshot_path);
        }
        if let Some(dir) = cfg.fixture_dir.as_mut().filter(|d| d.is_relative()) {
            *dir = base.join(&*dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.daw_port == self.listen_port {
            return bad(format!("daw_port and listen_port are both {}", self.daw_port));
        }
        if !(self.poll_interval_s.is_finite() && self.poll_interval_s > 0.0) {
            return bad(format!("poll_interval_s must be positive, got {}", self.poll_interval_s));
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        for (key, c) in [("generating", self.colors.generating), ("done", self.colors.done), ("error", self.colors.error)] {
            if i32::from(c) > MAX_COLOR {
                return bad(format!("colors.{key} = {c} exceeds {MAX_COLOR}"));
            }
        }
        self.backend.validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn poll_interval(&self) -> Duration {
        Duration::from_secs_f64(self.poll_interval_s)
    }

    pub fn daw_addr(&self) -> String {
        format!("{}:{}", self.daw_host, self.daw_port)
    }
}
