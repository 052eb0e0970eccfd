//! Language model backends: an HTTP client for chat-completions servers, a
//! fixture-directory mock and a scripted test double.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use jammin_core::FormatTag;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::prompt::{ChatMessage, Role};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("request timed out after {0:?}")]
    Timeout(Duration),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited by backend")]
    RateLimited,
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("backend answered HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    BadResponse(String),
    #[error("no fixture for this prompt; looked for {0}")]
    MissingFixture(String),
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error("scripted backend has no replies left")]
    Exhausted,
}

impl BackendError {
    /// Whether repeating the same request later could succeed.
    pub fn is_retriable(&self) -> bool {
        matches!(self, BackendError::RateLimited | BackendError::Timeout(_) | BackendError::Transport(_))
    }
}

/// What a prompt is for; backends that key replies by request use it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Generate(FormatTag),
    Edit,
    Choose,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub messages: Vec<ChatMessage>,
    pub purpose: Purpose,
    pub clip_name: String,
}

impl Prompt {
    /// Stable text form of the messages, used for hashing.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for m in &self.messages {
            let role = match m.role {
                Role::System => "system",
                Role::User => "user",
                Role::Assistant => "assistant",
            };
            let _ = write!(out, "{role}\n{}\n\n", m.content);
        }
        out
    }
}

/// A chat completion service. Implementations must tolerate concurrent calls.
pub trait Backend: Send + Sync {
    /// Returns the assistant's reply text verbatim.
    fn complete(&self, prompt: &Prompt) -> Result<String, BackendError>;
}

fn default_api_key_env_var() -> String {
    "JAMMIN_API_KEY".into()
}
fn default_temperature() -> f64 {
    0.7
}
fn default_max_tokens() -> u32 {
    1024
}
fn default_timeout() -> f64 {
    60.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub base_url: String,
    pub model_name: String,
    #[serde(default = "default_api_key_env_var")]
    pub api_key_env_var: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_timeout")]
    pub request_timeout_s: f64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            base_url: "https://api.openai.com".into(),
            model_name: "gpt-4-turbo".into(),
            api_key_env_var: default_api_key_env_var(),
            temperature: default_temperature(),
            max_tokens: default_max_tokens(),
            request_timeout_s: default_timeout(),
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(BackendError::Config(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if !(self.request_timeout_s.is_finite() && self.request_timeout_s > 0.0) {
            return Err(BackendError::Config("request_timeout_s must be positive".into()));
        }
        if self.model_name.trim().is_empty() {
            return Err(BackendError::Config("model_name is empty".into()));
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(BackendError::Config(format!("base_url {:?} is not http(s)", self.base_url)));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.request_timeout_s)
    }

    /// Full URL of the chat-completions endpoint.
    pub fn endpoint(&self) -> String {
        format!("{}/v1/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    content: Option<String>,
}

/// Client for servers implementing the `/v1/chat/completions` JSON API.
pub struct HttpBackend {
    cfg: BackendConfig,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(cfg: BackendConfig) -> Result<Self, BackendError> {
        cfg.validate()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout()))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpBackend { cfg, agent })
    }

    /// The API key from the configured environment variable.
    pub fn api_key(&self) -> Result<String, BackendError> {
        match std::env::var(&self.cfg.api_key_env_var) {
            Ok(k) if !k.trim().is_empty() => Ok(k.trim().to_string()),
            _ => Err(BackendError::Auth(format!("environment variable {} is not set", self.cfg.api_key_env_var))),
        }
    }

    fn map_transport(&self, e: ureq::Error) -> BackendError {
        match e {
            ureq::Error::Timeout(_) => BackendError::Timeout(self.cfg.timeout()),
            other => BackendError::Transport(other.to_string()),
        }
    }
}

impl Backend for HttpBackend {
    fn complete(&self, prompt: &Prompt) -> Result<String, BackendError> {
        // Checked before touching the network.
        let key = self.api_key()?;
        let body = serde_json::to_string(&ChatRequest {
            model: &self.cfg.model_name,
            messages: &prompt.messages,
            temperature: self.cfg.temperature,
            max_tokens: self.cfg.max_tokens,
        })
        .map_err(|e| BackendError::BadResponse(e.to_string()))?;
        let mut resp = self
            .agent
            .post(&self.cfg.endpoint())
            .header("Authorization", &format!("Bearer {key}"))
            .header("Content-Type", "application/json")
            .send(body.as_bytes())
            .map_err(|e| self.map_transport(e))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| self.map_transport(e))?;
        match status {
            200..=299 => {}
            401 | 403 => return Err(BackendError::Auth(format!("HTTP {status}"))),
            429 => return Err(BackendError::RateLimited),
            _ => {
                return Err(BackendError::Http { status, body: text.chars().take(200).collect() });
            }
        }
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| BackendError::BadResponse(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::BadResponse("no choices in response".into()))
    }
}

/// Lowercases and joins alphanumeric runs with `-`: "4 Bar Funky!" -> "4-bar-funky".
pub fn slugify(name: &str) -> String {
    name.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join("-")
}

/// Serves replies from text files.
///
/// A prompt for format `f` and clip name `n` reads `<dir>/<f>/<slug(n)>.txt`,
/// where edits use `abc` and format choices use `choose`. When that file is
/// missing, `<dir>/<f>/<hash>.txt` is tried, `<hash>` being the first 16 hex
/// digits of the SHA-256 of the canonical prompt.
pub struct MockBackend {
    dir: PathBuf,
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        MockBackend { dir: dir.into(), calls: AtomicUsize::new(0) }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn prompt_hash(prompt: &Prompt) -> String {
        let digest = Sha256::digest(prompt.canonical().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// The two candidate fixture paths for a prompt, in lookup order.
    pub fn fixture_paths(&self, prompt: &Prompt) -> [PathBuf; 2] {
        let sub = match prompt.purpose {
            Purpose::Generate(f) => f.as_str(),
            Purpose::Edit => FormatTag::Abc.as_str(),
            Purpose::Choose => "choose",
        };
        let base = self.dir.join(sub);
        [
            base.join(format!("{}.txt", slugify(&prompt.clip_name))),
            base.join(format!("{}.txt", Self::prompt_hash(prompt))),
        ]
    }
}

impl Backend for MockBackend {
    fn complete(&self, prompt: &Prompt) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let paths = self.fixture_paths(prompt);
        for p in &paths {
            if let Ok(text) = std::fs::read_to_string(p) {
                return Ok(text);
            }
        }
        Err(BackendError::MissingFixture(format!("{} or {}", paths[0].display(), paths[1].display())))
    }
}

/// Replays a fixed list of replies and records every prompt it receives.
#[derive(Default)]
pub struct ScriptedBackend {
    replies: Mutex<VecDeque<Result<String, BackendError>>>,
    seen: Mutex<Vec<Prompt>>,
}

impl ScriptedBackend {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::with_results(replies.into_iter().map(|r| Ok(r.into())))
    }

    pub fn with_results(replies: impl IntoIterator<Item = Result<String, BackendError>>) -> Self {
        ScriptedBackend { replies: Mutex::new(replies.into_iter().collect()), seen: Mutex::default() }
    }

    pub fn calls(&self) -> usize {
        self.seen.lock().expect("lock").len()
    }

    pub fn prompts(&self) -> Vec<Prompt> {
        self.seen.lock().expect("lock").clone()
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, prompt: &Prompt) -> Result<String, BackendError> {
        self.seen.lock().expect("lock").push(prompt.clone());
        self.replies.lock().expect("lock").pop_front().unwrap_or(Err(BackendError::Exhausted))
    }
}
