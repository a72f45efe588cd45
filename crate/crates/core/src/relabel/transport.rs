//! Chat-completion transports.

use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};

use super::ClientConfig;

pub const API_KEY_ENV: &str = "EMOKIT_API_KEY";

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("{API_KEY_ENV} is not set")]
    MissingApiKey,
    #[error("http: {0}")]
    Http(String),
    #[error("unexpected API response: {0}")]
    Protocol(String),
    #[error("no fixture for request (user content sha256 {0})")]
    NoFixture(String),
    #[error("fixture {path}: {message}")]
    BadFixture { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub seed: u64,
    pub json_mode: bool,
    pub system: String,
    pub user: String,
}

impl ChatRequest {
    pub fn new(cfg: &ClientConfig, system: &str, user: String) -> Self {
        ChatRequest {
            model: cfg.model.clone(),
            temperature: cfg.temperature,
            seed: cfg.seed,
            json_mode: cfg.json_mode,
            system: system.to_string(),
            user,
        }
    }

    /// Request body in the chat-completions wire format.
    pub fn body(&self) -> Value {
        let mut body = json!({
            "model": self.model,
            "temperature": self.temperature,
            "seed": self.seed,
            "messages": [
                {"role": "system", "content": self.system},
                {"role": "user", "content": self.user},
            ],
        });
        if self.json_mode {
            body["response_format"] = json!({"type": "json_object"});
        }
        body
    }
}

/// Returns the assistant message content for a request.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

impl<F> ChatTransport for F
where
    F: Fn(&ChatRequest) -> Result<String, TransportError> + Send + Sync,
{
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        self(request)
    }
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
    url: String,
    api_key: String,
}

impl HttpTransport {
    pub fn from_env(cfg: &ClientConfig) -> Result<Self, TransportError> {
        let api_key = std::env::var(API_KEY_ENV).map_err(|_| TransportError::MissingApiKey)?;
        Self::new(cfg, api_key)
    }

    pub fn new(cfg: &ClientConfig, api_key: String) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| TransportError::Http(e.to_string()))?;
        Ok(HttpTransport {
            client,
            url: format!("{}/chat/completions", cfg.base_url.trim_end_matches('/')),
            api_key,
        })
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let resp = self
            .client
            .post(&self.url)
            .bearer_auth(&self.api_key)
            .json(&request.body())
            .send()
            .map_err(|e| TransportError::Http(e.to_string()))?;
        let status = resp.status();
        let body: Value = resp.json().map_err(|e| TransportError::Http(e.to_string()))?;
        if !status.is_success() {
            return Err(TransportError::Http(format!("{status}: {body}")));
        }
        body.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(String::from)
            .ok_or_else(|| TransportError::Protocol(body.to_string()))
    }
}

#[derive(Debug, Deserialize)]
struct Fixture {
    input: String,
    output: String,
}

/// Replays recorded answers. Every `*.json` file in the directory holds
/// `{"input": <user message>, "output": <assistant content>}`.
#[derive(Debug, Default)]
pub struct FixtureTransport {
    answers: HashMap<String, String>,
}

impl FixtureTransport {
    pub fn from_dir(dir: &Path) -> Result<Self, TransportError> {
        let mut paths: Vec<_> = std::fs::read_dir(dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()?;
        paths.sort();
        let mut answers = HashMap::new();
        for path in paths.into_iter().filter(|p| p.extension().is_some_and(|e| e == "json")) {
            let bad = |message: String| TransportError::BadFixture {
                path: path.display().to_string(),
                message,
            };
            let text = std::fs::read_to_string(&path)?;
            let fx: Fixture = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
            answers.insert(fx.input, fx.output);
        }
        Ok(FixtureTransport { answers })
    }

    pub fn insert(&mut self, input: impl Into<String>, output: impl Into<String>) {
        self.answers.insert(input.into(), output.into());
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }
}

impl ChatTransport for FixtureTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        self.answers.get(&request.user).cloned().ok_or_else(|| {
            use sha2::{Digest, Sha256};
            TransportError::NoFixture(hex::encode(Sha256::digest(request.user.as_bytes())))
        })
    }
}
