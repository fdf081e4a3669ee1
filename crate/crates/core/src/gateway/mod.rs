//! Uniform access to chat-completion and text-embedding backends.
//!
//! Two backends sit behind one [`Gateway`]: an HTTP client for
//! OpenAI-compatible endpoints and a deterministic scripted stand-in for
//! offline verification. The gateway owns request validation, the retry
//! policy (`max_retries` retries with exponential backoff, so persistent
//! failures cost exactly `max_retries + 1` attempts), and embedding
//! dimension checks.

pub mod envelope;
mod http;
mod scripted;

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use http::HttpBackend;
pub use scripted::{Script, ScriptedBackend, DEFAULT_EMBED_DIM, FAIL_TEMPLATE};

use crate::embed::EmbeddingVector;
use crate::error::{Error, Result};

pub const ENV_LLM_ENDPOINT: &str = "IDEATION_LLM_ENDPOINT";
pub const ENV_EMBED_ENDPOINT: &str = "IDEATION_EMBED_ENDPOINT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_prompt: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: Option<u64>,
}

impl ChatRequest {
    /// Single user-turn request, the common case for stage prompts.
    pub fn single_turn(
        system_prompt: impl Into<String>,
        content: impl Into<String>,
        temperature: f64,
        max_tokens: u32,
        seed: Option<u64>,
    ) -> Self {
        ChatRequest {
            system_prompt: system_prompt.into(),
            messages: vec![ChatMessage {
                role: Role::User,
                content: content.into(),
            }],
            temperature,
            max_tokens,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.messages.is_empty() {
            return Err(Error::InvalidRequest("messages must be non-empty".into()));
        }
        for window in self.messages.windows(2) {
            if window[0].role == Role::Assistant && window[1].role == Role::Assistant {
                return Err(Error::InvalidRequest(
                    "two consecutive assistant turns".into(),
                ));
            }
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(Error::InvalidRequest(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(Error::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    HttpChat,
    Scripted,
}

/// Backend selection plus transport policy.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Chat endpoint URL (http_chat only).
    pub endpoint: Option<String>,
    /// Embedding endpoint URL; defaults to `endpoint` when unset.
    pub embed_endpoint: Option<String>,
    pub model_name: String,
    pub embed_model_name: String,
    pub timeout: Duration,
    pub max_retries: u32,
    /// Base delay of the exponential backoff between attempts.
    pub retry_backoff: Duration,
    /// Expected embedding dimension; scripted backends always produce it,
    /// HTTP responses are validated against it when set.
    pub embed_dim: Option<usize>,
    /// Seed for scripted responses when a request carries none.
    pub seed: u64,
    /// Script file for the scripted backend; `None` uses the built-in
    /// protocol demo script.
    pub script_path: Option<PathBuf>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Scripted,
            endpoint: None,
            embed_endpoint: None,
            model_name: "scripted".into(),
            embed_model_name: "scripted-embed".into(),
            timeout: Duration::from_secs(120),
            max_retries: 2,
            retry_backoff: Duration::from_millis(200),
            embed_dim: None,
            seed: 0,
            script_path: None,
        }
    }
}

/// What one backend attempt looks like; the gateway adds retries on top.
pub trait Backend: Send + Sync {
    fn chat_attempt(&self, request: &ChatRequest) -> Result<String>;
    fn embed_attempt(&self, text: &str) -> Result<Vec<f64>>;
    fn identity(&self) -> String;
}

pub struct Gateway {
    backend: Box<dyn Backend>,
    max_retries: u32,
    retry_backoff: Duration,
    embed_dim: Option<usize>,
    default_temperature: f64,
}

impl Gateway {
    /// Builds a gateway from config. For `http_chat`, the environment
    /// variables `IDEATION_LLM_ENDPOINT` / `IDEATION_EMBED_ENDPOINT` fill in
    /// endpoints the config leaves unset.
    pub fn new(config: &BackendConfig) -> Result<Gateway> {
        let backend: Box<dyn Backend> = match config.kind {
            BackendKind::Scripted => {
                let script = match &config.script_path {
                    Some(path) => Script::load(path)?,
                    None => Script::protocol_demo(),
                };
                Box::new(ScriptedBackend::new(
                    script,
                    config.seed,
                    config.embed_dim.unwrap_or(DEFAULT_EMBED_DIM),
                ))
            }
            BackendKind::HttpChat => {
                let chat_url = config
                    .endpoint
                    .clone()
                    .or_else(|| std::env::var(ENV_LLM_ENDPOINT).ok())
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "http_chat backend needs an endpoint (flag, config, or {ENV_LLM_ENDPOINT})"
                        ))
                    })?;
                let embed_url = config
                    .embed_endpoint
                    .clone()
                    .or_else(|| std::env::var(ENV_EMBED_ENDPOINT).ok())
                    .unwrap_or_else(|| chat_url.clone());
                Box::new(HttpBackend::new(
                    chat_url,
                    embed_url,
                    config.model_name.clone(),
                    config.embed_model_name.clone(),
                    config.timeout,
                )?)
            }
        };
        Ok(Gateway {
            backend,
            max_retries: config.max_retries,
            retry_backoff: config.retry_backoff,
            embed_dim: config.embed_dim,
            default_temperature: match config.kind {
                BackendKind::Scripted => 0.0,
                BackendKind::HttpChat => 0.7,
            },
        })
    }

    pub fn from_backend(backend: Box<dyn Backend>, max_retries: u32, retry_backoff: Duration) -> Gateway {
        Gateway {
            backend,
            max_retries,
            retry_backoff,
            embed_dim: None,
            default_temperature: 0.0,
        }
    }

    pub fn identity(&self) -> String {
        self.backend.identity()
    }

    pub fn default_temperature(&self) -> f64 {
        self.default_temperature
    }

    fn with_retries<T>(&self, mut attempt: impl FnMut() -> Result<T>) -> Result<T> {
        let attempts = self.max_retries + 1;
        let mut last_error = None;
        for i in 0..attempts {
            match attempt() {
                Ok(value) => return Ok(value),
                Err(error) if error.is_retryable() => {
                    if i + 1 < attempts && !self.retry_backoff.is_zero() {
                        std::thread::sleep(self.retry_backoff * 2u32.pow(i));
                    }
                    last_error = Some(error);
                }
                Err(error) => return Err(error),
            }
        }
        Err(match last_error.expect("at least one attempt") {
            Error::Transport { message, .. } => Error::Transport { attempts, message },
            other => other,
        })
    }

    /// Chat completion with validation and retries; never mutates the request.
    pub fn chat(&self, request: &ChatRequest) -> Result<String> {
        request.validate()?;
        self.with_retries(|| {
            let text = self.backend.chat_attempt(request)?;
            if text.is_empty() {
                return Err(Error::EmptyCompletion);
            }
            Ok(text)
        })
    }

    /// Text embedding with retries and dimension validation.
    pub fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        if text.is_empty() {
            return Err(Error::InvalidRequest("embedding text must be non-empty".into()));
        }
        let values = self.with_retries(|| self.backend.embed_attempt(text))?;
        if let Some(expected) = self.embed_dim {
            if values.len() != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    actual: values.len(),
                });
            }
        }
        EmbeddingVector::new(values)
    }
}
