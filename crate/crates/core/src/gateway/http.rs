//! HTTP chat/embedding backend for OpenAI-compatible endpoints (including
//! local Ollama-style servers).

use std::time::Duration;

use serde_json::{json, Value};

use super::{Backend, ChatRequest, Role};
use crate::error::{Error, Result};

pub struct HttpBackend {
    client: reqwest::blocking::Client,
    chat_url: String,
    embed_url: String,
    model_name: String,
    embed_model_name: String,
}

impl HttpBackend {
    pub fn new(
        chat_url: String,
        embed_url: String,
        model_name: String,
        embed_model_name: String,
        timeout: Duration,
    ) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(HttpBackend {
            client,
            chat_url,
            embed_url,
            model_name,
            embed_model_name,
        })
    }

    fn post(&self, url: &str, body: Value) -> Result<Value> {
        let response = self
            .client
            .post(url)
            .json(&body)
            .send()
            .map_err(|e| Error::Transport {
                attempts: 1,
                message: e.to_string(),
            })?;
        let status = response.status();
        if !status.is_success() {
            return Err(Error::Transport {
                attempts: 1,
                message: format!("{url} returned {status}"),
            });
        }
        response.json().map_err(|e| Error::Transport {
            attempts: 1,
            message: format!("invalid JSON from {url}: {e}"),
        })
    }
}

fn role_str(role: Role) -> &'static str {
    match role {
        Role::System => "system",
        Role::User => "user",
        Role::Assistant => "assistant",
    }
}

/// Pulls the completion text out of the known response shapes:
/// OpenAI `choices[0].message.content`, Ollama chat `message.content`,
/// Ollama generate `response`.
fn completion_text(value: &Value) -> Option<String> {
    value["choices"][0]["message"]["content"]
        .as_str()
        .or_else(|| value["message"]["content"].as_str())
        .or_else(|| value["response"].as_str())
        .map(|s| s.to_string())
}

/// Pulls the embedding out of OpenAI `data[0].embedding`, Ollama
/// `embedding`, or `embeddings[0]`.
fn embedding_values(value: &Value) -> Option<Vec<f64>> {
    let array = value["data"][0]["embedding"]
        .as_array()
        .or_else(|| value["embedding"].as_array())
        .or_else(|| value["embeddings"][0].as_array())?;
    array.iter().map(|v| v.as_f64()).collect()
}

impl Backend for HttpBackend {
    fn chat_attempt(&self, request: &ChatRequest) -> Result<String> {
        let mut messages = Vec::with_capacity(request.messages.len() + 1);
        if !request.system_prompt.is_empty() {
            messages.push(json!({"role": "system", "content": request.system_prompt}));
        }
        for message in &request.messages {
            messages.push(json!({
                "role": role_str(message.role),
                "content": message.content,
            }));
        }
        let mut body = json!({
            "model": self.model_name,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "stream": false,
        });
        if let Some(seed) = request.seed {
            body["seed"] = json!(seed);
        }
        let value = self.post(&self.chat_url, body)?;
        let text = completion_text(&value).ok_or_else(|| Error::Transport {
            attempts: 1,
            message: "response carries no completion text".into(),
        })?;
        if text.is_empty() {
            return Err(Error::EmptyCompletion);
        }
        Ok(text)
    }

    fn embed_attempt(&self, text: &str) -> Result<Vec<f64>> {
        let body = json!({
            "model": self.embed_model_name,
            "input": text,
            "prompt": text,
        });
        let value = self.post(&self.embed_url, body)?;
        embedding_values(&value).ok_or_else(|| Error::Transport {
            attempts: 1,
            message: "response carries no embedding".into(),
        })
    }

    fn identity(&self) -> String {
        format!("http({}@{})", self.model_name, self.chat_url)
    }
}
