//! OpenAI-compatible chat-completions backend.

use std::thread;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use wmplan_core::domain::TokenCount;
use wmplan_core::gateway::{ChatBackend, ChatRequest, Completion, GatewayError, Message};

use crate::config::HttpConfig;

/// Environment variables checked, in order, for the bearer token.
pub const API_KEY_VARS: [&str; 2] = ["WMPLAN_API_KEY", "OPENAI_API_KEY"];

pub fn api_key_from_env() -> Option<String> {
    API_KEY_VARS.iter().find_map(|v| std::env::var(v).ok().filter(|k| !k.is_empty()))
}

#[derive(Serialize)]
struct Body<'a> {
    model: &'a str,
    messages: &'a [Message],
    temperature: f32,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct Reply {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

#[derive(Clone)]
pub struct HttpBackend {
    client: Client,
    url: String,
    model: String,
    api_key: Option<String>,
    max_retries: u32,
    backoff: Duration,
}

enum Failure {
    Transient(String),
    Fatal(String),
}

impl HttpBackend {
    pub fn new(cfg: &HttpConfig, api_key: Option<String>) -> Result<Self, GatewayError> {
        let client = Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| GatewayError::BackendUnavailable(e.to_string()))?;
        Ok(Self {
            client,
            url: format!("{}/chat/completions", cfg.base_url.trim_end_matches('/')),
            model: cfg.model.clone(),
            api_key,
            max_retries: cfg.max_retries,
            backoff: Duration::from_millis(cfg.backoff_ms),
        })
    }

    fn attempt(&self, req: &ChatRequest) -> Result<Completion, Failure> {
        let body = Body {
            model: &self.model,
            messages: &req.messages,
            temperature: req.decoding.temperature,
            max_tokens: req.decoding.max_tokens,
        };
        let mut builder = self.client.post(&self.url).json(&body);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let resp = builder.send().map_err(|e| Failure::Transient(e.to_string()))?;
        let status = resp.status();
        if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
            return Err(Failure::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(Failure::Fatal(format!("HTTP {status}: {}", text.chars().take(300).collect::<String>())));
        }
        let reply: Reply = resp.json().map_err(|e| Failure::Fatal(format!("bad response body: {e}")))?;
        let text = reply
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| Failure::Fatal("response has no message content".into()))?;
        Ok(Completion {
            text,
            usage: reply.usage.map(|u| TokenCount {
                prompt_tokens: u.prompt_tokens,
                completion_tokens: u.completion_tokens,
            }),
        })
    }
}

impl ChatBackend for HttpBackend {
    /// Retries connection errors, 429 and 5xx with exponential backoff.
    fn complete(&mut self, req: &ChatRequest) -> Result<Completion, GatewayError> {
        let mut last = String::new();
        for i in 0..=self.max_retries {
            if i > 0 {
                thread::sleep(self.backoff * 2u32.saturating_pow(i - 1));
            }
            match self.attempt(req) {
                Ok(c) => return Ok(c),
                Err(Failure::Fatal(e)) => return Err(GatewayError::BackendUnavailable(e)),
                Err(Failure::Transient(e)) => last = e,
            }
        }
        Err(GatewayError::BackendUnavailable(format!(
            "giving up after {} attempts: {last}",
            self.max_retries + 1
        )))
    }
}
