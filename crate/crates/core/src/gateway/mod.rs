//! Chat-completion interface shared by every LLM-backed component.
//!
//! Backends implement [`ChatBackend`]; the per-episode [`Gateway`] wraps one
//! and keeps the token ledger and call counts.

pub mod oracle;
pub mod prompts;
pub mod replay;
pub mod template;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ComponentTag, TokenCount, TokenLedger};
use crate::env::GroundState;

pub use oracle::OracleBackend;
pub use prompts::PromptSet;
pub use replay::{bundled_transcript, ReplayBackend, ReplayEntry};
pub use template::{PromptTemplate, TemplateError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub temperature: f32,
    pub max_tokens: u32,
}

impl Default for Decoding {
    fn default() -> Self {
        Self { temperature: 0.0, max_tokens: 1024 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub tag: ComponentTag,
    pub messages: Vec<Message>,
    pub decoding: Decoding,
    /// 0 for a first request, n for the n-th corrective re-prompt.
    pub attempt: u32,
}

impl ChatRequest {
    /// Content of the final message, which carries the instance prompt or
    /// the latest turn.
    pub fn last_content(&self) -> &str {
        self.messages.last().map(|m| m.content.as_str()).unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    /// Provider-reported usage; None means "count whitespace tokens".
    pub usage: Option<TokenCount>,
}

impl Completion {
    pub fn text(text: impl Into<String>) -> Self {
        Self { text: text.into(), usage: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("replay transcript exhausted at request {position}")]
    ReplayExhausted { position: usize },
    #[error("replay request {position} does not match the transcript: {detail}")]
    ReplayMismatch { position: usize, detail: String },
    #[error("oracle backend does not support {0}")]
    OracleUnsupported(String),
    #[error("malformed request: {0}")]
    MalformedRequest(String),
}

pub trait ChatBackend: Send {
    fn complete(&mut self, req: &ChatRequest) -> Result<Completion, GatewayError>;

    /// Simulator state, offered before each request. Only the oracle uses it.
    fn observe_ground_truth(&mut self, _state: &GroundState) {}
}

impl<B: ChatBackend + ?Sized> ChatBackend for alloc::boxed::Box<B> {
    fn complete(&mut self, req: &ChatRequest) -> Result<Completion, GatewayError> {
        (**self).complete(req)
    }

    fn observe_ground_truth(&mut self, state: &GroundState) {
        (**self).observe_ground_truth(state)
    }
}

/// Backend driven by a closure; handy for scripted tests and fault injection.
pub struct FnBackend<F>(pub F);

impl<F> ChatBackend for FnBackend<F>
where
    F: FnMut(&ChatRequest) -> Result<Completion, GatewayError> + Send,
{
    fn complete(&mut self, req: &ChatRequest) -> Result<Completion, GatewayError> {
        (self.0)(req)
    }
}

/// Approximate token count: whitespace-delimited words.
pub fn whitespace_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallCount {
    pub first: u32,
    pub reprompts: u32,
}

/// One episode's view of a backend: counts tokens and calls per component.
pub struct Gateway<'a> {
    backend: &'a mut dyn ChatBackend,
    decoding: Decoding,
    ledger: TokenLedger,
    calls: BTreeMap<ComponentTag, CallCount>,
}

impl<'a> Gateway<'a> {
    pub fn new(backend: &'a mut dyn ChatBackend) -> Self {
        Self::with_decoding(backend, Decoding::default())
    }

    pub fn with_decoding(backend: &'a mut dyn ChatBackend, decoding: Decoding) -> Self {
        Self { backend, decoding, ledger: TokenLedger::default(), calls: BTreeMap::new() }
    }

    pub fn observe_ground_truth(&mut self, state: &GroundState) {
        self.backend.observe_ground_truth(state);
    }

    /// Sends one request and records its tokens under `tag`.
    pub fn complete(
        &mut self,
        tag: ComponentTag,
        messages: Vec<Message>,
        attempt: u32,
    ) -> Result<String, GatewayError> {
        if messages.first().map(|m| m.role) != Some(Role::System) {
            return Err(GatewayError::MalformedRequest("first message must be the system prompt".into()));
        }
        let req = ChatRequest { tag, messages, decoding: self.decoding, attempt };
        let count = self.calls.entry(tag).or_default();
        if attempt == 0 {
            count.first += 1;
        } else {
            count.reprompts += 1;
        }
        let completion = self.backend.complete(&req)?;
        let usage = completion.usage.unwrap_or_else(|| TokenCount {
            prompt_tokens: req.messages.iter().map(|m| whitespace_tokens(&m.content)).sum(),
            completion_tokens: whitespace_tokens(&completion.text),
        });
        self.ledger.record(tag, usage.prompt_tokens, usage.completion_tokens);
        Ok(completion.text)
    }

    pub fn ledger(&self) -> &TokenLedger {
        &self.ledger
    }

    pub fn calls(&self, tag: ComponentTag) -> CallCount {
        self.calls.get(&tag).copied().unwrap_or_default()
    }

    pub fn call_counts(&self) -> &BTreeMap<ComponentTag, CallCount> {
        &self.calls
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn ledger_counts_whitespace_tokens() {
        let mut b = FnBackend(|_: &ChatRequest| Ok(Completion::text("one two three")));
        let mut g = Gateway::new(&mut b);
        let out = g
            .complete(ComponentTag::Actor, vec![Message::system("a b"), Message::user("c")], 0)
            .unwrap();
        assert_eq!(out, "one two three");
        assert_eq!(g.ledger().actor, TokenCount { prompt_tokens: 3, completion_tokens: 3 });
        assert_eq!(g.ledger().total(), 6);
        assert_eq!(g.calls(ComponentTag::Actor), CallCount { first: 1, reprompts: 0 });
    }

    #[test]
    fn provider_usage_wins() {
        let mut b = FnBackend(|_: &ChatRequest| {
            Ok(Completion { text: "x".into(), usage: Some(TokenCount { prompt_tokens: 40, completion_tokens: 2 }) })
        });
        let mut g = Gateway::new(&mut b);
        g.complete(ComponentTag::Planner, vec![Message::system("s")], 1).unwrap();
        assert_eq!(g.ledger().planner.prompt_tokens, 40);
        assert_eq!(g.calls(ComponentTag::Planner).reprompts, 1);
    }

    #[test]
    fn rejects_missing_system_prompt() {
        let mut b = FnBackend(|_: &ChatRequest| Ok(Completion::text("x")));
        let mut g = Gateway::new(&mut b);
        let err = g.complete(ComponentTag::Actor, vec![Message::user("hi")], 0).unwrap_err();
        assert!(matches!(err, GatewayError::MalformedRequest(_)));
    }
}
