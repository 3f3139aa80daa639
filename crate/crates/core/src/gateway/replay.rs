//! Positional replay of a recorded transcript.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatRequest, Completion, GatewayError};
use crate::domain::ComponentTag;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayEntry {
    /// Checked in strict mode against the start of the request's last message.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_prompt_prefix: Option<String>,
    /// Checked in strict mode against the request's component tag.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<ComponentTag>,
    pub response: String,
}

const TRANSCRIPTS: &[(&str, &str)] = &[(
    "alfworld_two_soapbars.json",
    include_str!("../../fixtures/replay/alfworld_two_soapbars.json"),
)];

/// A transcript shipped with the crate, looked up by file name.
pub fn bundled_transcript(name: &str) -> Option<&'static str> {
    let base = name.rsplit('/').next().unwrap_or(name);
    TRANSCRIPTS.iter().find(|(n, _)| *n == base).map(|(_, t)| *t)
}

/// The i-th request gets the i-th response.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    entries: Vec<ReplayEntry>,
    position: usize,
    strict: bool,
}

impl ReplayBackend {
    pub fn new(entries: Vec<ReplayEntry>) -> Self {
        Self { entries, position: 0, strict: false }
    }

    /// Parses a JSON list of entries.
    pub fn from_json(text: &str) -> Result<Self, String> {
        let entries: Vec<ReplayEntry> = serde_json::from_str(text).map_err(|e| e.to_string())?;
        Ok(Self::new(entries))
    }

    pub fn strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn remaining(&self) -> usize {
        self.entries.len() - self.position
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(&mut self, req: &ChatRequest) -> Result<Completion, GatewayError> {
        let position = self.position;
        let entry = self.entries.get(position).ok_or(GatewayError::ReplayExhausted { position })?;
        if self.strict {
            if let Some(tag) = entry.tag {
                if tag != req.tag {
                    return Err(GatewayError::ReplayMismatch {
                        position,
                        detail: format!("expected a {} request, got {}", tag.as_str(), req.tag.as_str()),
                    });
                }
            }
            if let Some(prefix) = &entry.expected_prompt_prefix {
                if !req.last_content().starts_with(prefix.as_str()) {
                    return Err(GatewayError::ReplayMismatch {
                        position,
                        detail: format!("prompt does not start with {prefix:?}"),
                    });
                }
            }
        }
        self.position += 1;
        Ok(Completion::text(entry.response.clone()))
    }
}
