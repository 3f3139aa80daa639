//! `{{ var }}` placeholder substitution.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("template `{template}` needs variable `{name}`")]
    MissingVariable { template: String, name: String },
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("invalid prompt data: {0}")]
    InvalidData(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    name: String,
    body: String,
    required: BTreeSet<String>,
}

/// One `{{ name }}` occurrence: byte range and trimmed name.
fn placeholders(body: &str) -> impl Iterator<Item = (usize, usize, &str)> {
    let mut pos = 0;
    core::iter::from_fn(move || loop {
        let open = pos + body[pos..].find("{{")?;
        let close = open + 2 + body[open + 2..].find("}}")?;
        let name = body[open + 2..close].trim();
        if !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            pos = close + 2;
            return Some((open, close + 2, name));
        }
        pos = open + 2;
    })
}

impl PromptTemplate {
    pub fn new(name: impl Into<String>, body: impl Into<String>) -> Self {
        let body = body.into();
        let required = placeholders(&body).map(|(_, _, n)| n.to_string()).collect();
        Self { name: name.into(), body, required }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn required(&self) -> &BTreeSet<String> {
        &self.required
    }

    /// Single pass: substituted values are never re-scanned, so a binding
    /// containing `{{ x }}` comes through literally. Extra bindings are ignored.
    pub fn render(&self, bindings: &[(&str, &str)]) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.body.len());
        let mut last = 0;
        for (start, end, name) in placeholders(&self.body) {
            let value = bindings
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| TemplateError::MissingVariable {
                    template: self.name.clone(),
                    name: name.to_string(),
                })?;
            out.push_str(&self.body[last..start]);
            out.push_str(value);
            last = end;
        }
        out.push_str(&self.body[last..]);
        Ok(out)
    }
}
