//! Ruleset fixture format.
//!
//! A ruleset is a list of regex patterns over observation text. Each match
//! yields effects; `$1`..`$9` expand to capture groups and `$location` to the
//! agent location at the moment the effect is applied. Effects from all
//! patterns are applied in the order their matches start in the text.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::SummaryStyle;

pub const RULESET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainRuleset {
    pub format_version: u32,
    pub domain_name: String,
    #[serde(default)]
    pub manipulators: Vec<String>,
    #[serde(default)]
    pub summary_style: SummaryStyle,
    pub policy: ConflictPolicy,
    pub patterns: Vec<PatternRule>,
}

/// What gets retracted when an entity is observed again.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConflictPolicy {
    /// Block-stacking rebuild: every block mentioned in the observation has
    /// its `on`/`on_table`/`clear`/`not_clear` facts rebuilt from scratch,
    /// clearness is derived for blocks that were not described explicitly,
    /// and `arm_empty`/`arm_not_empty` is always rewritten.
    BlocksRebuild,
    /// An asserted predicate replaces earlier predicates with the same name
    /// and first argument. Names in `positional` form one exclusive family:
    /// asserting any of them retracts the others for that entity and releases
    /// it from every manipulator.
    RetractMentioned {
        #[serde(default)]
        positional: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternRule {
    #[serde(rename = "match")]
    pub pattern: String,
    /// Names of the capture groups, in order. Documentation only, but the
    /// count must equal the regex's group count.
    #[serde(default)]
    pub captures: Vec<String>,
    pub effects: Vec<Effect>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Effect {
    /// Add a predicate given as a canonical template, e.g. `on($1,$2)`.
    Assert { predicate: String },
    /// Manipulator now holds the object.
    Hold { manipulator: String, object: String },
    /// Manipulator is empty.
    Release { manipulator: String },
    /// Agent location.
    Locate { location: String },
    Visit { location: String },
    /// Object seen at a location (or `inventory`).
    Discover { object: String, at: String },
    /// Comma/and separated object list seen at a location.
    DiscoverList { list: String, at: String },
    /// Complete contents of a location: listed objects are placed there and
    /// objects previously recorded there but not listed are forgotten.
    Contents { location: String, list: String },
    /// Complete inventory listing.
    Inventory { list: String },
    /// Object moved into the inventory.
    Carry { object: String },
    /// Object put down at a location; it leaves every manipulator.
    Place { object: String, at: String },
}

#[derive(Debug, Error)]
pub enum RulesetError {
    #[error("ruleset is not valid JSON: {0}")]
    Json(String),
    #[error("unsupported ruleset format_version {0}")]
    UnsupportedVersion(u32),
    #[error("pattern `{pattern}` does not compile: {message}")]
    Regex { pattern: String, message: String },
    #[error("pattern `{pattern}` has {groups} capture groups but declares {declared}")]
    CaptureCount {
        pattern: String,
        groups: usize,
        declared: usize,
    },
    #[error("pattern `{pattern}` references ${index} but has only {groups} groups")]
    BadReference {
        pattern: String,
        index: usize,
        groups: usize,
    },
}

impl DomainRuleset {
    pub fn from_json(text: &str) -> Result<Self, RulesetError> {
        let rs: DomainRuleset =
            serde_json::from_str(text).map_err(|e| RulesetError::Json(e.to_string()))?;
        if rs.format_version != RULESET_FORMAT_VERSION {
            return Err(RulesetError::UnsupportedVersion(rs.format_version));
        }
        Ok(rs)
    }
}

impl Effect {
    fn templates(&self) -> Vec<&str> {
        match self {
            Effect::Assert { predicate } => alloc::vec![predicate],
            Effect::Hold {
                manipulator,
                object,
            } => alloc::vec![manipulator, object],
            Effect::Release { manipulator } => alloc::vec![manipulator],
            Effect::Locate { location } | Effect::Visit { location } => alloc::vec![location],
            Effect::Discover { object, at } | Effect::Place { object, at } => {
                alloc::vec![object, at]
            }
            Effect::DiscoverList { list, at } => alloc::vec![list, at],
            Effect::Contents { location, list } => alloc::vec![location, list],
            Effect::Inventory { list } => alloc::vec![list],
            Effect::Carry { object } => alloc::vec![object],
        }
    }
}

pub(crate) struct CompiledPattern {
    pub regex: Regex,
    pub effects: Vec<Effect>,
}

pub(crate) fn compile(rs: &DomainRuleset) -> Result<Vec<CompiledPattern>, RulesetError> {
    let mut out = Vec::with_capacity(rs.patterns.len());
    for rule in &rs.patterns {
        let regex = Regex::new(&rule.pattern).map_err(|e| RulesetError::Regex {
            pattern: rule.pattern.clone(),
            message: format!("{e}"),
        })?;
        let groups = regex.captures_len() - 1;
        if !rule.captures.is_empty() && rule.captures.len() != groups {
            return Err(RulesetError::CaptureCount {
                pattern: rule.pattern.clone(),
                groups,
                declared: rule.captures.len(),
            });
        }
        for eff in &rule.effects {
            for t in eff.templates() {
                for index in references(t) {
                    if index == 0 || index > groups {
                        return Err(RulesetError::BadReference {
                            pattern: rule.pattern.clone(),
                            index,
                            groups,
                        });
                    }
                }
            }
        }
        out.push(CompiledPattern {
            regex,
            effects: rule.effects.clone(),
        });
    }
    Ok(out)
}

fn references(template: &str) -> Vec<usize> {
    let bytes = template.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'$' && i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit() {
            out.push((bytes[i + 1] - b'0') as usize);
            i += 2;
        } else {
            i += 1;
        }
    }
    out
}

/// Expands `$N` and `$location` in a template.
pub(crate) fn expand(template: &str, caps: &[Option<&str>], location: Option<&str>) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(pos) = rest.find('$') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos + 1..];
        if let Some(after) = tail.strip_prefix("location") {
            out.push_str(location.unwrap_or("unknown"));
            rest = after;
        } else if let Some(d) = tail.chars().next().filter(|c| c.is_ascii_digit()) {
            let idx = d as usize - '0' as usize;
            out.push_str(caps.get(idx).copied().flatten().unwrap_or("").trim());
            rest = &tail[1..];
        } else {
            out.push('$');
            rest = tail;
        }
    }
    out.push_str(rest);
    out
}

/// Splits "a soapbar 1, and a soapbar 2" into ["soapbar 1", "soapbar 2"].
/// "nothing" yields an empty list.
pub(crate) fn split_object_list(list: &str) -> Vec<String> {
    let mut out = Vec::new();
    for piece in list.split(',') {
        for part in piece.split(" and ") {
            let mut p = part.trim();
            for prefix in ["and ", "a ", "an ", "the ", "some "] {
                if let Some(s) = p.strip_prefix(prefix) {
                    p = s.trim();
                }
            }
            let p = p.trim_end_matches('.').trim().to_lowercase();
            if p.is_empty() || p == "nothing" {
                continue;
            }
            out.push(p);
        }
    }
    out
}
