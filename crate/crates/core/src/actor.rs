//! Reason-and-act executor for a single subgoal, plus the skill library.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ActorStep, ComponentTag, SubEpisode, SubEpisodeStatus, Subgoal, SymbolicMemory};
use crate::env::{Domain, Environment};
use crate::gateway::{Gateway, GatewayError, Message, PromptSet};
use crate::symbolic::SymbolicTracker;

pub const SUBGOAL_COMPLETED: &str = "SUBGOAL COMPLETED";
pub const REQUEST_REPLAN: &str = "REQUEST_REPLAN[";
pub const DEFAULT_MAX_SUB_STEPS: u32 = 35;

const NO_COMMAND_FEEDBACK: &str = "No command was found in your response. Put exactly one command in markdown backticks, or output SUBGOAL COMPLETED or REQUEST_REPLAN[<reason>].";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActorCommand {
    Completed,
    Replan(String),
    Command(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("empty completion")]
    EmptyCompletion,
}

fn replan_reason(after: &str) -> String {
    let mut depth = 1i32;
    for (i, c) in after.char_indices() {
        match c {
            '[' => depth += 1,
            ']' => {
                depth -= 1;
                if depth == 0 {
                    return after[..i].trim().to_string();
                }
            }
            '\n' => return after[..i].trim().to_string(),
            _ => {}
        }
    }
    after.trim().to_string()
}

/// Contents of the last complete triple-backtick fence, minus a language tag.
fn last_fence(text: &str) -> Option<String> {
    let marks: Vec<usize> = text.match_indices("```").map(|(i, _)| i).collect();
    if marks.len() < 2 {
        return None;
    }
    let pair = (marks.len() / 2) * 2;
    let (open, close) = (marks[pair - 2], marks[pair - 1]);
    let inner = &text[open + 3..close];
    let mut lines = inner.lines();
    let first = lines.next().unwrap_or("");
    let rest: Vec<&str> = lines.map(str::trim).filter(|l| !l.is_empty()).collect();
    let tagged = !first.trim().is_empty()
        && !first.starts_with(char::is_whitespace)
        && !first.contains(' ')
        && !rest.is_empty();
    let candidate = if tagged || first.trim().is_empty() { rest.first().copied() } else { Some(first.trim()) };
    candidate.filter(|c| !c.is_empty()).map(String::from)
}

fn last_inline_code(text: &str) -> Option<String> {
    let parts: Vec<&str> = text.split('`').collect();
    if parts.len() < 3 {
        return None;
    }
    let last_closed = if parts.len() % 2 == 1 { parts.len() - 2 } else { parts.len() - 3 };
    (1..=last_closed)
        .rev()
        .step_by(2)
        .map(|i| parts[i].trim())
        .find(|s| !s.is_empty() && !s.contains('\n'))
        .map(String::from)
}

/// Markers first (the later one wins if both appear), then the last fenced
/// command, then the last inline code span, then the last nonempty line.
pub fn extract_command(completion: &str) -> Result<ActorCommand, ExtractError> {
    let text = completion.trim();
    if text.is_empty() {
        return Err(ExtractError::EmptyCompletion);
    }
    let done = text.rfind(SUBGOAL_COMPLETED);
    let replan = text.rfind(REQUEST_REPLAN);
    match (done, replan) {
        (Some(d), Some(r)) if r > d => return Ok(ActorCommand::Replan(replan_reason(&text[r + REQUEST_REPLAN.len()..]))),
        (Some(_), _) => return Ok(ActorCommand::Completed),
        (None, Some(r)) => return Ok(ActorCommand::Replan(replan_reason(&text[r + REQUEST_REPLAN.len()..]))),
        (None, None) => {}
    }
    if let Some(cmd) = last_fence(text).or_else(|| last_inline_code(text)) {
        return Ok(ActorCommand::Command(cmd));
    }
    let line = text
        .lines()
        .rev()
        .map(|l| l.trim().trim_matches('`').trim())
        .find(|l| !l.is_empty())
        .ok_or(ExtractError::EmptyCompletion)?;
    Ok(ActorCommand::Command(line.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillDef {
    pub name: String,
    /// Case-insensitive regex over the subgoal description.
    pub pattern: String,
    pub exemplar: String,
    /// Used only when no other skill matches.
    #[serde(default)]
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct SkillFile {
    format_version: u32,
    #[serde(default)]
    domain: Option<String>,
    skills: Vec<SkillDef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SkillError {
    #[error("skill library: {0}")]
    Format(String),
    #[error("skill `{name}`: bad pattern: {detail}")]
    Pattern { name: String, detail: String },
    #[error("skill library has no fallback skill")]
    NoFallback,
}

#[derive(Debug, Clone)]
pub struct SkillLibrary {
    skills: Vec<(SkillDef, Regex)>,
}

const SKILL_FIXTURES: [(Domain, &str); 4] = [
    (Domain::Blocksworld, include_str!("../fixtures/skills/blocksworld.json")),
    (Domain::Gripper, include_str!("../fixtures/skills/gripper.json")),
    (Domain::Household, include_str!("../fixtures/skills/household.json")),
    (Domain::Adventure, include_str!("../fixtures/skills/adventure.json")),
];

impl SkillLibrary {
    pub fn from_json(text: &str) -> Result<Self, SkillError> {
        let file: SkillFile = serde_json::from_str(text).map_err(|e| SkillError::Format(e.to_string()))?;
        if file.format_version != 1 {
            return Err(SkillError::Format(format!("unsupported format_version {}", file.format_version)));
        }
        Self::new(file.skills)
    }

    pub fn new(skills: Vec<SkillDef>) -> Result<Self, SkillError> {
        if !skills.iter().any(|s| s.fallback) {
            return Err(SkillError::NoFallback);
        }
        let skills = skills
            .into_iter()
            .map(|s| {
                let re = Regex::new(&format!("(?i){}", s.pattern))
                    .map_err(|e| SkillError::Pattern { name: s.name.clone(), detail: e.to_string() })?;
                Ok((s, re))
            })
            .collect::<Result<Vec<_>, SkillError>>()?;
        Ok(Self { skills })
    }

    pub fn bundled(domain: Domain) -> Self {
        let text = SKILL_FIXTURES.iter().find(|(d, _)| *d == domain).map(|(_, t)| *t).expect("fixture per domain");
        Self::from_json(text).expect("bundled skill library is valid")
    }

    pub fn skills(&self) -> impl Iterator<Item = &SkillDef> {
        self.skills.iter().map(|(s, _)| s)
    }
}

/// Skills whose pattern matches, most matched characters first, ties in
/// library order; the fallback skills when nothing matches.
pub fn select_skills<'l>(subgoal: &Subgoal, lib: &'l SkillLibrary, limit: usize) -> Vec<&'l SkillDef> {
    let limit = limit.max(1);
    let mut scored: Vec<(usize, usize, &SkillDef)> = lib
        .skills
        .iter()
        .enumerate()
        .filter(|(_, (s, _))| !s.fallback)
        .filter_map(|(i, (s, re))| {
            let score: usize = re.find_iter(&subgoal.description).map(|m| m.len()).sum();
            re.is_match(&subgoal.description).then_some((score, i, s))
        })
        .collect();
    scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut out: Vec<&SkillDef> = scored.into_iter().map(|(_, _, s)| s).take(limit).collect();
    if out.is_empty() {
        out = lib.skills().filter(|s| s.fallback).take(limit).collect();
    }
    out
}

/// What the actor's "Your Current State" section is bound to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateBinding {
    /// The full planning summary of the symbolic memory.
    #[default]
    Summary,
    /// Only the agent location.
    Location,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorConfig {
    pub max_sub_steps: u32,
    pub skill_limit: usize,
    pub state_binding: StateBinding,
}

impl Default for ActorConfig {
    fn default() -> Self {
        Self { max_sub_steps: DEFAULT_MAX_SUB_STEPS, skill_limit: 2, state_binding: StateBinding::Summary }
    }
}

pub struct ActorContext<'a> {
    pub prompts: &'a PromptSet,
    pub skills: &'a SkillLibrary,
    pub tracker: &'a SymbolicTracker,
    pub config: &'a ActorConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorOutcome {
    pub episode: SubEpisode,
    pub memory: SymbolicMemory,
    /// Set when the backend failed mid-episode; the episode is cut short.
    pub error: Option<GatewayError>,
}

fn state_text(m: &SymbolicMemory, binding: StateBinding) -> String {
    match binding {
        StateBinding::Summary => m.planning_summary(),
        StateBinding::Location => match &m.agent_location {
            Some(l) => format!("Location: at {l}"),
            None => "Location: unknown".into(),
        },
    }
}

pub fn instance_prompt(ctx: &ActorContext<'_>, subgoal: &Subgoal, memory: &SymbolicMemory) -> String {
    let skills = select_skills(subgoal, ctx.skills, ctx.config.skill_limit);
    let exemplars: Vec<&str> = skills.iter().map(|s| s.exemplar.as_str()).collect();
    let hint = match &subgoal.search_locations {
        Some(locs) => format!("Search locations (most likely first): {}", locs.join(", ")),
        None => String::new(),
    };
    let state = state_text(memory, ctx.config.state_binding);
    let g = &ctx.prompts.guide;
    ctx.prompts
        .actor_instance
        .render(&[
            ("domain_instructions", &g.domain_instructions),
            ("example_format", &g.example_format),
            ("skill_exemplars", &exemplars.join("\n\n")),
            ("subgoal", &subgoal.description),
            ("search_hint", &hint),
            ("location", &state),
        ])
        .unwrap_or_else(|_| ctx.prompts.actor_instance.body().to_string())
}

/// Runs the actor loop for one subgoal. Every actor turn counts toward
/// `budget`; only commands sent to the environment count as env steps.
pub fn execute_subgoal(
    gw: &mut Gateway<'_>,
    ctx: &ActorContext<'_>,
    subgoal: &Subgoal,
    env: &mut dyn Environment,
    memory: SymbolicMemory,
    budget: u32,
) -> ActorOutcome {
    let mut memory = memory;
    let mut steps: Vec<ActorStep> = Vec::new();
    let mut consumed = 0u32;
    let mut messages = vec![
        Message::system(ctx.prompts.actor_system.body()),
        Message::user(instance_prompt(ctx, subgoal, &memory)),
    ];
    let finish = |steps, status, consumed, memory, error| ActorOutcome {
        episode: SubEpisode { subgoal: subgoal.clone(), steps, status, env_steps_consumed: consumed },
        memory,
        error,
    };
    while (steps.len() as u32) < budget {
        gw.observe_ground_truth(&env.ground_state());
        let raw = match gw.complete(ComponentTag::Actor, messages.clone(), 0) {
            Ok(r) => r,
            Err(e) => {
                let status = SubEpisodeStatus::ReplanRequested { reason: format!("backend error: {e}") };
                return finish(steps, status, consumed, memory, Some(e));
            }
        };
        messages.push(Message::assistant(raw.clone()));
        match extract_command(&raw) {
            Ok(ActorCommand::Completed) => return finish(steps, SubEpisodeStatus::Completed, consumed, memory, None),
            Ok(ActorCommand::Replan(reason)) => {
                return finish(steps, SubEpisodeStatus::ReplanRequested { reason }, consumed, memory, None)
            }
            Ok(ActorCommand::Command(cmd)) => {
                let obs = env.step(&cmd);
                consumed += 1;
                memory = ctx.tracker.update_memory(&memory, &obs, Some(&cmd));
                messages.push(Message::user(format!(
                    "Observation: {obs}\n\nYour Current State:\n{}",
                    state_text(&memory, ctx.config.state_binding)
                )));
                steps.push(ActorStep { action: cmd, observation: obs, sent: true });
            }
            Err(ExtractError::EmptyCompletion) => {
                messages.push(Message::user(NO_COMMAND_FEEDBACK));
                steps.push(ActorStep { action: String::new(), observation: NO_COMMAND_FEEDBACK.into(), sent: false });
            }
        }
    }
    finish(steps, SubEpisodeStatus::Timeout, consumed, memory, None)
}
