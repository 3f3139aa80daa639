//! Subgoal planner: builds the planner conversation from history and belief,
//! and parses FULL PLAN / EXECUTE_SUBGOAL / TASK COMPLETE out of completions.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{render_belief_with, BeliefState, ComponentTag, Plan, Subgoal};
use crate::gateway::{Gateway, GatewayError, Message, PromptSet};

pub const FULL_PLAN: &str = "FULL PLAN";
pub const EXECUTE_SUBGOAL: &str = "EXECUTE_SUBGOAL[";
pub const TASK_COMPLETE: &str = "TASK COMPLETE";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanParseError {
    #[error("FULL PLAN is not followed by any numbered subgoal")]
    EmptyPlan,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SubgoalParseError {
    #[error("no EXECUTE_SUBGOAL[ block")]
    NoBlock,
    #[error("EXECUTE_SUBGOAL block has no DESC")]
    MissingDesc,
    #[error("EXECUTE_SUBGOAL block is not closed with `]`")]
    UnterminatedBlock,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlannerError {
    #[error("planner output unusable after {attempts} attempts: {detail}")]
    Parse { attempts: u32, detail: String, raw: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// One planner iteration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannerStep {
    pub k: u32,
    pub belief_snapshot: BeliefState,
    pub reasoning: String,
    pub plan: Option<Plan>,
    pub subgoal: Option<Subgoal>,
    pub task_complete: bool,
    pub raw_completion: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Most recent prior steps replayed into the prompt; None keeps all.
    pub history_window: Option<usize>,
    /// Most recent learned facts shown in rendered beliefs; None shows all.
    pub facts_window: Option<usize>,
    /// Corrective re-prompts after an unusable completion.
    pub max_reprompts: u32,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self { history_window: None, facts_window: None, max_reprompts: 2 }
    }
}

pub struct PlannerContext<'a> {
    pub prompts: &'a PromptSet,
    pub goal: &'a str,
    pub initial_observation: &'a str,
    pub config: &'a PlannerConfig,
}

fn enumerated(line: &str) -> Option<&str> {
    let t = line.trim_start();
    let digits = t.len() - t.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    if digits == 0 {
        return None;
    }
    let rest = t[digits..].strip_prefix('.').or_else(|| t[digits..].strip_prefix(')'))?;
    let item = rest.trim();
    (!item.is_empty()).then_some(item)
}

/// Collects the numbered lines after the first `FULL PLAN` token.
pub fn parse_full_plan(text: &str, k: u32) -> Result<Option<Plan>, PlanParseError> {
    let Some(at) = text.find(FULL_PLAN) else {
        return Ok(None);
    };
    let after = &text[at + FULL_PLAN.len()..];
    // The rest of the FULL PLAN line itself is ignored.
    let body = after.split_once('\n').map(|(_, b)| b).unwrap_or("");
    let mut subgoals = Vec::new();
    let mut header_allowed = true;
    for line in body.lines() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if header_allowed && subgoals.is_empty() && t.trim_matches('*').trim().eq_ignore_ascii_case("subgoals:") {
            header_allowed = false;
            continue;
        }
        match enumerated(t) {
            Some(item) => subgoals.push(item.to_string()),
            None => break,
        }
    }
    if subgoals.is_empty() {
        return Err(PlanParseError::EmptyPlan);
    }
    Ok(Some(Plan { subgoals, created_at_k: k }))
}

/// Body of the last EXECUTE_SUBGOAL block: from after the opening bracket to
/// a line consisting of `]`, or to the matching bracket for one-line blocks.
fn subgoal_block(text: &str) -> Result<&str, SubgoalParseError> {
    let at = text.rfind(EXECUTE_SUBGOAL).ok_or(SubgoalParseError::NoBlock)?;
    let inner = &text[at + EXECUTE_SUBGOAL.len()..];
    let first_line = inner.split('\n').next().unwrap_or("");
    if !first_line.trim().is_empty() {
        let mut depth = 1i32;
        for (i, c) in first_line.char_indices() {
            match c {
                '[' => depth += 1,
                ']' => {
                    depth -= 1;
                    if depth == 0 {
                        return Ok(&first_line[..i]);
                    }
                }
                _ => {}
            }
        }
    }
    let mut offset = 0;
    for line in inner.split_inclusive('\n') {
        if offset > 0 && line.trim_start().starts_with(']') {
            return Ok(&inner[..offset]);
        }
        offset += line.len();
    }
    Err(SubgoalParseError::UnterminatedBlock)
}

fn parse_locations(value: &str) -> Option<Vec<String>> {
    let value = match value.find('#') {
        Some(i) => &value[..i],
        None => value,
    };
    let v = value.trim();
    if v.is_empty() || v.eq_ignore_ascii_case("null") || v.eq_ignore_ascii_case("none") {
        return None;
    }
    let v = v.strip_prefix('[').unwrap_or(v);
    let v = v.strip_suffix(']').unwrap_or(v);
    let locs: Vec<String> = v
        .split(',')
        .map(|s| s.trim().trim_matches(|c| c == '"' || c == '\'').trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    (!locs.is_empty()).then_some(locs)
}

pub fn parse_execute_subgoal(text: &str, k: u32) -> Result<Subgoal, SubgoalParseError> {
    let block = subgoal_block(text)?;
    let mut desc: Option<Vec<&str>> = None;
    let mut locations = None;
    let mut in_desc = false;
    for line in block.lines() {
        let t = line.trim();
        if let Some(rest) = t.strip_prefix("DESC:") {
            desc = Some(vec![rest.trim()]);
            in_desc = true;
        } else if let Some(rest) = t.strip_prefix("SEARCH_LOCATIONS:") {
            locations = parse_locations(rest);
            in_desc = false;
        } else if in_desc && !t.is_empty() {
            if let Some(d) = desc.as_mut() {
                d.push(t);
            }
        }
    }
    let description = desc
        .map(|parts| parts.into_iter().filter(|p| !p.is_empty()).collect::<Vec<_>>().join(" "))
        .unwrap_or_default();
    if description.is_empty() {
        return Err(SubgoalParseError::MissingDesc);
    }
    Ok(Subgoal { description, search_locations: locations, issued_at_k: k })
}

/// The documented block format; parsing it gives back an equal subgoal.
pub fn render_subgoal(s: &Subgoal) -> String {
    let mut out = format!("{EXECUTE_SUBGOAL}\n  DESC: {}\n", s.description);
    if let Some(locs) = &s.search_locations {
        out.push_str(&format!("  SEARCH_LOCATIONS: [{}]\n", locs.join(", ")));
    }
    out.push(']');
    out
}

/// Parsed view of one completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedCompletion {
    pub reasoning: String,
    pub plan: Option<Plan>,
    pub subgoal: Option<Subgoal>,
    pub task_complete: bool,
}

/// A completion is usable if it holds a subgoal block, or declares the task
/// complete without one.
pub fn parse_completion(text: &str, k: u32) -> Result<ParsedCompletion, String> {
    let cut = [FULL_PLAN, EXECUTE_SUBGOAL, TASK_COMPLETE]
        .iter()
        .filter_map(|t| text.find(t))
        .min()
        .unwrap_or(text.len());
    let reasoning = text[..cut].trim().to_string();
    let plan = parse_full_plan(text, k).ok().flatten();
    if text.contains(EXECUTE_SUBGOAL) {
        let subgoal = parse_execute_subgoal(text, k).map_err(|e| e.to_string())?;
        return Ok(ParsedCompletion { reasoning, plan, subgoal: Some(subgoal), task_complete: false });
    }
    if text.contains(TASK_COMPLETE) {
        return Ok(ParsedCompletion { reasoning, plan, subgoal: None, task_complete: true });
    }
    Err(SubgoalParseError::NoBlock.to_string())
}

/// The JSON carried by the `analysis_feedback` message for a belief update.
pub fn analysis_feedback(after: &BeliefState, facts_window: Option<usize>) -> String {
    let new_facts: Vec<&str> = after
        .textual
        .learned_facts
        .iter()
        .filter(|f| f.k == after.k)
        .map(|f| f.text.as_str())
        .collect();
    serde_json::json!({
        "status_line": after.textual.status_line,
        "justification": after.textual.justification,
        "learned_facts": new_facts,
        "new_belief": render_belief_with(after, facts_window),
    })
    .to_string()
}

fn corrective(detail: &str) -> String {
    format!(
        "Your previous response could not be used ({detail}). Respond again with your reasoning followed by exactly one block in this format:\nEXECUTE_SUBGOAL[\n  DESC: <subgoal description>\n]\nor respond with {TASK_COMPLETE} if the goal has been achieved."
    )
}

/// The planner conversation for step `belief.k`.
pub fn build_messages(ctx: &PlannerContext<'_>, history: &[PlannerStep], belief: &BeliefState) -> Vec<Message> {
    let p = ctx.prompts;
    let system = p
        .planner_system
        .render(&[("task_exemplars", &p.guide.task_exemplars)])
        .unwrap_or_else(|_| p.planner_system.body().to_string());
    let task_room = format!("{}\n", ctx.initial_observation);
    let task = format!("Your task is to: {}", ctx.goal);
    let instance = p
        .planner_instance
        .render(&[
            ("goal", ctx.goal),
            ("initial_observation", ctx.initial_observation),
            ("task_room", &task_room),
            ("task", &task),
        ])
        .unwrap_or_else(|_| p.planner_instance.body().to_string());
    let mut messages = vec![Message::system(system), Message::user(instance)];

    let skip = match ctx.config.history_window {
        Some(w) => history.len().saturating_sub(w),
        None => 0,
    };
    for (j, step) in history.iter().enumerate().skip(skip) {
        messages.push(Message::assistant(step.raw_completion.clone()));
        let after = history.get(j + 1).map(|s| &s.belief_snapshot).unwrap_or(belief);
        messages.push(Message::assistant(format!(
            "analysis_feedback: {}",
            analysis_feedback(after, ctx.config.facts_window)
        )));
    }
    messages.push(Message::user(format!(
        "Current belief state:\n{}\n\nDecide the next subgoal and issue it with EXECUTE_SUBGOAL, or respond with {TASK_COMPLETE} if the goal has been achieved.",
        render_belief_with(belief, ctx.config.facts_window)
    )));
    messages
}

/// Asks the planner for the next subgoal, re-prompting on unusable output.
pub fn plan_next(
    gw: &mut Gateway<'_>,
    ctx: &PlannerContext<'_>,
    history: &[PlannerStep],
    belief: &BeliefState,
) -> Result<PlannerStep, PlannerError> {
    let k = belief.k;
    let mut messages = build_messages(ctx, history, belief);
    let mut attempt = 0;
    loop {
        let raw = gw.complete(ComponentTag::Planner, messages.clone(), attempt)?;
        match parse_completion(&raw, k) {
            Ok(parsed) => {
                return Ok(PlannerStep {
                    k,
                    belief_snapshot: belief.clone(),
                    reasoning: parsed.reasoning,
                    plan: parsed.plan,
                    subgoal: parsed.subgoal,
                    task_complete: parsed.task_complete,
                    raw_completion: raw,
                })
            }
            Err(detail) => {
                if attempt >= ctx.config.max_reprompts {
                    return Err(PlannerError::Parse { attempts: attempt + 1, detail, raw });
                }
                messages.push(Message::assistant(raw));
                messages.push(Message::user(corrective(&detail)));
                attempt += 1;
            }
        }
    }
}
