//! Belief update: five verification questions about the last sub-episode,
//! then one synthesis call producing the new textual memory.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::domain::{
    render_belief, BeliefState, ComponentTag, Plan, SubEpisode, Subgoal, SubgoalOutcome, SymbolicMemory,
    TextualMemory, VerificationEntry, VerificationReport, STATUS_PREFIX,
};
use crate::gateway::{Gateway, GatewayError, Message, PromptSet};

pub const SYNTHESIS_FALLBACK_STATUS: &str = "Status: belief update failed to parse";
pub const UNCERTAIN: &str = "Uncertain";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeliefConfig {
    /// Keep at most this many learned facts; None keeps all.
    pub facts_cap: Option<usize>,
    /// Require the synthesis reply to be a bare JSON object with exactly the
    /// three keys.
    pub strict_json: bool,
    pub synthesis_reprompts: u32,
}

impl Default for BeliefConfig {
    fn default() -> Self {
        Self { facts_cap: None, strict_json: false, synthesis_reprompts: 1 }
    }
}

pub struct BeliefContext<'a> {
    pub prompts: &'a PromptSet,
    pub config: &'a BeliefConfig,
}

fn strip_label<'t>(line: &'t str, label: &str) -> Option<&'t str> {
    let t = line.trim().trim_start_matches(['*', '#', '-', ' ']);
    let head = t.get(..label.len())?;
    if !head.eq_ignore_ascii_case(label) {
        return None;
    }
    let rest = &t[label.len()..];
    let colon = rest.find(':')?;
    // Anything between the label and the colon must be a parenthetical or markup.
    let between = rest[..colon].trim().trim_matches('*');
    if !(between.is_empty() || (between.starts_with('(') && between.ends_with(')'))) {
        return None;
    }
    Some(rest[colon + 1..].trim().trim_matches('*').trim())
}

/// Reads the ANSWER and JUSTIFICATION lines of a verification reply.
pub fn parse_verification(question: &str, text: &str) -> VerificationEntry {
    let lines: Vec<&str> = text.lines().collect();
    let answer_at = lines.iter().position(|l| strip_label(l, "ANSWER").is_some());
    let just_at = lines.iter().position(|l| strip_label(l, "JUSTIFICATION").is_some());
    let clean = |s: &str| s.trim().trim_start_matches('[').trim_end_matches(']').trim().to_string();
    let answer = answer_at.map(|i| clean(strip_label(lines[i], "ANSWER").unwrap_or("")));
    let justification = match just_at {
        Some(i) => {
            let mut parts = vec![strip_label(lines[i], "JUSTIFICATION").unwrap_or("").to_string()];
            parts.extend(
                lines[i + 1..]
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| Some(i + 1 + j) != answer_at)
                    .map(|(_, l)| l.trim().to_string())
                    .filter(|l| !l.is_empty()),
            );
            Some(clean(&parts.join(" ")))
        }
        None => None,
    };
    let parsed = answer.is_some() || justification.is_some();
    let justification = justification.unwrap_or_else(|| {
        lines
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != answer_at)
            .map(|(_, l)| l.trim())
            .filter(|l| !l.is_empty())
            .collect::<Vec<_>>()
            .join(" ")
    });
    let answer = answer.filter(|a| !a.is_empty()).unwrap_or_else(|| UNCERTAIN.to_string());
    VerificationEntry { question: question.to_string(), answer, justification, parsed }
}

/// The context block shared by all verification questions.
pub fn verification_context(episode: &SubEpisode, memory: &SymbolicMemory) -> String {
    format!(
        "Subgoal: {}\n\nExecution Trace:\n{}\n\nSymbolic Memory:\n{}",
        episode.subgoal.description,
        episode.trace(),
        memory.planning_summary()
    )
}

/// One request per question, in question order. Stops at the first backend
/// error; unanswered questions are recorded as unparsed `Uncertain` entries.
pub fn verify(
    gw: &mut Gateway<'_>,
    ctx: &BeliefContext<'_>,
    memory: &SymbolicMemory,
    episode: &SubEpisode,
    subgoal: &Subgoal,
) -> (VerificationReport, Option<GatewayError>) {
    let questions = ctx.prompts.verification_questions(&subgoal.description);
    let context = verification_context(episode, memory);
    let mut entries = Vec::with_capacity(questions.len());
    let mut error = None;
    for q in &questions {
        if let Some(e) = &error {
            entries.push(VerificationEntry {
                question: q.clone(),
                answer: UNCERTAIN.into(),
                justification: format!("not asked: {e}"),
                parsed: false,
            });
            continue;
        }
        let prompt = ctx
            .prompts
            .verification_instance
            .render(&[("context", &context), ("question", q)])
            .unwrap_or_else(|_| format!("{context}\n\nQUESTION: {q}"));
        let messages = vec![Message::system(ctx.prompts.verification_system.body()), Message::user(prompt)];
        match gw.complete(ComponentTag::Verification, messages, 0) {
            Ok(text) => entries.push(parse_verification(q, &text)),
            Err(e) => {
                entries.push(VerificationEntry {
                    question: q.clone(),
                    answer: UNCERTAIN.into(),
                    justification: format!("backend error: {e}"),
                    parsed: false,
                });
                error = Some(e);
            }
        }
    }
    (VerificationReport { entries }, error)
}

/// The synthesis reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisJson {
    pub status_line: String,
    pub justification: String,
    pub learned_facts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
struct LenientSynthesis {
    status_line: String,
    #[serde(default)]
    justification: String,
    #[serde(default)]
    learned_facts: Vec<String>,
}

/// Byte ranges of balanced `{...}` spans in order of their opening brace
/// (so outer objects come before nested ones), skipping braces inside strings.
fn object_spans(text: &str) -> Vec<(usize, usize)> {
    let bytes = text.as_bytes();
    let mut spans = Vec::new();
    let mut start = 0;
    while let Some(off) = text[start..].find('{') {
        let open = start + off;
        let (mut depth, mut in_str, mut esc) = (0i32, false, false);
        let mut end = None;
        for (i, &b) in bytes.iter().enumerate().skip(open) {
            if in_str {
                match (esc, b) {
                    (true, _) => esc = false,
                    (false, b'\\') => esc = true,
                    (false, b'"') => in_str = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_str = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(i + 1);
                        break;
                    }
                }
                _ => {}
            }
        }
        if let Some(e) = end {
            spans.push((open, e));
        }
        start = open + 1;
    }
    spans
}

/// Finds the first balanced JSON object that parses as a synthesis reply.
/// Strict mode accepts only a bare object with exactly the three keys.
pub fn extract_synthesis(text: &str, strict: bool) -> Result<SynthesisJson, String> {
    if strict {
        return serde_json::from_str::<SynthesisJson>(text.trim()).map_err(|e| e.to_string());
    }
    let mut last_err = String::from("no JSON object found");
    for (a, b) in object_spans(text) {
        match serde_json::from_str::<LenientSynthesis>(&text[a..b]) {
            Ok(l) => {
                return Ok(SynthesisJson {
                    status_line: l.status_line,
                    justification: l.justification,
                    learned_facts: l.learned_facts,
                })
            }
            Err(e) => last_err = e.to_string(),
        }
    }
    Err(last_err)
}

fn render_plan(plan: Option<&Plan>) -> String {
    match plan {
        Some(p) => p.subgoals.iter().enumerate().map(|(i, s)| format!("{}. {}", i + 1, s)).collect::<Vec<_>>().join("\n"),
        None => "(None)".into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOutcome {
    pub textual: TextualMemory,
    pub raw: Vec<String>,
    /// True when the fallback status was used.
    pub failed: bool,
    pub error: Option<GatewayError>,
}

/// One synthesis request, one corrective re-prompt, then the fallback.
pub fn synthesize(
    gw: &mut Gateway<'_>,
    ctx: &BeliefContext<'_>,
    prev: &BeliefState,
    memory: &SymbolicMemory,
    report: &VerificationReport,
    episode: &SubEpisode,
    latest_plan: Option<&Plan>,
) -> SynthesisOutcome {
    let k = prev.k + 1;
    let prompt = ctx
        .prompts
        .synthesis_instance
        .render(&[
            ("previous_belief", &render_belief(prev)),
            ("memory_summary", &memory.planning_summary()),
            ("latest_plan", &render_plan(latest_plan)),
            ("subgoal", &episode.subgoal.description),
            ("last_subgoal_outcome", &episode.status.label()),
            ("qa_summary", &report.summary()),
        ])
        .unwrap_or_else(|_| ctx.prompts.synthesis_instance.body().to_string());
    let mut messages = vec![Message::system(ctx.prompts.synthesis_system.body()), Message::user(prompt)];

    let mut next = prev.textual.clone();
    next.plan = latest_plan.cloned().or_else(|| prev.textual.plan.clone());
    next.last_subgoal = Some(SubgoalOutcome {
        description: episode.subgoal.description.clone(),
        outcome: episode.status.label(),
    });

    let mut raw = Vec::new();
    let mut detail = String::new();
    for attempt in 0..=ctx.config.synthesis_reprompts {
        let text = match gw.complete(ComponentTag::Synthesis, messages.clone(), attempt) {
            Ok(t) => t,
            Err(e) => {
                next.status_line = SYNTHESIS_FALLBACK_STATUS.into();
                next.justification = format!("backend error: {e}");
                return SynthesisOutcome { textual: next, raw, failed: true, error: Some(e) };
            }
        };
        raw.push(text.clone());
        match extract_synthesis(&text, ctx.config.strict_json) {
            Ok(j) => {
                let status = j.status_line.trim();
                next.status_line = if status.starts_with(STATUS_PREFIX) {
                    status.to_string()
                } else {
                    format!("{STATUS_PREFIX}{}", status.trim_start_matches("Status:").trim())
                };
                next.justification = j.justification.trim().to_string();
                next.append_facts(k, j.learned_facts.iter());
                if let Some(cap) = ctx.config.facts_cap {
                    next.cap_facts(cap);
                }
                return SynthesisOutcome { textual: next, raw, failed: false, error: None };
            }
            Err(e) => {
                detail = e;
                messages.push(Message::assistant(text));
                messages.push(Message::user(format!(
                    "Your reply could not be parsed ({detail}). Respond ONLY with a valid JSON object containing \"status_line\", \"justification\", and \"learned_facts\"."
                )));
            }
        }
    }
    next.status_line = SYNTHESIS_FALLBACK_STATUS.into();
    next.justification = format!("synthesis reply could not be parsed: {detail}");
    SynthesisOutcome { textual: next, raw, failed: true, error: None }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefUpdate {
    pub belief: BeliefState,
    pub report: VerificationReport,
    pub synthesis_raw: Vec<String>,
    pub synthesis_failed: bool,
    pub error: Option<GatewayError>,
}

/// Verification then synthesis; the symbolic memory is passed through as is.
pub fn belief_update(
    gw: &mut Gateway<'_>,
    ctx: &BeliefContext<'_>,
    prev: &BeliefState,
    mem_next: SymbolicMemory,
    episode: &SubEpisode,
    latest_plan: Option<&Plan>,
) -> BeliefUpdate {
    let (report, verr) = verify(gw, ctx, &mem_next, episode, &episode.subgoal);
    let synth = if let Some(e) = verr.clone() {
        let mut textual = prev.textual.clone();
        textual.status_line = SYNTHESIS_FALLBACK_STATUS.into();
        textual.justification = format!("backend error: {e}");
        textual.plan = latest_plan.cloned().or_else(|| prev.textual.plan.clone());
        textual.last_subgoal =
            Some(SubgoalOutcome { description: episode.subgoal.description.clone(), outcome: episode.status.label() });
        SynthesisOutcome { textual, raw: Vec::new(), failed: true, error: Some(e) }
    } else {
        synthesize(gw, ctx, prev, &mem_next, &report, episode, latest_plan)
    };
    BeliefUpdate {
        belief: BeliefState { symbolic: mem_next, textual: synth.textual, k: prev.k + 1 },
        report,
        synthesis_raw: synth.raw,
        synthesis_failed: synth.failed,
        error: synth.error,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ActorStep, SubEpisodeStatus, SummaryStyle};
    use crate::env::{Domain, INVALID_ACTION_MESSAGE};
    use crate::gateway::{ChatRequest, Completion, FnBackend};

    #[test]
    fn verification_answer_and_justification() {
        let e = parse_verification(
            "q",
            "ANSWER (e.g., Yes/No/Uncertain/Value): Yes\nJUSTIFICATION: The inventory gained soapbar 2.",
        );
        assert_eq!((e.answer.as_str(), e.justification.as_str(), e.parsed), ("Yes", "The inventory gained soapbar 2.", true));
    }

    #[test]
    fn verification_missing_justification() {
        let e = parse_verification("q", "ANSWER: No\nThe agent never moved.");
        assert_eq!(e.answer, "No");
        assert_eq!(e.justification, "The agent never moved.");
        assert!(e.parsed);
    }

    #[test]
    fn verification_unparsed() {
        let e = parse_verification("q", "I think so.");
        assert_eq!(e.answer, UNCERTAIN);
        assert_eq!(e.justification, "I think so.");
        assert!(!e.parsed);
    }

    #[test]
    fn synthesis_json_lenient_and_strict() {
        let fenced = "Here you go:\n```json\n{\"status_line\":\"Status: Successfully navigated to the living room.\",\"justification\":\"j\",\"learned_facts\":[]}\n```";
        let j = extract_synthesis(fenced, false).unwrap();
        assert_eq!(j.status_line, "Status: Successfully navigated to the living room.");
        assert!(extract_synthesis(fenced, true).is_err());
        let extra = r#"{"status_line":"Status: x","justification":"j","learned_facts":[],"extra":1}"#;
        assert!(extract_synthesis(extra, false).is_ok());
        assert!(extract_synthesis(extra, true).is_err());
        assert!(extract_synthesis(r#"{"a": "}"} {"status_line":"Status: y"}"#, false).is_ok());
        assert!(extract_synthesis("no json", false).is_err());
    }

    fn episode(obs: &str) -> SubEpisode {
        SubEpisode {
            subgoal: Subgoal { description: "Take soapbar 1 from toilet 1".into(), search_locations: None, issued_at_k: 2 },
            steps: vec![ActorStep { action: "take soapbar 1 from toilet 1".into(), observation: obs.into(), sent: true }],
            status: SubEpisodeStatus::ReplanRequested { reason: "take keeps failing".into() },
            env_steps_consumed: 1,
        }
    }

    fn prev() -> BeliefState {
        let mut b = BeliefState::initial(SymbolicMemory::new("household", &["agent"], SummaryStyle::World));
        b.k = 2;
        b
    }

    const FACT: &str = "Error: Agent was unable to take soapbar 1 from toilet 1, indicating a potential restriction or condition not met for that action";

    #[test]
    fn five_plus_one_calls_and_fact_appended() {
        let mut b = FnBackend(|r: &ChatRequest| {
            Ok(Completion::text(match r.tag {
                ComponentTag::Verification => "ANSWER (e.g., Yes/No/Uncertain/Value): Yes\nJUSTIFICATION: ok".into(),
                _ => format!(
                    "{{\"status_line\":\"Status: Failed to take soapbar 1.\",\"justification\":\"j\",\"learned_facts\":[\"{FACT}\"]}}"
                ),
            }))
        });
        let prompts = PromptSet::bundled(Domain::Household);
        let cfg = BeliefConfig::default();
        let ctx = BeliefContext { prompts: &prompts, config: &cfg };
        let mut gw = Gateway::new(&mut b);
        let p = prev();
        let ep = episode(INVALID_ACTION_MESSAGE);
        let up = belief_update(&mut gw, &ctx, &p, p.symbolic.clone(), &ep, None);
        assert_eq!(gw.calls(ComponentTag::Verification).first, 5);
        assert_eq!(gw.calls(ComponentTag::Synthesis).first, 1);
        assert_eq!(up.report.entries.len(), 5);
        assert_eq!(up.belief.k, 3);
        assert_eq!(up.belief.symbolic, p.symbolic);
        assert_eq!(up.belief.textual.learned_facts[0].text, FACT);
        assert_eq!(up.belief.textual.learned_facts[0].k, 3);
        assert_eq!(up.belief.textual.last_subgoal.as_ref().unwrap().outcome, "Replan requested: take keeps failing");
    }

    #[test]
    fn synthesis_fallback_after_one_reprompt() {
        let mut b = FnBackend(|r: &ChatRequest| {
            Ok(Completion::text(match r.tag {
                ComponentTag::Verification => "ANSWER: Yes\nJUSTIFICATION: ok",
                _ => "not json",
            }))
        });
        let prompts = PromptSet::bundled(Domain::Household);
        let cfg = BeliefConfig::default();
        let ctx = BeliefContext { prompts: &prompts, config: &cfg };
        let mut gw = Gateway::new(&mut b);
        let mut p = prev();
        p.textual.append_facts(1, ["old fact"]);
        let up = belief_update(&mut gw, &ctx, &p, p.symbolic.clone(), &episode("x"), None);
        assert_eq!(up.belief.textual.status_line, SYNTHESIS_FALLBACK_STATUS);
        assert_eq!(up.belief.textual.learned_facts.len(), 1);
        assert!(up.synthesis_failed);
        assert_eq!(gw.calls(ComponentTag::Synthesis), crate::gateway::CallCount { first: 1, reprompts: 1 });
    }

    #[test]
    fn backend_failure_still_yields_belief() {
        let mut b = FnBackend(|_: &ChatRequest| Err(GatewayError::BackendUnavailable("down".into())));
        let prompts = PromptSet::bundled(Domain::Household);
        let cfg = BeliefConfig::default();
        let ctx = BeliefContext { prompts: &prompts, config: &cfg };
        let mut gw = Gateway::new(&mut b);
        let p = prev();
        let up = belief_update(&mut gw, &ctx, &p, p.symbolic.clone(), &episode("x"), None);
        assert_eq!(up.report.entries.len(), 5);
        assert!(up.error.is_some());
        assert!(up.belief.textual.status_line.starts_with("Status: "));
        assert_eq!(gw.calls(ComponentTag::Verification).first, 1);
    }
}
