//! Shared value types passed between the planner, actor, belief update,
//! environments and the episode loop.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A ground atom such as `on(b1,b2)` or `arm_empty`.
///
/// Names and arguments are lowercase tokens without whitespace; arity is at
/// most three.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Predicate {
    name: String,
    args: Vec<String>,
}

pub const MAX_PREDICATE_ARITY: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PredicateParseError {
    #[error("predicate name is empty")]
    EmptyName,
    #[error("unbalanced parentheses in `{0}`")]
    Unbalanced(String),
    #[error("empty argument in `{0}`")]
    EmptyArgument(String),
    #[error("predicate `{0}` has more than three arguments")]
    TooManyArguments(String),
    #[error("invalid character in `{0}`")]
    InvalidToken(String),
}

fn is_token_char(c: char) -> bool {
    !(c.is_whitespace() || c == '(' || c == ')' || c == ',')
}

impl Predicate {
    /// Builds a predicate, normalizing tokens to lowercase.
    pub fn new<I, S>(name: &str, args: I) -> Result<Self, PredicateParseError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let name = name.trim().to_lowercase();
        if name.is_empty() {
            return Err(PredicateParseError::EmptyName);
        }
        if !name.chars().all(is_token_char) {
            return Err(PredicateParseError::InvalidToken(name));
        }
        let mut out = Vec::new();
        for a in args {
            let a = a.as_ref().trim().to_lowercase();
            if a.is_empty() {
                return Err(PredicateParseError::EmptyArgument(name));
            }
            if !a.chars().all(is_token_char) {
                return Err(PredicateParseError::InvalidToken(a));
            }
            out.push(a);
        }
        if out.len() > MAX_PREDICATE_ARITY {
            return Err(PredicateParseError::TooManyArguments(name));
        }
        Ok(Self { name, args: out })
    }

    /// Zero-arity predicate. Panics on an invalid name; meant for literals.
    pub fn atom(name: &str) -> Self {
        Self::new::<[&str; 0], &str>(name, []).expect("valid predicate literal")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn args(&self) -> &[String] {
        &self.args
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    /// True when any argument equals `entity`.
    pub fn mentions(&self, entity: &str) -> bool {
        self.args.iter().any(|a| a == entity)
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                f.write_str(a)?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Parses the canonical text form `name` or `name(a,b,...)`.
///
/// Whitespace anywhere in the input is dropped and tokens are lowercased.
pub fn canonical_predicate(text: &str) -> Result<Predicate, PredicateParseError> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    match compact.find('(') {
        None => {
            if compact.contains(')') {
                return Err(PredicateParseError::Unbalanced(compact));
            }
            if compact.contains(',') {
                return Err(PredicateParseError::InvalidToken(compact));
            }
            Predicate::new::<[&str; 0], &str>(&compact, [])
        }
        Some(open) => {
            let name = &compact[..open];
            if name.is_empty() {
                return Err(PredicateParseError::EmptyName);
            }
            let rest = &compact[open + 1..];
            let Some(inner) = rest.strip_suffix(')') else {
                return Err(PredicateParseError::Unbalanced(compact));
            };
            if inner.contains('(') || inner.contains(')') {
                return Err(PredicateParseError::Unbalanced(compact));
            }
            let args: Vec<&str> = inner.split(',').collect();
            if args.iter().any(|a| a.is_empty()) {
                return Err(PredicateParseError::EmptyArgument(compact));
            }
            Predicate::new(name, args)
        }
    }
}

impl FromStr for Predicate {
    type Err = PredicateParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        canonical_predicate(s)
    }
}

impl Serialize for Predicate {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Predicate {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        canonical_predicate(&s).map_err(serde::de::Error::custom)
    }
}

/// How a memory renders its planning summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SummaryStyle {
    /// Predicate listing with a `Holding:` dictionary line.
    #[default]
    Predicates,
    /// Agent / visited locations / discovered objects sections.
    World,
    /// `World` plus per-location `contains=[...]` lines.
    WorldWithContents,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscoveredObject {
    pub name: String,
    pub at: String,
}

/// Location tag used for carried objects in the discovered-object map.
pub const INVENTORY: &str = "inventory";

/// Symbolic memory: predicates plus agent-centric facts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolicMemory {
    pub domain_name: String,
    pub predicates: BTreeSet<Predicate>,
    pub holding: BTreeMap<String, Option<String>>,
    pub agent_location: Option<String>,
    pub visited: BTreeSet<String>,
    /// Insertion-ordered object -> location map.
    pub discovered: Vec<DiscoveredObject>,
    pub step: u64,
    #[serde(default)]
    pub style: SummaryStyle,
}

impl SymbolicMemory {
    pub fn new(domain_name: &str, manipulators: &[&str], style: SummaryStyle) -> Self {
        Self {
            domain_name: domain_name.to_string(),
            predicates: BTreeSet::new(),
            holding: manipulators.iter().map(|m| (m.to_string(), None)).collect(),
            agent_location: None,
            visited: BTreeSet::new(),
            discovered: Vec::new(),
            step: 0,
            style,
        }
    }

    pub fn has(&self, text: &str) -> bool {
        canonical_predicate(text).is_ok_and(|p| self.predicates.contains(&p))
    }

    /// Predicates rendered and sorted as text.
    pub fn sorted_predicates(&self) -> Vec<String> {
        let mut v: Vec<String> = self.predicates.iter().map(|p| p.to_string()).collect();
        v.sort();
        v
    }

    pub fn discovered_at(&self, object: &str) -> Option<&str> {
        self.discovered
            .iter()
            .find(|d| d.name == object)
            .map(|d| d.at.as_str())
    }

    pub fn set_discovered(&mut self, object: &str, at: &str) {
        match self.discovered.iter_mut().find(|d| d.name == object) {
            Some(d) => d.at = at.to_string(),
            None => self.discovered.push(DiscoveredObject {
                name: object.to_string(),
                at: at.to_string(),
            }),
        }
    }

    pub fn forget_discovered(&mut self, object: &str) {
        self.discovered.retain(|d| d.name != object);
    }

    /// Objects carried by any manipulator or tagged as inventory, sorted.
    pub fn inventory(&self) -> Vec<String> {
        let mut items: BTreeSet<String> = self.holding.values().flatten().cloned().collect();
        items.extend(
            self.discovered
                .iter()
                .filter(|d| d.at == INVENTORY)
                .map(|d| d.name.clone()),
        );
        items.into_iter().collect()
    }

    /// Checks the structural invariants; returns a description of the first
    /// violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.predicates.contains(&Predicate::atom("arm_empty"))
            && self.predicates.contains(&Predicate::atom("arm_not_empty"))
        {
            return Err("arm_empty and arm_not_empty both present".to_string());
        }
        let mut positioned: BTreeMap<&str, usize> = BTreeMap::new();
        for p in &self.predicates {
            if matches!(p.name(), "on" | "on_table" | "at") && p.arity() >= 1 {
                *positioned.entry(p.args()[0].as_str()).or_default() += 1;
            }
        }
        for (obj, n) in &positioned {
            if *n > 1 {
                return Err(format!("{obj} has {n} positional predicates"));
            }
        }
        for (m, held) in &self.holding {
            if let Some(obj) = held {
                if positioned.contains_key(obj.as_str()) {
                    return Err(format!("{m} holds {obj} but {obj} is positioned"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnedFact {
    /// Planner step whose belief update produced the fact.
    pub k: u32,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgoalOutcome {
    pub description: String,
    pub outcome: String,
}

/// Natural-language half of the belief state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextualMemory {
    pub status_line: String,
    pub justification: String,
    pub learned_facts: Vec<LearnedFact>,
    pub plan: Option<Plan>,
    pub last_subgoal: Option<SubgoalOutcome>,
}

pub const STATUS_PREFIX: &str = "Status: ";

impl Default for TextualMemory {
    fn default() -> Self {
        Self {
            status_line: format!("{STATUS_PREFIX}(None)"),
            justification: String::new(),
            learned_facts: Vec::new(),
            plan: None,
            last_subgoal: None,
        }
    }
}

impl TextualMemory {
    /// Appends facts not already present (exact match), tagging them with `k`.
    /// Blank entries are dropped. Returns how many were added.
    pub fn append_facts<I, S>(&mut self, k: u32, facts: I) -> usize
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut added = 0;
        for f in facts {
            let f = f.as_ref().trim();
            if f.is_empty() || self.learned_facts.iter().any(|x| x.text == f) {
                continue;
            }
            self.learned_facts.push(LearnedFact {
                k,
                text: f.to_string(),
            });
            added += 1;
        }
        added
    }

    /// Keeps only the newest `cap` facts.
    pub fn cap_facts(&mut self, cap: usize) {
        if self.learned_facts.len() > cap {
            let drop = self.learned_facts.len() - cap;
            self.learned_facts.drain(..drop);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeliefState {
    pub symbolic: SymbolicMemory,
    pub textual: TextualMemory,
    pub k: u32,
}

impl BeliefState {
    pub fn initial(symbolic: SymbolicMemory) -> Self {
        Self {
            symbolic,
            textual: TextualMemory::default(),
            k: 0,
        }
    }
}

/// Renders the belief state for prompting: symbolic summary, then the
/// structured text block.
pub fn render_belief(b: &BeliefState) -> String {
    render_belief_with(b, None)
}

/// As [`render_belief`], showing at most `facts_window` most recent facts.
pub fn render_belief_with(b: &BeliefState, facts_window: Option<usize>) -> String {
    let mut out = String::new();
    out.push_str("[Symbolic Memory]\n");
    out.push_str(&b.symbolic.planning_summary());
    out.push_str("\n\n");
    out.push_str(&render_textual(&b.textual, facts_window));
    out
}

/// The structured text block on its own.
pub fn render_textual(t: &TextualMemory, facts_window: Option<usize>) -> String {
    let mut lines: Vec<String> = Vec::new();
    lines.push("[Current Plan]".into());
    match &t.plan {
        Some(plan) => {
            lines.push("Subgoals".into());
            for (i, s) in plan.subgoals.iter().enumerate() {
                lines.push(format!("{}. {}", i + 1, s));
            }
        }
        None => lines.push("(None)".into()),
    }
    lines.push(t.status_line.clone());
    lines.push(String::new());
    lines.push("[Subgoal Verification]".into());
    match &t.last_subgoal {
        Some(last) => {
            lines.push(format!("- Description: {}", last.description));
            lines.push(format!("- Outcome: {}", last.outcome));
            lines.push(format!("- Justification: {}", t.justification));
        }
        None => lines.push("(None)".into()),
    }
    lines.push(String::new());
    lines.push("[Learned Facts]".into());
    let skip = match facts_window {
        Some(w) => t.learned_facts.len().saturating_sub(w),
        None => 0,
    };
    if t.learned_facts.len() == skip {
        lines.push("(None)".into());
    }
    for f in &t.learned_facts[skip..] {
        lines.push(format!("- {}", f.text));
    }
    lines.join("\n")
}

/// A planner-issued execution command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subgoal {
    pub description: String,
    pub search_locations: Option<Vec<String>>,
    pub issued_at_k: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub subgoals: Vec<String>,
    pub created_at_k: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubEpisodeStatus {
    Completed,
    ReplanRequested { reason: String },
    Timeout,
}

impl SubEpisodeStatus {
    pub fn label(&self) -> String {
        match self {
            SubEpisodeStatus::Completed => "Completed".into(),
            SubEpisodeStatus::ReplanRequested { reason } => format!("Replan requested: {reason}"),
            SubEpisodeStatus::Timeout => "Timeout (step limit reached)".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorStep {
    pub action: String,
    pub observation: String,
    /// False when the turn produced no environment command.
    pub sent: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubEpisode {
    pub subgoal: Subgoal,
    pub steps: Vec<ActorStep>,
    pub status: SubEpisodeStatus,
    pub env_steps_consumed: u32,
}

impl SubEpisode {
    /// Raw action/observation trace, one pair per line group.
    pub fn trace(&self) -> String {
        if self.steps.is_empty() {
            return "(no actions taken)".into();
        }
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&format!("> {}\n{}\n", s.action, s.observation.trim_end()));
        }
        out.truncate(out.trim_end().len());
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationEntry {
    pub question: String,
    pub answer: String,
    pub justification: String,
    /// False when neither the answer nor the justification label was found.
    pub parsed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct VerificationReport {
    pub entries: Vec<VerificationEntry>,
}

impl VerificationReport {
    pub fn parse_errors(&self) -> usize {
        self.entries.iter().filter(|e| !e.parsed).count()
    }

    /// Q&A block bound into the synthesis prompt.
    pub fn summary(&self) -> String {
        let mut parts = Vec::new();
        for (i, e) in self.entries.iter().enumerate() {
            parts.push(format!(
                "Q{}: {}\nA{}: {}\nJustification: {}",
                i + 1,
                e.question,
                i + 1,
                e.answer,
                e.justification
            ));
        }
        parts.join("\n\n")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentTag {
    Planner,
    Actor,
    Verification,
    Synthesis,
}

impl ComponentTag {
    pub const ALL: [ComponentTag; 4] = [
        ComponentTag::Planner,
        ComponentTag::Actor,
        ComponentTag::Verification,
        ComponentTag::Synthesis,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ComponentTag::Planner => "planner",
            ComponentTag::Actor => "actor",
            ComponentTag::Verification => "verification",
            ComponentTag::Synthesis => "synthesis",
        }
    }
}

impl fmt::Display for ComponentTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct TokenCount {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl TokenCount {
    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

/// Per-component token usage for one episode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct TokenLedger {
    pub planner: TokenCount,
    pub actor: TokenCount,
    pub verification: TokenCount,
    pub synthesis: TokenCount,
}

impl TokenLedger {
    pub fn get(&self, tag: ComponentTag) -> TokenCount {
        match tag {
            ComponentTag::Planner => self.planner,
            ComponentTag::Actor => self.actor,
            ComponentTag::Verification => self.verification,
            ComponentTag::Synthesis => self.synthesis,
        }
    }

    fn slot(&mut self, tag: ComponentTag) -> &mut TokenCount {
        match tag {
            ComponentTag::Planner => &mut self.planner,
            ComponentTag::Actor => &mut self.actor,
            ComponentTag::Verification => &mut self.verification,
            ComponentTag::Synthesis => &mut self.synthesis,
        }
    }

    pub fn record(&mut self, tag: ComponentTag, prompt_tokens: u64, completion_tokens: u64) {
        let slot = self.slot(tag);
        slot.prompt_tokens += prompt_tokens;
        slot.completion_tokens += completion_tokens;
    }

    pub fn total(&self) -> u64 {
        ComponentTag::ALL.iter().map(|t| self.get(*t).total()).sum()
    }
}
