//! Simulated text environments.
//!
//! Every environment is deterministic: all randomness is consumed when a
//! task is generated, so replaying the same actions replays the same
//! observations.

pub mod adventure;
pub mod blocksworld;
pub mod gripper;
pub mod household;
pub mod task;

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

pub use task::{bundled_fixture, bundled_manifest, build_environment, TaskManifest, TaskSpec};

/// Returned verbatim for any action that cannot be applied.
pub const INVALID_ACTION_MESSAGE: &str =
    "The action is not valid and therefore takes no effect. Please check valid actions.";

pub const CHECK_VALID_ACTIONS: &str = "check valid actions";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Blocksworld,
    Gripper,
    Household,
    Adventure,
}

impl Domain {
    pub const ALL: [Domain; 4] = [
        Domain::Blocksworld,
        Domain::Gripper,
        Domain::Household,
        Domain::Adventure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Blocksworld => "blocksworld",
            Domain::Gripper => "gripper",
            Domain::Household => "household",
            Domain::Adventure => "adventure",
        }
    }

    /// Default cap on cumulative environment steps per episode.
    pub fn default_max_total_steps(self) -> u32 {
        match self {
            Domain::Adventure => 150,
            _ => 100,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "blocksworld" | "blocks" => Ok(Domain::Blocksworld),
            "gripper" => Ok(Domain::Gripper),
            "household" | "alfworld" => Ok(Domain::Household),
            "adventure" | "jericho" => Ok(Domain::Adventure),
            other => Err(format!("unknown domain `{other}`")),
        }
    }
}

/// Read-only snapshot of the simulator state, consumed by the oracle backend.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroundState {
    Blocksworld {
        state: blocksworld::BlocksState,
        goal: Vec<blocksworld::GoalFact>,
    },
    Gripper {
        state: gripper::GripperState,
        goal: Vec<(usize, usize)>,
    },
    Opaque,
}

/// A text environment with a goal and progress checkpoints.
pub trait Environment: Send {
    fn domain(&self) -> Domain;
    fn task_id(&self) -> &str;
    fn goal_text(&self) -> &str;
    fn initial_observation(&self) -> String;
    /// Applies an action and returns the observation. Never panics; invalid
    /// input yields [`INVALID_ACTION_MESSAGE`] and leaves the state unchanged.
    fn step(&mut self, action: &str) -> String;
    fn is_success(&self) -> bool;
    fn checkpoints(&self) -> &CheckpointTracker;
    fn valid_actions(&self) -> Vec<String>;
    /// Back to the initial state; checkpoint history is cleared.
    fn reset(&mut self);

    fn ground_state(&self) -> GroundState {
        GroundState::Opaque
    }

    /// Fraction of checkpoints that have held at some point this episode.
    fn progress_rate(&self) -> f64 {
        self.checkpoints().progress_rate()
    }
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn domain(&self) -> Domain {
        (**self).domain()
    }
    fn task_id(&self) -> &str {
        (**self).task_id()
    }
    fn goal_text(&self) -> &str {
        (**self).goal_text()
    }
    fn initial_observation(&self) -> String {
        (**self).initial_observation()
    }
    fn step(&mut self, action: &str) -> String {
        (**self).step(action)
    }
    fn is_success(&self) -> bool {
        (**self).is_success()
    }
    fn checkpoints(&self) -> &CheckpointTracker {
        (**self).checkpoints()
    }
    fn valid_actions(&self) -> Vec<String> {
        (**self).valid_actions()
    }
    fn reset(&mut self) {
        (**self).reset()
    }
    fn ground_state(&self) -> GroundState {
        (**self).ground_state()
    }
}

/// Labels plus an "ever satisfied" flag per checkpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointTracker {
    labels: Vec<String>,
    reached: Vec<bool>,
}

impl CheckpointTracker {
    pub fn new(labels: Vec<String>) -> Self {
        let reached = alloc::vec![false; labels.len()];
        Self { labels, reached }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn reached(&self) -> &[bool] {
        &self.reached
    }

    /// Marks every checkpoint whose predicate currently holds. Flags never
    /// go back to false.
    pub fn observe(&mut self, holds: impl Fn(usize) -> bool) {
        for (i, r) in self.reached.iter_mut().enumerate() {
            if !*r && holds(i) {
                *r = true;
            }
        }
    }

    pub fn clear(&mut self) {
        self.reached.iter_mut().for_each(|r| *r = false);
    }

    pub fn progress_rate(&self) -> f64 {
        if self.reached.is_empty() {
            return 0.0;
        }
        let hit = self.reached.iter().filter(|r| **r).count();
        hit as f64 / self.reached.len() as f64
    }
}

/// Lowercases, strips markdown/quote wrappers and a trailing period, and
/// collapses whitespace.
pub fn normalize_action(raw: &str) -> String {
    let mut s = raw.trim();
    loop {
        let before = s;
        s = s
            .trim_matches(|c| c == '`' || c == '"' || c == '\'' || c == '>')
            .trim();
        s = s.strip_suffix('.').unwrap_or(s).trim();
        if s == before {
            break;
        }
    }
    let lowered = s.to_lowercase();
    lowered.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Splits `name(a, b)` into ("name", ["a","b"]). Returns None for other forms.
pub(crate) fn split_call(action: &str) -> Option<(String, Vec<String>)> {
    let open = action.find('(')?;
    let inner = action[open + 1..].strip_suffix(')')?;
    let name = action[..open].trim().replace(' ', "");
    if name.is_empty() {
        return None;
    }
    let args = if inner.trim().is_empty() {
        Vec::new()
    } else {
        inner.split(',').map(|a| a.trim().to_string()).collect()
    };
    Some((name, args))
}

/// Breadth-first search over an explicit successor function. Returns the
/// shortest action sequence, or None if the goal is unreachable within
/// `max_states` discovered states.
pub fn bfs<S, A>(
    start: &S,
    successors: impl Fn(&S) -> Vec<(A, S)>,
    goal: impl Fn(&S) -> bool,
    max_states: usize,
) -> Option<Vec<A>>
where
    S: Ord + Clone,
    A: Clone,
{
    if goal(start) {
        return Some(Vec::new());
    }
    let mut parent: BTreeMap<S, (S, A)> = BTreeMap::new();
    let mut seen: BTreeSet<S> = BTreeSet::new();
    let mut queue = VecDeque::new();
    seen.insert(start.clone());
    queue.push_back(start.clone());
    while let Some(s) = queue.pop_front() {
        for (a, next) in successors(&s) {
            if !seen.insert(next.clone()) {
                continue;
            }
            if seen.len() > max_states {
                return None;
            }
            parent.insert(next.clone(), (s.clone(), a));
            if goal(&next) {
                let mut plan = Vec::new();
                let mut cur = next;
                while let Some((prev, act)) = parent.get(&cur) {
                    plan.push(act.clone());
                    cur = prev.clone();
                }
                plan.reverse();
                return Some(plan);
            }
            queue.push_back(next);
        }
    }
    None
}

/// Formats the reply to "check valid actions".
pub(crate) fn render_valid_actions(actions: &[String]) -> String {
    let mut out = String::from("Valid actions:");
    for a in actions {
        out.push_str("\n- ");
        out.push_str(a);
    }
    out
}

pub(crate) fn article(name: &str) -> &'static str {
    match name.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_surface_forms() {
        assert_eq!(normalize_action("  `Pick  Up b1`. "), "pick up b1");
        assert_eq!(normalize_action("\"look\""), "look");
        assert_eq!(normalize_action("> go north"), "go north");
    }

    #[test]
    fn splits_calls() {
        assert_eq!(
            split_call("stack(b1, b2)"),
            Some(("stack".into(), alloc::vec!["b1".into(), "b2".into()]))
        );
        assert_eq!(split_call("look"), None);
        assert_eq!(split_call("(b1)"), None);
    }

    #[test]
    fn progress_fraction() {
        let mut t = CheckpointTracker::new(alloc::vec!["a".into(), "b".into(), "c".into(), "d".into()]);
        assert_eq!(t.progress_rate(), 0.0);
        t.observe(|i| i < 3);
        assert_eq!(t.progress_rate(), 0.75);
        t.observe(|_| false);
        assert_eq!(t.progress_rate(), 0.75);
        t.observe(|_| true);
        assert_eq!(t.progress_rate(), 1.0);
    }

    #[test]
    fn domain_parse() {
        assert_eq!("ALFWorld".parse::<Domain>(), Ok(Domain::Household));
        assert!("chess".parse::<Domain>().is_err());
    }
}
