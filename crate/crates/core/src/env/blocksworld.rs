//! Single-arm BlocksWorld. Blocks are named `b1..bN`; index `i` is block `b{i+1}`.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    bfs, normalize_action, render_valid_actions, split_call, CheckpointTracker, Domain, Environment,
    GroundState, CHECK_VALID_ACTIONS, INVALID_ACTION_MESSAGE,
};
use crate::domain::{canonical_predicate, Predicate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Support {
    Table,
    On(usize),
    Held,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlocksState {
    pub support: Vec<Support>,
}

pub fn block_name(i: usize) -> String {
    format!("b{}", i + 1)
}

fn block_index(name: &str, n: usize) -> Option<usize> {
    let k: usize = name.trim().strip_prefix('b')?.parse().ok()?;
    (k >= 1 && k <= n).then(|| k - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BlocksAction {
    Pickup(usize),
    Putdown(usize),
    Stack(usize, usize),
    Unstack(usize, usize),
}

impl fmt::Display for BlocksAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            BlocksAction::Pickup(a) => write!(f, "pickup({})", block_name(a)),
            BlocksAction::Putdown(a) => write!(f, "putdown({})", block_name(a)),
            BlocksAction::Stack(a, b) => write!(f, "stack({},{})", block_name(a), block_name(b)),
            BlocksAction::Unstack(a, b) => {
                write!(f, "unstack({},{})", block_name(a), block_name(b))
            }
        }
    }
}

impl BlocksAction {
    /// Accepts `pickup(b1)`, `pick up b1`, `stack b1 on b2`, `unstack b1 from b2`, ...
    pub fn parse(raw: &str, n: usize) -> Option<Self> {
        let s = normalize_action(raw);
        let (verb, args) = match split_call(&s) {
            Some((name, args)) => (name.replace(['-', '_'], ""), args),
            None => {
                let words: Vec<&str> = s
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|w| !w.is_empty())
                    .filter(|w| !matches!(*w, "on" | "onto" | "from" | "top" | "of" | "the" | "block" | "to" | "table"))
                    .collect();
                let mut i = 0;
                let mut verb = String::new();
                while i < words.len() && block_index(words[i], usize::MAX).is_none() {
                    verb.push_str(words[i]);
                    i += 1;
                }
                (verb.replace(['-', '_'], ""), words[i..].iter().map(|w| w.to_string()).collect())
            }
        };
        let idx: Option<Vec<usize>> = args.iter().map(|a| block_index(a, n)).collect();
        let idx = idx?;
        match (verb.as_str(), idx.as_slice()) {
            ("pickup" | "pick", [a]) => Some(BlocksAction::Pickup(*a)),
            ("putdown" | "put", [a]) => Some(BlocksAction::Putdown(*a)),
            ("stack" | "puton", [a, b]) => Some(BlocksAction::Stack(*a, *b)),
            ("unstack", [a, b]) => Some(BlocksAction::Unstack(*a, *b)),
            _ => None,
        }
    }
}

/// A goal or checkpoint fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GoalFact {
    On(usize, usize),
    OnTable(usize),
}

impl GoalFact {
    pub fn holds(&self, s: &BlocksState) -> bool {
        match *self {
            GoalFact::On(a, b) => s.support.get(a) == Some(&Support::On(b)),
            GoalFact::OnTable(a) => s.support.get(a) == Some(&Support::Table),
        }
    }

    pub fn parse(text: &str, n: usize) -> Option<Self> {
        let p = canonical_predicate(text).ok()?;
        let idx: Option<Vec<usize>> = p.args().iter().map(|a| block_index(a, n)).collect();
        match (p.name(), idx?.as_slice()) {
            ("on", [a, b]) if a != b => Some(GoalFact::On(*a, *b)),
            ("on_table" | "ontable", [a]) => Some(GoalFact::OnTable(*a)),
            _ => None,
        }
    }
}

impl fmt::Display for GoalFact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GoalFact::On(a, b) => write!(f, "{} is on {}", block_name(a), block_name(b)),
            GoalFact::OnTable(a) => write!(f, "{} is on the table", block_name(a)),
        }
    }
}

impl BlocksState {
    pub fn all_on_table(n: usize) -> Self {
        Self { support: alloc::vec![Support::Table; n] }
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn held(&self) -> Option<usize> {
        self.support.iter().position(|s| *s == Support::Held)
    }

    pub fn is_clear(&self, i: usize) -> bool {
        self.support[i] != Support::Held && !self.support.contains(&Support::On(i))
    }

    /// At most one held block, no two blocks on the same block, no cycles.
    pub fn is_well_formed(&self) -> bool {
        let n = self.len();
        if self.support.iter().filter(|s| **s == Support::Held).count() > 1 {
            return false;
        }
        let mut under = BTreeSet::new();
        for (i, s) in self.support.iter().enumerate() {
            if let Support::On(j) = *s {
                if j >= n || j == i || !under.insert(j) || self.support[j] == Support::Held {
                    return false;
                }
            }
        }
        (0..n).all(|start| {
            let mut cur = start;
            for _ in 0..=n {
                match self.support[cur] {
                    Support::On(j) => cur = j,
                    _ => return true,
                }
            }
            false
        })
    }

    pub fn apply(&self, action: BlocksAction) -> Option<Self> {
        let n = self.len();
        let arm_empty = self.held().is_none();
        let mut next = self.clone();
        match action {
            BlocksAction::Pickup(a) if a < n => {
                if !(arm_empty && self.support[a] == Support::Table && self.is_clear(a)) {
                    return None;
                }
                next.support[a] = Support::Held;
            }
            BlocksAction::Putdown(a) if a < n => {
                if self.support[a] != Support::Held {
                    return None;
                }
                next.support[a] = Support::Table;
            }
            BlocksAction::Stack(a, b) if a < n && b < n && a != b => {
                if self.support[a] != Support::Held || !self.is_clear(b) {
                    return None;
                }
                next.support[a] = Support::On(b);
            }
            BlocksAction::Unstack(a, b) if a < n && b < n && a != b => {
                if !(arm_empty && self.support[a] == Support::On(b) && self.is_clear(a)) {
                    return None;
                }
                next.support[a] = Support::Held;
            }
            _ => return None,
        }
        Some(next)
    }

    /// Applicable operators in a fixed order: pickup, unstack, putdown, stack.
    pub fn applicable(&self) -> Vec<BlocksAction> {
        let n = self.len();
        let mut out = Vec::new();
        match self.held() {
            None => {
                for a in 0..n {
                    if !self.is_clear(a) {
                        continue;
                    }
                    match self.support[a] {
                        Support::Table => out.push(BlocksAction::Pickup(a)),
                        Support::On(b) => out.push(BlocksAction::Unstack(a, b)),
                        Support::Held => {}
                    }
                }
            }
            Some(h) => {
                out.push(BlocksAction::Putdown(h));
                for b in 0..n {
                    if b != h && self.is_clear(b) {
                        out.push(BlocksAction::Stack(h, b));
                    }
                }
            }
        }
        out
    }

    /// Ground-truth predicates in the symbolic-memory vocabulary.
    pub fn predicates(&self) -> BTreeSet<Predicate> {
        let mut out = BTreeSet::new();
        for (i, s) in self.support.iter().enumerate() {
            let b = block_name(i);
            match *s {
                Support::Held => {
                    out.insert(ground("clear", &[&b]));
                    continue;
                }
                Support::Table => {
                    out.insert(ground("on_table", &[&b]));
                }
                Support::On(j) => {
                    out.insert(ground("on", &[&b, &block_name(j)]));
                }
            }
            let name = if self.is_clear(i) { "clear" } else { "not_clear" };
            out.insert(ground(name, &[&b]));
        }
        out.insert(Predicate::atom(if self.held().is_some() {
            "arm_not_empty"
        } else {
            "arm_empty"
        }));
        out
    }

    /// Full state rendering: arm status, then position and clearness of each
    /// block that is not held, in block order.
    pub fn render(&self) -> String {
        let mut parts: Vec<String> = Vec::new();
        match self.held() {
            Some(h) => parts.push(format!("You are holding {}.", block_name(h))),
            None => parts.push("Robot arm is empty.".into()),
        }
        for (i, s) in self.support.iter().enumerate() {
            let b = block_name(i);
            match *s {
                Support::Held => continue,
                Support::Table => parts.push(format!("{b} is on the table.")),
                Support::On(j) => parts.push(format!("{b} is on {}.", block_name(j))),
            }
            if self.is_clear(i) {
                parts.push(format!("{b} is clear."));
            } else {
                parts.push(format!("{b} is not clear."));
            }
        }
        parts.join(" ")
    }

    /// Uniformly picks a tower arrangement shape by sequential insertion.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut support = alloc::vec![Support::Table; n];
        let mut tops: Vec<usize> = Vec::new();
        for b in order {
            let choice = rng.gen_range(0..=tops.len());
            if choice == tops.len() {
                tops.push(b);
            } else {
                support[b] = Support::On(tops[choice]);
                tops[choice] = b;
            }
        }
        Self { support }
    }

    /// Position facts that pin down this arrangement (held blocks omitted).
    pub fn position_facts(&self) -> Vec<GoalFact> {
        self.support
            .iter()
            .enumerate()
            .filter_map(|(i, s)| match *s {
                Support::Table => Some(GoalFact::OnTable(i)),
                Support::On(j) => Some(GoalFact::On(i, j)),
                Support::Held => None,
            })
            .collect()
    }
}

fn ground(name: &str, args: &[&str]) -> Predicate {
    Predicate::new(name, args).expect("block names are valid tokens")
}

/// Shortest action sequence reaching `goal`, giving up after `max_states`.
pub fn shortest_plan(
    start: &BlocksState,
    goal: impl Fn(&BlocksState) -> bool,
    max_states: usize,
) -> Option<Vec<BlocksAction>> {
    bfs(
        start,
        |s| s.applicable().into_iter().filter_map(|a| Some((a, s.apply(a)?))).collect(),
        goal,
        max_states,
    )
}

/// Serialized task definition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlocksTaskFile {
    pub format_version: u32,
    pub id: String,
    pub blocks: usize,
    pub initial: Vec<String>,
    pub goal: Vec<String>,
    #[serde(default)]
    pub goal_text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlocksTask {
    pub id: String,
    pub initial: BlocksState,
    pub goal: Vec<GoalFact>,
    pub goal_text: String,
}

impl BlocksTask {
    pub fn from_file(file: &BlocksTaskFile) -> Result<Self, String> {
        let n = file.blocks;
        if n == 0 {
            return Err("task has no blocks".into());
        }
        let mut support: Vec<Option<Support>> = alloc::vec![None; n];
        for text in &file.initial {
            let fact = GoalFact::parse(text, n).ok_or_else(|| format!("bad initial fact `{text}`"))?;
            let (b, s) = match fact {
                GoalFact::On(a, b) => (a, Support::On(b)),
                GoalFact::OnTable(a) => (a, Support::Table),
            };
            if support[b].replace(s).is_some() {
                return Err(format!("{} placed twice", block_name(b)));
            }
        }
        let support: Option<Vec<Support>> = support.into_iter().collect();
        let initial = BlocksState {
            support: support.ok_or("every block needs an initial position")?,
        };
        if !initial.is_well_formed() {
            return Err("initial arrangement is not a set of towers".into());
        }
        let goal = file
            .goal
            .iter()
            .map(|t| GoalFact::parse(t, n).ok_or_else(|| format!("bad goal fact `{t}`")))
            .collect::<Result<Vec<_>, _>>()?;
        if goal.is_empty() {
            return Err("empty goal".into());
        }
        let goal_text = file.goal_text.clone().unwrap_or_else(|| goal_sentence(&goal));
        Ok(Self { id: file.id.clone(), initial, goal, goal_text })
    }

    /// Random initial arrangement and a different random goal arrangement.
    pub fn random<R: Rng + ?Sized>(id: &str, n: usize, rng: &mut R) -> Self {
        let initial = BlocksState::random(n, rng);
        let mut target = BlocksState::random(n, rng);
        while target == initial {
            target = BlocksState::random(n, rng);
        }
        let goal = target.position_facts();
        let goal_text = goal_sentence(&goal);
        Self { id: id.into(), initial, goal, goal_text }
    }
}

fn goal_sentence(goal: &[GoalFact]) -> String {
    let facts: Vec<String> = goal.iter().map(|g| g.to_string()).collect();
    format!("Your goal is to arrange the blocks so that {}.", join_and(&facts))
}

pub(crate) fn join_and(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{}, and {last}", init.join(", ")),
    }
}

pub struct BlocksWorldEnv {
    task: BlocksTask,
    state: BlocksState,
    checkpoints: CheckpointTracker,
}

impl BlocksWorldEnv {
    pub fn new(task: BlocksTask) -> Self {
        let labels = task.goal.iter().map(|g| g.to_string()).collect();
        let mut env = Self {
            state: task.initial.clone(),
            task,
            checkpoints: CheckpointTracker::new(labels),
        };
        env.observe();
        env
    }

    pub fn state(&self) -> &BlocksState {
        &self.state
    }

    pub fn task(&self) -> &BlocksTask {
        &self.task
    }

    fn observe(&mut self) {
        let state = &self.state;
        let goal = &self.task.goal;
        self.checkpoints.observe(|i| goal[i].holds(state));
    }
}

impl Environment for BlocksWorldEnv {
    fn domain(&self) -> Domain {
        Domain::Blocksworld
    }

    fn task_id(&self) -> &str {
        &self.task.id
    }

    fn goal_text(&self) -> &str {
        &self.task.goal_text
    }

    fn initial_observation(&self) -> String {
        self.task.initial.render()
    }

    fn step(&mut self, action: &str) -> String {
        let norm = normalize_action(action);
        if norm == "look" {
            return self.state.render();
        }
        if norm == CHECK_VALID_ACTIONS {
            return render_valid_actions(&self.valid_actions());
        }
        let parsed = BlocksAction::parse(&norm, self.state.len());
        match parsed.and_then(|a| self.state.apply(a)) {
            Some(next) => {
                self.state = next;
                self.observe();
                self.state.render()
            }
            None => INVALID_ACTION_MESSAGE.into(),
        }
    }

    fn is_success(&self) -> bool {
        self.task.goal.iter().all(|g| g.holds(&self.state))
    }

    fn checkpoints(&self) -> &CheckpointTracker {
        &self.checkpoints
    }

    fn valid_actions(&self) -> Vec<String> {
        self.state.applicable().iter().map(|a| a.to_string()).collect()
    }

    fn reset(&mut self) {
        self.state = self.task.initial.clone();
        self.checkpoints.clear();
        self.observe();
    }

    fn ground_state(&self) -> GroundState {
        GroundState::Blocksworld { state: self.state.clone(), goal: self.task.goal.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn three_on_table() -> BlocksWorldEnv {
        BlocksWorldEnv::new(BlocksTask {
            id: "t".into(),
            initial: BlocksState::all_on_table(3),
            goal: vec![GoalFact::On(0, 1), GoalFact::On(1, 2), GoalFact::OnTable(2)],
            goal_text: "g".into(),
        })
    }

    #[test]
    fn render_matches_hand_trace() {
        let s = BlocksState { support: vec![Support::On(1), Support::Table, Support::Held] };
        assert_eq!(
            s.render(),
            "You are holding b3. b1 is on b2. b1 is clear. b2 is on the table. b2 is not clear."
        );
        assert_eq!(
            BlocksState::all_on_table(1).render(),
            "Robot arm is empty. b1 is on the table. b1 is clear."
        );
    }

    #[test]
    fn pickup_then_observation_reports_holding() {
        let mut env = three_on_table();
        let obs = env.step("pickup(b1)");
        assert!(obs.contains("You are holding b1"), "{obs}");
        assert!(env.valid_actions().contains(&"putdown(b1)".into()));
    }

    #[test]
    fn stacking_onto_held_block_is_invalid() {
        let mut env = three_on_table();
        env.step("pickup(b1)");
        let before = env.state().clone();
        assert_eq!(env.step("stack(b2,b1)"), INVALID_ACTION_MESSAGE);
        assert_eq!(env.state(), &before);
    }

    #[test]
    fn word_forms_parse() {
        assert_eq!(BlocksAction::parse("pick up b1", 3), Some(BlocksAction::Pickup(0)));
        assert_eq!(BlocksAction::parse("Put down b2.", 3), Some(BlocksAction::Putdown(1)));
        assert_eq!(BlocksAction::parse("stack b1 on top of b2", 3), Some(BlocksAction::Stack(0, 1)));
        assert_eq!(BlocksAction::parse("unstack b3 from b1", 3), Some(BlocksAction::Unstack(2, 0)));
        assert_eq!(BlocksAction::parse("pickup(b9)", 3), None);
        assert_eq!(BlocksAction::parse("dance", 3), None);
    }

    #[test]
    fn three_block_tower_plan() {
        let mut env = three_on_table();
        let goal = env.task().goal.clone();
        let plan = shortest_plan(env.state(), |s| goal.iter().all(|g| g.holds(s)), 10_000).unwrap();
        let text: Vec<String> = plan.iter().map(|a| a.to_string()).collect();
        assert_eq!(text, ["pickup(b2)", "stack(b2,b3)", "pickup(b1)", "stack(b1,b2)"]);
        for a in &text {
            assert_ne!(env.step(a), INVALID_ACTION_MESSAGE);
        }
        assert!(env.is_success());
        assert_eq!(env.progress_rate(), 1.0);
    }

    #[test]
    fn checkpoints_are_sticky() {
        let mut env = three_on_table();
        // on_table(b3) already holds at start.
        assert!((env.progress_rate() - 1.0 / 3.0).abs() < 1e-12);
        env.step("pickup(b2)");
        env.step("stack(b2,b3)");
        assert!((env.progress_rate() - 2.0 / 3.0).abs() < 1e-12);
        env.step("unstack(b2,b3)");
        env.step("putdown(b2)");
        assert!((env.progress_rate() - 2.0 / 3.0).abs() < 1e-12);
        env.reset();
        assert!((env.progress_rate() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn predicates_of_tower() {
        let s = BlocksState { support: vec![Support::On(1), Support::Table] };
        let p: Vec<String> = s.predicates().iter().map(|p| p.to_string()).collect();
        assert_eq!(p, ["arm_empty", "clear(b1)", "not_clear(b2)", "on(b1,b2)", "on_table(b2)"]);
    }

    #[test]
    fn random_states_are_well_formed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..8 {
            for _ in 0..50 {
                assert!(BlocksState::random(n, &mut rng).is_well_formed());
            }
        }
    }

    #[test]
    fn task_file_roundtrip() {
        let file = BlocksTaskFile {
            format_version: 1,
            id: "x".into(),
            blocks: 2,
            initial: vec!["on(b1,b2)".into(), "on_table(b2)".into()],
            goal: vec!["on(b2,b1)".into()],
            goal_text: None,
        };
        let t = BlocksTask::from_file(&file).unwrap();
        assert_eq!(t.goal_text, "Your goal is to arrange the blocks so that b2 is on b1.");
        let mut bad = file.clone();
        bad.initial.pop();
        assert!(BlocksTask::from_file(&bad).is_err());
    }
}
