//! Household world in the style of ALFWorld: receptacles, objects, a single
//! hand. Loaded from JSON.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::blocksworld::join_and;
use super::{
    article, normalize_action, render_valid_actions, CheckpointTracker, Domain, Environment,
    CHECK_VALID_ACTIONS, INVALID_ACTION_MESSAGE,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HouseholdWorld {
    pub format_version: u32,
    pub id: String,
    pub goal: String,
    pub receptacles: Vec<ReceptacleDef>,
    pub success: HouseCondition,
    pub checkpoints: Vec<HouseCheckpoint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceptacleDef {
    pub name: String,
    #[serde(default)]
    pub openable: bool,
    #[serde(default)]
    pub contents: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HouseCondition {
    /// At least `count` objects of `object_type` inside `receptacle`.
    CountIn { object_type: String, receptacle: String, count: usize },
    Holding { object_type: String },
    Seen { object_type: String },
    Visited { receptacle: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HouseCheckpoint {
    pub label: String,
    pub condition: HouseCondition,
}

/// `soapbar 2` -> `soapbar`.
pub fn object_type(name: &str) -> &str {
    match name.rsplit_once(' ') {
        Some((head, tail)) if tail.chars().all(|c| c.is_ascii_digit()) => head,
        _ => name,
    }
}

fn is_entity_name(name: &str) -> bool {
    let Some((head, tail)) = name.rsplit_once(' ') else { return false };
    !head.is_empty()
        && head.chars().all(|c| c.is_ascii_lowercase())
        && !tail.is_empty()
        && tail.chars().all(|c| c.is_ascii_digit())
}

impl HouseholdWorld {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let w: Self = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if w.format_version != 1 {
            return Err(format!("unsupported world format {}", w.format_version));
        }
        let mut names = BTreeSet::new();
        for r in &w.receptacles {
            for n in core::iter::once(&r.name).chain(r.contents.iter()) {
                if !is_entity_name(n) {
                    return Err(format!("`{n}` is not of the form `<type> <number>`"));
                }
                if !names.insert(n.clone()) {
                    return Err(format!("duplicate name `{n}`"));
                }
            }
        }
        Ok(w)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct HouseState {
    at: Option<usize>,
    contents: Vec<Vec<String>>,
    open: Vec<bool>,
    hand: Option<String>,
    seen: BTreeSet<String>,
    visited: BTreeSet<usize>,
}

pub struct HouseholdEnv {
    world: HouseholdWorld,
    initial: HouseState,
    state: HouseState,
    checkpoints: CheckpointTracker,
}

enum Cmd {
    GoTo(usize),
    Take(String, usize),
    Put(String, usize),
    Open(usize),
    Close(usize),
    Examine(String),
    Look,
    Inventory,
    Valid,
}

impl HouseholdEnv {
    pub fn new(world: HouseholdWorld) -> Self {
        let initial = HouseState {
            at: None,
            contents: world.receptacles.iter().map(|r| r.contents.clone()).collect(),
            open: alloc::vec![false; world.receptacles.len()],
            hand: None,
            seen: BTreeSet::new(),
            visited: BTreeSet::new(),
        };
        let labels = world.checkpoints.iter().map(|c| c.label.clone()).collect();
        let mut env = Self {
            state: initial.clone(),
            initial,
            world,
            checkpoints: CheckpointTracker::new(labels),
        };
        env.observe();
        env
    }

    fn observe(&mut self) {
        let conds: Vec<HouseCondition> = self.world.checkpoints.iter().map(|c| c.condition.clone()).collect();
        let (world, state) = (&self.world, &self.state);
        self.checkpoints.observe(|i| holds(world, state, &conds[i]));
    }

    fn receptacle(&self, name: &str) -> Option<usize> {
        self.world.receptacles.iter().position(|r| r.name == name.trim())
    }

    fn accessible(&self, r: usize) -> bool {
        !self.world.receptacles[r].openable || self.state.open[r]
    }

    fn listing(items: &[String]) -> String {
        if items.is_empty() {
            return "nothing".into();
        }
        let parts: Vec<String> = items.iter().map(|o| format!("{} {o}", article(o))).collect();
        join_and(&parts)
    }

    /// What the agent sees at receptacle `r`; marks its contents as seen.
    fn view(&mut self, r: usize) -> String {
        let name = self.world.receptacles[r].name.clone();
        if self.world.receptacles[r].openable {
            if !self.state.open[r] {
                return format!("The {name} is closed.");
            }
            self.state.seen.extend(self.state.contents[r].iter().cloned());
            return format!("The {name} is open. In it, you see {}.", Self::listing(&self.state.contents[r]));
        }
        self.state.seen.extend(self.state.contents[r].iter().cloned());
        format!("On the {name}, you see {}.", Self::listing(&self.state.contents[r]))
    }

    fn room_overview(&self) -> String {
        let names: Vec<String> = self.world.receptacles.iter().map(|r| r.name.clone()).collect();
        format!(
            "You are in the middle of a room. Looking quickly around you, you see {}.",
            Self::listing(&names)
        )
    }

    fn parse(&self, norm: &str) -> Option<Cmd> {
        match norm {
            "look" => return Some(Cmd::Look),
            "inventory" | "i" => return Some(Cmd::Inventory),
            CHECK_VALID_ACTIONS => return Some(Cmd::Valid),
            _ => {}
        }
        if let Some(r) = norm.strip_prefix("go to ") {
            return self.receptacle(r).map(Cmd::GoTo);
        }
        if let Some(rest) = norm.strip_prefix("take ") {
            let (o, r) = rest.split_once(" from ")?;
            return Some(Cmd::Take(o.trim().into(), self.receptacle(r)?));
        }
        if let Some(rest) = norm.strip_prefix("put ").or_else(|| norm.strip_prefix("move ")) {
            for sep in [" in/on ", " into ", " in ", " on ", " to "] {
                if let Some((o, r)) = rest.split_once(sep) {
                    return Some(Cmd::Put(o.trim().into(), self.receptacle(r)?));
                }
            }
            return None;
        }
        if let Some(r) = norm.strip_prefix("open ") {
            return self.receptacle(r).map(Cmd::Open);
        }
        if let Some(r) = norm.strip_prefix("close ") {
            return self.receptacle(r).map(Cmd::Close);
        }
        if let Some(x) = norm.strip_prefix("examine ") {
            return Some(Cmd::Examine(x.trim().into()));
        }
        None
    }

    fn run(&mut self, cmd: Cmd) -> Option<String> {
        let here = self.state.at;
        match cmd {
            Cmd::Look => Some(match here {
                Some(r) => format!(
                    "You are facing the {}. Next to it, you see nothing.",
                    self.world.receptacles[r].name
                ),
                None => self.room_overview(),
            }),
            Cmd::Inventory => Some(match &self.state.hand {
                Some(o) => format!("You are carrying: {} {o}.", article(o)),
                None => "You are not carrying anything.".into(),
            }),
            Cmd::Valid => Some(render_valid_actions(&self.valid_actions())),
            Cmd::GoTo(r) => {
                self.state.at = Some(r);
                self.state.visited.insert(r);
                let view = self.view(r);
                Some(format!("You arrive at {}. {view}", self.world.receptacles[r].name))
            }
            Cmd::Take(o, r) => {
                if here != Some(r)
                    || self.state.hand.is_some()
                    || !self.accessible(r)
                    || !self.state.contents[r].contains(&o)
                {
                    return None;
                }
                self.state.contents[r].retain(|x| *x != o);
                let msg = format!("You pick up the {o} from the {}.", self.world.receptacles[r].name);
                self.state.hand = Some(o);
                Some(msg)
            }
            Cmd::Put(o, r) => {
                if here != Some(r) || self.state.hand.as_deref() != Some(o.as_str()) || !self.accessible(r) {
                    return None;
                }
                self.state.hand = None;
                self.state.contents[r].push(o.clone());
                Some(format!("You put the {o} in/on the {}.", self.world.receptacles[r].name))
            }
            Cmd::Open(r) => {
                if here != Some(r) || !self.world.receptacles[r].openable || self.state.open[r] {
                    return None;
                }
                self.state.open[r] = true;
                let view = self.view(r);
                Some(format!("You open the {}. {view}", self.world.receptacles[r].name))
            }
            Cmd::Close(r) => {
                if here != Some(r) || !self.world.receptacles[r].openable || !self.state.open[r] {
                    return None;
                }
                self.state.open[r] = false;
                Some(format!("You close the {}.", self.world.receptacles[r].name))
            }
            Cmd::Examine(x) => {
                if let Some(r) = self.receptacle(&x) {
                    return (here == Some(r)).then(|| self.view(r));
                }
                (self.state.hand.as_deref() == Some(x.as_str()))
                    .then(|| format!("This is a normal {x}."))
            }
        }
    }
}

fn holds(world: &HouseholdWorld, s: &HouseState, c: &HouseCondition) -> bool {
    match c {
        HouseCondition::CountIn { object_type: t, receptacle, count } => {
            match world.receptacles.iter().position(|r| r.name == *receptacle) {
                Some(r) => s.contents[r].iter().filter(|o| object_type(o) == t).count() >= *count,
                None => false,
            }
        }
        HouseCondition::Holding { object_type: t } => {
            s.hand.as_deref().map(object_type) == Some(t.as_str())
        }
        HouseCondition::Seen { object_type: t } => s.seen.iter().any(|o| object_type(o) == t),
        HouseCondition::Visited { receptacle } => {
            s.visited.iter().any(|r| world.receptacles[*r].name == *receptacle)
        }
    }
}

impl Environment for HouseholdEnv {
    fn domain(&self) -> Domain {
        Domain::Household
    }

    fn task_id(&self) -> &str {
        &self.world.id
    }

    fn goal_text(&self) -> &str {
        &self.world.goal
    }

    fn initial_observation(&self) -> String {
        self.room_overview()
    }

    fn step(&mut self, action: &str) -> String {
        let norm = normalize_action(action);
        let out = match self.parse(&norm) {
            Some(cmd) => self.run(cmd),
            None => None,
        };
        self.observe();
        out.unwrap_or_else(|| INVALID_ACTION_MESSAGE.to_string())
    }

    fn is_success(&self) -> bool {
        holds(&self.world, &self.state, &self.world.success)
    }

    fn checkpoints(&self) -> &CheckpointTracker {
        &self.checkpoints
    }

    fn valid_actions(&self) -> Vec<String> {
        let mut out: Vec<String> = alloc::vec!["look".into(), "inventory".into()];
        for (i, r) in self.world.receptacles.iter().enumerate() {
            if self.state.at != Some(i) {
                out.push(format!("go to {}", r.name));
            }
        }
        if let Some(r) = self.state.at {
            let name = &self.world.receptacles[r].name;
            out.push(format!("examine {name}"));
            if self.world.receptacles[r].openable {
                if self.state.open[r] {
                    out.push(format!("close {name}"));
                } else {
                    out.push(format!("open {name}"));
                }
            }
            if self.accessible(r) {
                match &self.state.hand {
                    Some(o) => out.push(format!("put {o} in/on {name}")),
                    None => {
                        for o in &self.state.contents[r] {
                            out.push(format!("take {o} from {name}"));
                        }
                    }
                }
            }
        }
        if let Some(o) = &self.state.hand {
            out.push(format!("examine {o}"));
        }
        out
    }

    fn reset(&mut self) {
        self.state = self.initial.clone();
        self.checkpoints.clear();
        self.observe();
    }
}
