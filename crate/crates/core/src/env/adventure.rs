//! Data-driven text adventure: rooms, exits, objects, containers and
//! scripted triggers loaded from JSON.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::blocksworld::join_and;
use super::{
    article, normalize_action, render_valid_actions, CheckpointTracker, Domain, Environment,
    CHECK_VALID_ACTIONS, INVALID_ACTION_MESSAGE,
};

const INVENTORY_LOC: &str = "inventory";
const DIRECTIONS: [(&str, &str); 10] = [
    ("n", "north"),
    ("s", "south"),
    ("e", "east"),
    ("w", "west"),
    ("u", "up"),
    ("d", "down"),
    ("ne", "northeast"),
    ("nw", "northwest"),
    ("se", "southeast"),
    ("sw", "southwest"),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdventureWorld {
    pub format_version: u32,
    pub id: String,
    pub goal: String,
    pub start: String,
    pub rooms: Vec<RoomDef>,
    #[serde(default)]
    pub objects: Vec<ObjectDef>,
    #[serde(default)]
    pub triggers: Vec<TriggerDef>,
    pub success: Condition,
    pub checkpoints: Vec<CheckpointDef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoomDef {
    pub id: String,
    pub name: String,
    pub description: String,
    #[serde(default)]
    pub exits: Vec<ExitDef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExitDef {
    pub direction: String,
    #[serde(default)]
    pub to: Option<String>,
    /// Message shown instead of moving.
    #[serde(default)]
    pub blocked: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectDef {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    /// Room id, container object id, or "inventory".
    pub location: String,
    #[serde(default)]
    pub portable: bool,
    #[serde(default)]
    pub hidden: bool,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub container: bool,
    #[serde(default)]
    pub open: bool,
    #[serde(default)]
    pub opens_on_examine: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerDef {
    pub id: String,
    /// Accepted phrasings; the first is listed in valid actions.
    pub commands: Vec<String>,
    pub room: String,
    #[serde(default)]
    pub requires: Vec<String>,
    pub message: String,
    #[serde(default)]
    pub repeat_message: Option<String>,
    #[serde(default)]
    pub reveal_objects: Vec<String>,
    #[serde(default)]
    pub reveal_exits: Vec<RevealedExit>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevealedExit {
    pub room: String,
    pub direction: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Condition {
    InRoom { room: String },
    Visited { room: String },
    Carrying { object: String },
    Triggered { trigger: String },
    All { of: Vec<Condition> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointDef {
    pub label: String,
    pub condition: Condition,
}

impl AdventureWorld {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let w: Self = serde_json::from_str(text).map_err(|e| e.to_string())?;
        w.validate()?;
        Ok(w)
    }

    fn validate(&self) -> Result<(), String> {
        if self.format_version != 1 {
            return Err(format!("unsupported world format {}", self.format_version));
        }
        let rooms: BTreeSet<&str> = self.rooms.iter().map(|r| r.id.as_str()).collect();
        let objects: BTreeSet<&str> = self.objects.iter().map(|o| o.id.as_str()).collect();
        let triggers: BTreeSet<&str> = self.triggers.iter().map(|t| t.id.as_str()).collect();
        if !rooms.contains(self.start.as_str()) {
            return Err(format!("unknown start room `{}`", self.start));
        }
        for r in &self.rooms {
            for e in &r.exits {
                if let Some(to) = &e.to {
                    if !rooms.contains(to.as_str()) {
                        return Err(format!("exit from `{}` to unknown room `{to}`", r.id));
                    }
                }
                if canonical_direction(&e.direction).is_none() {
                    return Err(format!("bad direction `{}`", e.direction));
                }
            }
        }
        for o in &self.objects {
            let l = o.location.as_str();
            if l != INVENTORY_LOC && !rooms.contains(l) && !objects.contains(l) {
                return Err(format!("object `{}` at unknown location `{l}`", o.id));
            }
            if o.name.contains('.') {
                return Err(format!("object name `{}` contains a period", o.name));
            }
        }
        for t in &self.triggers {
            if !rooms.contains(t.room.as_str()) {
                return Err(format!("trigger `{}` in unknown room", t.id));
            }
            for r in &t.requires {
                if !triggers.contains(r.as_str()) {
                    return Err(format!("trigger `{}` requires unknown `{r}`", t.id));
                }
            }
            for o in &t.reveal_objects {
                if !objects.contains(o.as_str()) {
                    return Err(format!("trigger `{}` reveals unknown object `{o}`", t.id));
                }
            }
            for e in &t.reveal_exits {
                if !rooms.contains(e.room.as_str()) || !rooms.contains(e.to.as_str()) {
                    return Err(format!("trigger `{}` reveals exit to unknown room", t.id));
                }
            }
        }
        Ok(())
    }
}

fn canonical_direction(word: &str) -> Option<&'static str> {
    DIRECTIONS
        .iter()
        .find(|(short, long)| *short == word || *long == word)
        .map(|(_, long)| *long)
}

fn strip_articles(phrase: &str) -> String {
    phrase
        .split_whitespace()
        .filter(|w| !matches!(*w, "the" | "a" | "an"))
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct AdvState {
    room: String,
    visited: BTreeSet<String>,
    locations: BTreeMap<String, String>,
    revealed: BTreeSet<String>,
    open: BTreeSet<String>,
    fired: BTreeSet<String>,
    extra_exits: BTreeMap<(String, String), String>,
}

pub struct AdventureEnv {
    world: AdventureWorld,
    initial: AdvState,
    initial_observation: String,
    state: AdvState,
    checkpoints: CheckpointTracker,
}

impl AdventureEnv {
    pub fn new(world: AdventureWorld) -> Self {
        let initial = AdvState {
            room: world.start.clone(),
            visited: [world.start.clone()].into_iter().collect(),
            locations: world.objects.iter().map(|o| (o.id.clone(), o.location.clone())).collect(),
            revealed: BTreeSet::new(),
            open: world.objects.iter().filter(|o| o.open).map(|o| o.id.clone()).collect(),
            fired: BTreeSet::new(),
            extra_exits: BTreeMap::new(),
        };
        let labels = world.checkpoints.iter().map(|c| c.label.clone()).collect();
        let mut env = Self {
            state: initial.clone(),
            initial,
            initial_observation: String::new(),
            world,
            checkpoints: CheckpointTracker::new(labels),
        };
        env.initial_observation = env.describe_room();
        env.observe();
        env
    }

    pub fn current_room(&self) -> &str {
        &self.state.room
    }

    fn observe(&mut self) {
        let conds: Vec<Condition> = self.world.checkpoints.iter().map(|c| c.condition.clone()).collect();
        let state = &self.state;
        self.checkpoints.observe(|i| holds(&conds[i], state));
    }

    fn room(&self, id: &str) -> &RoomDef {
        self.world.rooms.iter().find(|r| r.id == id).expect("validated room id")
    }

    fn object(&self, id: &str) -> &ObjectDef {
        self.world.objects.iter().find(|o| o.id == id).expect("validated object id")
    }

    fn is_present(&self, o: &ObjectDef) -> bool {
        !o.hidden || self.state.revealed.contains(&o.id)
    }

    /// Visible from the current room: here, carried, or inside an open
    /// visible container.
    fn is_visible(&self, id: &str) -> bool {
        let mut cur = id;
        for _ in 0..=self.world.objects.len() {
            let o = self.object(cur);
            if !self.is_present(o) {
                return false;
            }
            let loc = &self.state.locations[cur];
            if loc == INVENTORY_LOC || *loc == self.state.room {
                return true;
            }
            if !self.world.objects.iter().any(|p| p.id == *loc) || !self.state.open.contains(loc) {
                return false;
            }
            cur = loc;
        }
        false
    }

    fn visible_objects(&self) -> Vec<&ObjectDef> {
        self.world.objects.iter().filter(|o| self.is_visible(&o.id)).collect()
    }

    fn resolve(&self, phrase: &str) -> Option<&ObjectDef> {
        let phrase = strip_articles(phrase);
        if phrase.is_empty() {
            return None;
        }
        let matches = |o: &&ObjectDef| {
            o.name == phrase
                || o.aliases.contains(&phrase)
                || o.name.rsplit(' ').next() == Some(phrase.as_str())
        };
        self.visible_objects().into_iter().find(matches)
    }

    fn exits(&self) -> BTreeMap<String, ExitDef> {
        let mut out = BTreeMap::new();
        for e in &self.room(&self.state.room).exits {
            let dir = canonical_direction(&e.direction).unwrap_or("north").to_string();
            out.insert(dir, e.clone());
        }
        for ((room, dir), to) in &self.state.extra_exits {
            if *room == self.state.room {
                out.insert(
                    dir.clone(),
                    ExitDef { direction: dir.clone(), to: Some(to.clone()), blocked: None },
                );
            }
        }
        out
    }

    fn describe_room(&self) -> String {
        let room = self.room(&self.state.room);
        let mut parts = alloc::vec![format!("You are in the {}.", room.name), room.description.clone()];
        for o in self.visible_objects() {
            if self.state.locations[&o.id] == self.state.room {
                parts.push(format!("There is {} {} here.", article(&o.name), o.name));
            }
        }
        for o in self.visible_objects() {
            if o.container && self.state.open.contains(&o.id) && self.state.locations[&o.id] != INVENTORY_LOC {
                if let Some(list) = self.contents_list(&o.id) {
                    parts.push(format!("The {} contains: {list}.", o.name));
                }
            }
        }
        parts.join(" ")
    }

    fn contents_list(&self, container: &str) -> Option<String> {
        let items: Vec<String> = self
            .world
            .objects
            .iter()
            .filter(|o| self.state.locations[&o.id] == container && self.is_present(o))
            .map(|o| format!("{} {}", article(&o.name), o.name))
            .collect();
        (!items.is_empty()).then(|| join_and(&items))
    }

    fn available_triggers(&self) -> Vec<&TriggerDef> {
        self.world
            .triggers
            .iter()
            .filter(|t| t.room == self.state.room && t.requires.iter().all(|r| self.state.fired.contains(r)))
            .collect()
    }

    fn fire(&mut self, id: &str) -> String {
        let t = self.world.triggers.iter().find(|t| t.id == id).expect("known trigger").clone();
        if self.state.fired.contains(&t.id) {
            return t.repeat_message.unwrap_or_else(|| "Nothing happens.".into());
        }
        self.state.fired.insert(t.id.clone());
        for o in &t.reveal_objects {
            self.state.revealed.insert(o.clone());
        }
        for e in &t.reveal_exits {
            let dir = canonical_direction(&e.direction).unwrap_or("north").to_string();
            self.state.extra_exits.insert((e.room.clone(), dir), e.to.clone());
        }
        t.message
    }

    fn go(&mut self, dir: &str) -> String {
        match self.exits().get(dir) {
            Some(ExitDef { blocked: Some(msg), .. }) => msg.clone(),
            Some(ExitDef { to: Some(to), .. }) => {
                self.state.room = to.clone();
                self.state.visited.insert(to.clone());
                self.describe_room()
            }
            _ => "You can't go that way.".into(),
        }
    }

    fn command(&mut self, norm: &str) -> String {
        let bare = strip_articles(norm);
        match bare.as_str() {
            "look" | "l" => return self.describe_room(),
            "inventory" | "i" => return self.inventory(),
            CHECK_VALID_ACTIONS => return render_valid_actions(&self.valid_actions()),
            _ => {}
        }
        let hit = self
            .available_triggers()
            .into_iter()
            .find(|t| t.commands.iter().any(|c| strip_articles(c) == bare))
            .map(|t| t.id.clone());
        if let Some(id) = hit {
            return self.fire(&id);
        }
        let dir_word = bare.strip_prefix("go ").or_else(|| bare.strip_prefix("walk ")).unwrap_or(&bare);
        if let Some(dir) = canonical_direction(dir_word) {
            return self.go(dir);
        }
        let (verb, rest) = match bare.split_once(' ') {
            Some((v, r)) => (v, r.trim()),
            None => return INVALID_ACTION_MESSAGE.into(),
        };
        let rest = rest.to_string();
        match verb {
            "examine" | "x" | "read" | "inspect" => self.examine(&rest),
            "look" => match rest.strip_prefix("at ") {
                Some(obj) => self.examine(obj),
                None => INVALID_ACTION_MESSAGE.into(),
            },
            "open" => self.open(&rest),
            "close" => self.close(&rest),
            "take" | "get" => {
                let obj = rest.split(" from ").next().unwrap_or(&rest).to_string();
                self.take(&obj)
            }
            "pick" => match rest.strip_prefix("up ") {
                Some(obj) => self.take(obj),
                None => INVALID_ACTION_MESSAGE.into(),
            },
            "drop" => self.drop(&rest),
            "put" => match rest.split_once(" in ") {
                Some((obj, container)) => self.put_in(obj, container),
                None => match rest.strip_prefix("down ") {
                    Some(obj) => self.drop(obj),
                    None => INVALID_ACTION_MESSAGE.into(),
                },
            },
            "move" | "push" | "pull" => match self.resolve(&rest) {
                Some(_) => "Nothing happens.".into(),
                None => format!("You can't see any {rest} here."),
            },
            _ => INVALID_ACTION_MESSAGE.into(),
        }
    }

    fn inventory(&self) -> String {
        let items: Vec<String> = self
            .world
            .objects
            .iter()
            .filter(|o| self.state.locations[&o.id] == INVENTORY_LOC)
            .map(|o| format!("{} {}", article(&o.name), o.name))
            .collect();
        if items.is_empty() {
            "You are empty-handed.".into()
        } else {
            format!("You are carrying: {}.", join_and(&items))
        }
    }

    fn examine(&mut self, phrase: &str) -> String {
        let Some(o) = self.resolve(phrase).cloned() else {
            return format!("You can't see any {} here.", strip_articles(phrase));
        };
        if o.container && o.opens_on_examine && !self.state.open.contains(&o.id) {
            return self.open(&o.name);
        }
        let mut text = o
            .description
            .clone()
            .unwrap_or_else(|| format!("There's nothing special about the {}.", o.name));
        if o.container && self.state.open.contains(&o.id) {
            if let Some(list) = self.contents_list(&o.id) {
                text.push_str(&format!(" The {} contains: {list}.", o.name));
            }
        }
        text
    }

    fn open(&mut self, phrase: &str) -> String {
        let Some(o) = self.resolve(phrase).cloned() else {
            return format!("You can't see any {} here.", strip_articles(phrase));
        };
        if !o.container {
            return format!("You can't open the {}.", o.name);
        }
        if !self.state.open.insert(o.id.clone()) {
            return "It is already open.".into();
        }
        match self.contents_list(&o.id) {
            Some(list) => format!("Opening the {} reveals {list}.", o.name),
            None => format!("You open the {}. It is empty.", o.name),
        }
    }

    fn close(&mut self, phrase: &str) -> String {
        let Some(o) = self.resolve(phrase).cloned() else {
            return format!("You can't see any {} here.", strip_articles(phrase));
        };
        if !o.container {
            return format!("You can't close the {}.", o.name);
        }
        if self.state.open.remove(&o.id) {
            format!("You close the {}.", o.name)
        } else {
            "It is already closed.".into()
        }
    }

    fn take(&mut self, phrase: &str) -> String {
        let Some(o) = self.resolve(phrase).cloned() else {
            return format!("You can't see any {} here.", strip_articles(phrase));
        };
        if self.state.locations[&o.id] == INVENTORY_LOC {
            return format!("You already have the {}.", o.name);
        }
        if !o.portable {
            return format!("The {} is fixed in place.", o.name);
        }
        self.state.locations.insert(o.id.clone(), INVENTORY_LOC.into());
        format!("You take the {}.", o.name)
    }

    fn drop(&mut self, phrase: &str) -> String {
        match self.resolve(phrase).cloned() {
            Some(o) if self.state.locations[&o.id] == INVENTORY_LOC => {
                self.state.locations.insert(o.id.clone(), self.state.room.clone());
                format!("You drop the {}.", o.name)
            }
            _ => format!("You are not carrying the {}.", strip_articles(phrase)),
        }
    }

    fn put_in(&mut self, obj: &str, container: &str) -> String {
        let item = match self.resolve(obj).cloned() {
            Some(o) if self.state.locations[&o.id] == INVENTORY_LOC => o,
            _ => return format!("You are not carrying the {}.", strip_articles(obj)),
        };
        let Some(c) = self.resolve(container).cloned() else {
            return format!("You can't see any {} here.", strip_articles(container));
        };
        if !c.container || c.id == item.id {
            return format!("You can't put anything in the {}.", c.name);
        }
        if !self.state.open.contains(&c.id) {
            return format!("The {} is closed.", c.name);
        }
        self.state.locations.insert(item.id.clone(), c.id.clone());
        format!("You put the {} in the {}.", item.name, c.name)
    }
}

fn holds(c: &Condition, s: &AdvState) -> bool {
    match c {
        Condition::InRoom { room } => s.room == *room,
        Condition::Visited { room } => s.visited.contains(room),
        Condition::Carrying { object } => s.locations.get(object).map(String::as_str) == Some(INVENTORY_LOC),
        Condition::Triggered { trigger } => s.fired.contains(trigger),
        Condition::All { of } => of.iter().all(|c| holds(c, s)),
    }
}

impl Environment for AdventureEnv {
    fn domain(&self) -> Domain {
        Domain::Adventure
    }

    fn task_id(&self) -> &str {
        &self.world.id
    }

    fn goal_text(&self) -> &str {
        &self.world.goal
    }

    fn initial_observation(&self) -> String {
        self.initial_observation.clone()
    }

    fn step(&mut self, action: &str) -> String {
        let norm = normalize_action(action);
        if norm.is_empty() {
            return INVALID_ACTION_MESSAGE.into();
        }
        let out = self.command(&norm);
        self.observe();
        out
    }

    fn is_success(&self) -> bool {
        holds(&self.world.success, &self.state)
    }

    fn checkpoints(&self) -> &CheckpointTracker {
        &self.checkpoints
    }

    fn valid_actions(&self) -> Vec<String> {
        let mut out: Vec<String> = alloc::vec!["look".into(), "inventory".into()];
        for (dir, e) in self.exits() {
            if e.blocked.is_none() && e.to.is_some() {
                out.push(format!("go {dir}"));
            }
        }
        for t in self.available_triggers() {
            if !self.state.fired.contains(&t.id) {
                out.push(t.commands[0].clone());
            }
        }
        let trigger_cmds: BTreeSet<String> =
            self.world.triggers.iter().flat_map(|t| t.commands.iter().map(|c| strip_articles(c))).collect();
        for o in self.visible_objects() {
            out.push(format!("examine {}", o.name));
            let carried = self.state.locations[&o.id] == INVENTORY_LOC;
            if carried {
                out.push(format!("drop {}", o.name));
            } else if o.portable {
                out.push(format!("take {}", o.name));
            }
            let open_cmd = format!("open {}", o.name);
            if o.container && !self.state.open.contains(&o.id) && !trigger_cmds.contains(&open_cmd) {
                out.push(open_cmd);
            }
        }
        out
    }

    fn reset(&mut self) {
        self.state = self.initial.clone();
        self.checkpoints.clear();
        self.observe();
    }
}
