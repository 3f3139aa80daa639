//! Gripper: a robot with two grippers moving balls between rooms.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::blocksworld::join_and;
use super::{
    bfs, normalize_action, render_valid_actions, split_call, CheckpointTracker, Domain,
    Environment, GroundState, CHECK_VALID_ACTIONS, INVALID_ACTION_MESSAGE,
};
use crate::domain::canonical_predicate;

pub const GRIPPERS: [&str; 2] = ["left", "right"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BallLoc {
    Room(usize),
    Gripper(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GripperState {
    pub rooms: usize,
    pub robot: usize,
    pub balls: Vec<BallLoc>,
}

pub fn room_name(i: usize) -> String {
    format!("room{}", i + 1)
}

pub fn ball_name(i: usize) -> String {
    format!("ball{}", i + 1)
}

fn numbered(name: &str, prefix: &str, n: usize) -> Option<usize> {
    let k: usize = name.trim().strip_prefix(prefix)?.parse().ok()?;
    (k >= 1 && k <= n).then(|| k - 1)
}

fn gripper_index(name: &str) -> Option<usize> {
    GRIPPERS.iter().position(|g| *g == name.trim())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GripperAction {
    Move(usize, usize),
    Pick(usize, usize, usize),
    Drop(usize, usize, usize),
}

impl fmt::Display for GripperAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GripperAction::Move(a, b) => write!(f, "move({},{})", room_name(a), room_name(b)),
            GripperAction::Pick(b, r, g) => {
                write!(f, "pick({},{},{})", ball_name(b), room_name(r), GRIPPERS[g])
            }
            GripperAction::Drop(b, r, g) => {
                write!(f, "drop({},{},{})", ball_name(b), room_name(r), GRIPPERS[g])
            }
        }
    }
}

impl GripperAction {
    /// Accepts `move(room1,room2)`, `move from room1 to room2`, `move to room2`,
    /// `pick(ball1,room1,left)`, `pick up ball1 with the left gripper`, ...
    /// A missing room in pick/drop/move means the robot's current room.
    pub fn parse(raw: &str, state: &GripperState) -> Option<Self> {
        let s = normalize_action(raw);
        let (verb, args): (String, Vec<String>) = match split_call(&s) {
            Some((name, args)) => (name, args),
            None => {
                let mut words = s
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|w| !w.is_empty())
                    .filter(|w| {
                        !matches!(*w, "from" | "to" | "the" | "with" | "in" | "using" | "gripper" | "up" | "down" | "into")
                    });
                let verb = words.next()?.to_string();
                (verb, words.map(|w| w.to_string()).collect())
            }
        };
        let mut rooms = Vec::new();
        let mut balls = Vec::new();
        let mut grippers = Vec::new();
        for a in &args {
            if let Some(r) = numbered(a, "room", state.rooms) {
                rooms.push(r);
            } else if let Some(b) = numbered(a, "ball", state.balls.len()) {
                balls.push(b);
            } else {
                grippers.push(gripper_index(a)?);
            }
        }
        let here = state.robot;
        match verb.replace(['-', '_'], "").as_str() {
            "move" | "go" if balls.is_empty() && grippers.is_empty() => match rooms.as_slice() {
                [to] => Some(GripperAction::Move(here, *to)),
                [from, to] => Some(GripperAction::Move(*from, *to)),
                _ => None,
            },
            verb @ ("pick" | "pickup" | "drop" | "putdown" | "put") => {
                let ([b], [g]) = (balls.as_slice(), grippers.as_slice()) else {
                    return None;
                };
                let r = match rooms.as_slice() {
                    [] => here,
                    [r] => *r,
                    _ => return None,
                };
                if verb.starts_with("pick") {
                    Some(GripperAction::Pick(*b, r, *g))
                } else {
                    Some(GripperAction::Drop(*b, r, *g))
                }
            }
            _ => None,
        }
    }
}

impl GripperState {
    pub fn carried_by(&self, g: usize) -> Option<usize> {
        self.balls.iter().position(|l| *l == BallLoc::Gripper(g))
    }

    pub fn apply(&self, action: GripperAction) -> Option<Self> {
        let mut next = self.clone();
        match action {
            GripperAction::Move(from, to) => {
                if from != self.robot || to >= self.rooms || from == to {
                    return None;
                }
                next.robot = to;
            }
            GripperAction::Pick(b, r, g) => {
                if r != self.robot
                    || self.balls.get(b) != Some(&BallLoc::Room(r))
                    || g >= GRIPPERS.len()
                    || self.carried_by(g).is_some()
                {
                    return None;
                }
                next.balls[b] = BallLoc::Gripper(g);
            }
            GripperAction::Drop(b, r, g) => {
                if r != self.robot || self.balls.get(b) != Some(&BallLoc::Gripper(g)) {
                    return None;
                }
                next.balls[b] = BallLoc::Room(r);
            }
        }
        Some(next)
    }

    /// Applicable operators: moves, then picks, then drops.
    pub fn applicable(&self) -> Vec<GripperAction> {
        let mut out = Vec::new();
        for to in 0..self.rooms {
            if to != self.robot {
                out.push(GripperAction::Move(self.robot, to));
            }
        }
        for (b, loc) in self.balls.iter().enumerate() {
            if *loc == BallLoc::Room(self.robot) {
                for g in 0..GRIPPERS.len() {
                    if self.carried_by(g).is_none() {
                        out.push(GripperAction::Pick(b, self.robot, g));
                    }
                }
            }
        }
        for (b, loc) in self.balls.iter().enumerate() {
            if let BallLoc::Gripper(g) = *loc {
                out.push(GripperAction::Drop(b, self.robot, g));
            }
        }
        out
    }

    pub fn render(&self) -> String {
        let mut parts = Vec::new();
        parts.push(format!("You are in {}.", room_name(self.robot)));
        for (b, loc) in self.balls.iter().enumerate() {
            if let BallLoc::Room(r) = *loc {
                parts.push(format!("Ball{} is in {}.", b + 1, room_name(r)));
            }
        }
        for (g, name) in GRIPPERS.iter().enumerate() {
            match self.carried_by(g) {
                Some(b) => parts.push(format!("Gripper {name} is carrying {}.", ball_name(b))),
                None => parts.push(format!("Gripper {name} is free.")),
            }
        }
        parts.join(" ")
    }

    fn event(&self, action: GripperAction) -> String {
        match action {
            GripperAction::Move(a, b) => {
                format!("You moved from {} to {}.", room_name(a), room_name(b))
            }
            GripperAction::Pick(b, _, g) => {
                format!("You picked up {} with the {} gripper.", ball_name(b), GRIPPERS[g])
            }
            GripperAction::Drop(b, r, g) => format!(
                "You dropped {} in {} from the {} gripper.",
                ball_name(b),
                room_name(r),
                GRIPPERS[g]
            ),
        }
    }
}

pub fn shortest_plan(
    start: &GripperState,
    goal: impl Fn(&GripperState) -> bool,
    max_states: usize,
) -> Option<Vec<GripperAction>> {
    bfs(
        start,
        |s| s.applicable().into_iter().filter_map(|a| Some((a, s.apply(a)?))).collect(),
        goal,
        max_states,
    )
}

pub fn goal_holds(goal: &[(usize, usize)], s: &GripperState) -> bool {
    goal.iter().all(|(b, r)| s.balls.get(*b) == Some(&BallLoc::Room(*r)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GripperTaskFile {
    pub format_version: u32,
    pub id: String,
    pub rooms: usize,
    pub balls: usize,
    pub robot: String,
    pub initial: Vec<String>,
    pub goal: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GripperTask {
    pub id: String,
    pub initial: GripperState,
    /// (ball, room) pairs.
    pub goal: Vec<(usize, usize)>,
    pub goal_text: String,
}

impl GripperTask {
    pub fn from_file(file: &GripperTaskFile) -> Result<Self, String> {
        if file.rooms < 2 || file.balls == 0 {
            return Err("need at least two rooms and one ball".into());
        }
        let robot = numbered(&file.robot, "room", file.rooms)
            .ok_or_else(|| format!("bad robot room `{}`", file.robot))?;
        let parse_at = |t: &str| -> Result<(usize, usize), String> {
            let p = canonical_predicate(t).map_err(|e| e.to_string())?;
            match (p.name(), p.args()) {
                ("at", [b, r]) => Ok((
                    numbered(b, "ball", file.balls).ok_or_else(|| format!("bad ball in `{t}`"))?,
                    numbered(r, "room", file.rooms).ok_or_else(|| format!("bad room in `{t}`"))?,
                )),
                _ => Err(format!("expected at(ball,room), got `{t}`")),
            }
        };
        let mut balls: Vec<Option<BallLoc>> = alloc::vec![None; file.balls];
        for t in &file.initial {
            let (b, r) = parse_at(t)?;
            if balls[b].replace(BallLoc::Room(r)).is_some() {
                return Err(format!("{} placed twice", ball_name(b)));
            }
        }
        let balls: Option<Vec<BallLoc>> = balls.into_iter().collect();
        let initial = GripperState {
            rooms: file.rooms,
            robot,
            balls: balls.ok_or("every ball needs an initial room")?,
        };
        let goal = file.goal.iter().map(|t| parse_at(t)).collect::<Result<Vec<_>, _>>()?;
        if goal.is_empty() {
            return Err("empty goal".into());
        }
        Ok(Self { id: file.id.clone(), initial, goal_text: goal_sentence(&goal), goal })
    }

    /// Random placement; every ball's goal room differs from its start room.
    pub fn random<R: Rng + ?Sized>(id: &str, rooms: usize, balls: usize, rng: &mut R) -> Self {
        let rooms = rooms.max(2);
        let robot = rng.gen_range(0..rooms);
        let mut locs = Vec::with_capacity(balls);
        let mut goal = Vec::with_capacity(balls);
        for b in 0..balls {
            let start = rng.gen_range(0..rooms);
            let mut target = rng.gen_range(0..rooms - 1);
            if target >= start {
                target += 1;
            }
            locs.push(BallLoc::Room(start));
            goal.push((b, target));
        }
        let initial = GripperState { rooms, robot, balls: locs };
        Self { id: id.into(), initial, goal_text: goal_sentence(&goal), goal }
    }
}

fn goal_sentence(goal: &[(usize, usize)]) -> String {
    let facts: Vec<String> =
        goal.iter().map(|(b, r)| format!("{} is in {}", ball_name(*b), room_name(*r))).collect();
    format!("Your goal is to transport the balls so that {}.", join_and(&facts))
}

pub struct GripperEnv {
    task: GripperTask,
    state: GripperState,
    checkpoints: CheckpointTracker,
}

impl GripperEnv {
    /// Checkpoints: each goal placement, plus having carried any ball.
    pub fn new(task: GripperTask) -> Self {
        let mut labels: Vec<String> = task
            .goal
            .iter()
            .map(|(b, r)| format!("{} is in {}", ball_name(*b), room_name(*r)))
            .collect();
        labels.push("a ball has been picked up".into());
        let mut env = Self {
            state: task.initial.clone(),
            task,
            checkpoints: CheckpointTracker::new(labels),
        };
        env.observe();
        env
    }

    pub fn state(&self) -> &GripperState {
        &self.state
    }

    pub fn task(&self) -> &GripperTask {
        &self.task
    }

    fn observe(&mut self) {
        let s = &self.state;
        let goal = &self.task.goal;
        self.checkpoints.observe(|i| match goal.get(i) {
            Some((b, r)) => s.balls[*b] == BallLoc::Room(*r),
            None => s.balls.iter().any(|l| matches!(l, BallLoc::Gripper(_))),
        });
    }
}

impl Environment for GripperEnv {
    fn domain(&self) -> Domain {
        Domain::Gripper
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
        let Some(a) = GripperAction::parse(&norm, &self.state) else {
            return INVALID_ACTION_MESSAGE.into();
        };
        match self.state.apply(a) {
            Some(next) => {
                let event = next.event(a);
                self.state = next;
                self.observe();
                format!("{event} {}", self.state.render())
            }
            None => INVALID_ACTION_MESSAGE.into(),
        }
    }

    fn is_success(&self) -> bool {
        goal_holds(&self.task.goal, &self.state)
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
        GroundState::Gripper { state: self.state.clone(), goal: self.task.goal.clone() }
    }
}
