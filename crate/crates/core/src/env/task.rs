//! Task manifests: fixture references and seeded generators resolved into
//! concrete environments.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adventure::{AdventureEnv, AdventureWorld};
use super::blocksworld::{BlocksTask, BlocksTaskFile, BlocksWorldEnv};
use super::gripper::{GripperEnv, GripperTask, GripperTaskFile};
use super::household::{HouseholdEnv, HouseholdWorld};
use super::{Domain, Environment};

const FIXTURES: [(&str, &str); 6] = [
    ("zork_secret_passage.json", include_str!("../../fixtures/worlds/zork_secret_passage.json")),
    ("alfworld_two_soapbars.json", include_str!("../../fixtures/worlds/alfworld_two_soapbars.json")),
    ("blocksworld_three_tower.json", include_str!("../../fixtures/worlds/blocksworld_three_tower.json")),
    ("blocksworld_four_swap.json", include_str!("../../fixtures/worlds/blocksworld_four_swap.json")),
    ("gripper_two_balls.json", include_str!("../../fixtures/worlds/gripper_two_balls.json")),
    ("default_suite.json", include_str!("../../fixtures/worlds/default_suite.json")),
];

/// Looks up a fixture compiled into the crate by file name.
pub fn bundled_fixture(name: &str) -> Option<&'static str> {
    let base = name.rsplit('/').next().unwrap_or(name);
    FIXTURES.iter().find(|(n, _)| *n == base).map(|(_, t)| *t)
}

/// The default evaluation suite.
pub fn bundled_manifest() -> TaskManifest {
    TaskManifest::from_json(bundled_fixture("default_suite.json").expect("bundled suite"))
        .expect("bundled suite parses")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskManifest {
    pub format_version: u32,
    pub tasks: Vec<TaskEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskEntry {
    pub id: String,
    pub domain: Domain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<Generate>,
}

/// Seeded random instance. `size` is blocks for BlocksWorld, balls for Gripper.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generate {
    pub seed: u64,
    pub size: usize,
    #[serde(default = "two")]
    pub rooms: usize,
}

fn two() -> usize {
    2
}

/// A fully resolved task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TaskSpec {
    Blocksworld(BlocksTask),
    Gripper(GripperTask),
    Adventure(AdventureWorld),
    Household(HouseholdWorld),
}

impl TaskSpec {
    pub fn id(&self) -> &str {
        match self {
            TaskSpec::Blocksworld(t) => &t.id,
            TaskSpec::Gripper(t) => &t.id,
            TaskSpec::Adventure(w) => &w.id,
            TaskSpec::Household(w) => &w.id,
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            TaskSpec::Blocksworld(_) => Domain::Blocksworld,
            TaskSpec::Gripper(_) => Domain::Gripper,
            TaskSpec::Adventure(_) => Domain::Adventure,
            TaskSpec::Household(_) => Domain::Household,
        }
    }

    /// Parses a single fixture of the given domain.
    pub fn from_fixture(domain: Domain, text: &str) -> Result<Self, String> {
        Ok(match domain {
            Domain::Blocksworld => {
                let f: BlocksTaskFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
                check_version(f.format_version)?;
                TaskSpec::Blocksworld(BlocksTask::from_file(&f)?)
            }
            Domain::Gripper => {
                let f: GripperTaskFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
                check_version(f.format_version)?;
                TaskSpec::Gripper(GripperTask::from_file(&f)?)
            }
            Domain::Adventure => TaskSpec::Adventure(AdventureWorld::from_json(text)?),
            Domain::Household => TaskSpec::Household(HouseholdWorld::from_json(text)?),
        })
    }
}

fn check_version(v: u32) -> Result<(), String> {
    if v == 1 {
        Ok(())
    } else {
        Err(format!("unsupported task format {v}"))
    }
}

pub fn build_environment(spec: &TaskSpec) -> Box<dyn Environment> {
    match spec {
        TaskSpec::Blocksworld(t) => Box::new(BlocksWorldEnv::new(t.clone())),
        TaskSpec::Gripper(t) => Box::new(GripperEnv::new(t.clone())),
        TaskSpec::Adventure(w) => Box::new(AdventureEnv::new(w.clone())),
        TaskSpec::Household(w) => Box::new(HouseholdEnv::new(w.clone())),
    }
}

impl TaskManifest {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let m: Self = serde_json::from_str(text).map_err(|e| e.to_string())?;
        check_version(m.format_version)?;
        Ok(m)
    }

    /// Resolves every entry. Fixture names go through `load` first and fall
    /// back to the bundled fixtures.
    pub fn resolve(&self, load: &dyn Fn(&str) -> Option<String>) -> Result<Vec<TaskSpec>, String> {
        self.tasks.iter().map(|t| t.resolve(load)).collect()
    }
}

impl TaskEntry {
    pub fn resolve(&self, load: &dyn Fn(&str) -> Option<String>) -> Result<TaskSpec, String> {
        let spec = match (&self.fixture, &self.generate) {
            (Some(name), None) => {
                let text = load(name)
                    .or_else(|| bundled_fixture(name).map(String::from))
                    .ok_or_else(|| format!("task `{}`: fixture `{name}` not found", self.id))?;
                TaskSpec::from_fixture(self.domain, &text)
                    .map_err(|e| format!("task `{}`: {e}", self.id))?
            }
            (None, Some(g)) => {
                let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
                match self.domain {
                    Domain::Blocksworld if g.size > 0 => {
                        TaskSpec::Blocksworld(BlocksTask::random(&self.id, g.size, &mut rng))
                    }
                    Domain::Gripper if g.size > 0 => {
                        TaskSpec::Gripper(GripperTask::random(&self.id, g.rooms, g.size, &mut rng))
                    }
                    d => return Err(format!("task `{}`: cannot generate {d} tasks", self.id)),
                }
            }
            _ => return Err(format!("task `{}`: exactly one of fixture/generate is required", self.id)),
        };
        if spec.domain() != self.domain {
            return Err(format!("task `{}`: fixture is not a {} task", self.id, self.domain));
        }
        Ok(match spec {
            TaskSpec::Blocksworld(mut t) => {
                t.id = self.id.clone();
                TaskSpec::Blocksworld(t)
            }
            TaskSpec::Gripper(mut t) => {
                t.id = self.id.clone();
                TaskSpec::Gripper(t)
            }
            TaskSpec::Adventure(mut w) => {
                w.id = self.id.clone();
                TaskSpec::Adventure(w)
            }
            TaskSpec::Household(mut w) => {
                w.id = self.id.clone();
                TaskSpec::Household(w)
            }
        })
    }
}
