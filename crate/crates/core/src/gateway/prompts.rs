//! Bundled prompt templates and per-domain prompt data.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::template::{PromptTemplate, TemplateError};
use crate::env::Domain;

const TEMPLATES: [(&str, &str); 13] = [
    ("planner_system_pddl.txt", include_str!("../../fixtures/templates/planner_system_pddl.txt")),
    ("planner_system_alfworld.txt", include_str!("../../fixtures/templates/planner_system_alfworld.txt")),
    ("planner_system_jericho.txt", include_str!("../../fixtures/templates/planner_system_jericho.txt")),
    ("planner_instance_pddl.txt", include_str!("../../fixtures/templates/planner_instance_pddl.txt")),
    ("planner_instance_alfworld.txt", include_str!("../../fixtures/templates/planner_instance_alfworld.txt")),
    ("planner_instance_jericho.txt", include_str!("../../fixtures/templates/planner_instance_jericho.txt")),
    ("actor_system.txt", include_str!("../../fixtures/templates/actor_system.txt")),
    ("actor_instance.txt", include_str!("../../fixtures/templates/actor_instance.txt")),
    ("verification_system.txt", include_str!("../../fixtures/templates/verification_system.txt")),
    ("verification_instance.txt", include_str!("../../fixtures/templates/verification_instance.txt")),
    ("synthesis_system.txt", include_str!("../../fixtures/templates/synthesis_system.txt")),
    ("synthesis_instance.txt", include_str!("../../fixtures/templates/synthesis_instance.txt")),
    ("domains.json", include_str!("../../fixtures/templates/domains.json")),
];

/// Names of every file in the template directory.
pub fn template_names() -> impl Iterator<Item = &'static str> {
    TEMPLATES.iter().map(|(n, _)| *n)
}

pub fn bundled_template(name: &str) -> Option<&'static str> {
    TEMPLATES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Per-domain prompt material from `domains.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainGuide {
    /// Which planner template pair to use: pddl, alfworld or jericho.
    pub planner_variant: String,
    pub domain_instructions: String,
    pub example_format: String,
    pub task_exemplars: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    pub domain: Domain,
    pub guide: DomainGuide,
    pub planner_system: PromptTemplate,
    pub planner_instance: PromptTemplate,
    pub actor_system: PromptTemplate,
    pub actor_instance: PromptTemplate,
    pub verification_system: PromptTemplate,
    pub verification_instance: PromptTemplate,
    pub synthesis_system: PromptTemplate,
    pub synthesis_instance: PromptTemplate,
}

impl PromptSet {
    pub fn bundled(domain: Domain) -> Self {
        Self::load(domain, &|_| None).expect("bundled prompts are valid")
    }

    /// Loads templates through `lookup` (file name -> contents), falling back
    /// to the bundled copy for anything it does not provide.
    pub fn load(domain: Domain, lookup: &dyn Fn(&str) -> Option<String>) -> Result<Self, TemplateError> {
        let get = |name: &str| -> Result<PromptTemplate, TemplateError> {
            let body = lookup(name)
                .or_else(|| bundled_template(name).map(String::from))
                .ok_or_else(|| TemplateError::UnknownTemplate(name.to_string()))?;
            Ok(PromptTemplate::new(name, body))
        };
        let domains = get("domains.json")?;
        let mut guides: BTreeMap<String, DomainGuide> = serde_json::from_str(domains.body())
            .map_err(|e| TemplateError::InvalidData(alloc::format!("domains.json: {e}")))?;
        let guide = guides
            .remove(domain.as_str())
            .ok_or_else(|| TemplateError::InvalidData(alloc::format!("domains.json has no `{domain}` entry")))?;
        let variant = guide.planner_variant.clone();
        Ok(Self {
            domain,
            planner_system: get(&alloc::format!("planner_system_{variant}.txt"))?,
            planner_instance: get(&alloc::format!("planner_instance_{variant}.txt"))?,
            actor_system: get("actor_system.txt")?,
            actor_instance: get("actor_instance.txt")?,
            verification_system: get("verification_system.txt")?,
            verification_instance: get("verification_instance.txt")?,
            synthesis_system: get("synthesis_system.txt")?,
            synthesis_instance: get("synthesis_instance.txt")?,
            guide,
        })
    }

    /// The quoted bullet questions of the verification system prompt, with
    /// `<<subgoal>>` filled in.
    pub fn verification_questions(&self, subgoal: &str) -> Vec<String> {
        verification_questions(self.verification_system.body(), subgoal)
    }
}

pub fn verification_questions(system_prompt: &str, subgoal: &str) -> Vec<String> {
    system_prompt
        .lines()
        .filter_map(|l| {
            let q = l.trim().strip_prefix("- ")?.trim();
            let q = q.strip_prefix('"')?.strip_suffix('"')?;
            Some(q.replace("<<subgoal>>", subgoal))
        })
        .collect()
}
