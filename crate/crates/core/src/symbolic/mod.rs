//! Rule-driven symbolic memory.
//!
//! A [`SymbolicTracker`] owns a compiled [`DomainRuleset`] and turns
//! observation text into new [`SymbolicMemory`] values. Updates are pure:
//! the input memory is never modified.

mod ruleset;
mod summary;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

pub use ruleset::{
    ConflictPolicy, DomainRuleset, Effect, PatternRule, RulesetError, RULESET_FORMAT_VERSION,
};
use ruleset::{compile, expand, split_object_list, CompiledPattern};

use crate::domain::{canonical_predicate, Predicate, SummaryStyle, SymbolicMemory, INVENTORY};
use crate::env::Domain;

const BLOCKSWORLD_JSON: &str = include_str!("../../fixtures/rulesets/blocksworld.json");
const GRIPPER_JSON: &str = include_str!("../../fixtures/rulesets/gripper.json");
const ADVENTURE_JSON: &str = include_str!("../../fixtures/rulesets/adventure.json");
const HOUSEHOLD_JSON: &str = include_str!("../../fixtures/rulesets/household.json");

pub fn blocksworld_ruleset() -> DomainRuleset {
    DomainRuleset::from_json(BLOCKSWORLD_JSON).expect("bundled blocksworld ruleset")
}

pub fn gripper_ruleset() -> DomainRuleset {
    DomainRuleset::from_json(GRIPPER_JSON).expect("bundled gripper ruleset")
}

pub fn adventure_ruleset() -> DomainRuleset {
    DomainRuleset::from_json(ADVENTURE_JSON).expect("bundled adventure ruleset")
}

pub fn household_ruleset() -> DomainRuleset {
    DomainRuleset::from_json(HOUSEHOLD_JSON).expect("bundled household ruleset")
}

pub fn ruleset_for(domain: Domain) -> DomainRuleset {
    match domain {
        Domain::Blocksworld => blocksworld_ruleset(),
        Domain::Gripper => gripper_ruleset(),
        Domain::Adventure => adventure_ruleset(),
        Domain::Household => household_ruleset(),
    }
}

/// Compiled ruleset plus the update procedure.
pub struct SymbolicTracker {
    ruleset: DomainRuleset,
    patterns: Vec<CompiledPattern>,
}

/// One pattern match, ready to apply.
struct Hit<'a> {
    effects: &'a [Effect],
    caps: Vec<Option<&'a str>>,
}

impl SymbolicTracker {
    pub fn new(ruleset: DomainRuleset) -> Result<Self, RulesetError> {
        let patterns = compile(&ruleset)?;
        Ok(Self { ruleset, patterns })
    }

    pub fn for_domain(domain: Domain) -> Self {
        Self::new(ruleset_for(domain)).expect("bundled rulesets compile")
    }

    pub fn ruleset(&self) -> &DomainRuleset {
        &self.ruleset
    }

    /// Fresh memory with the ruleset's manipulators, after applying the rules
    /// to the initial observation. The step counter stays at zero.
    pub fn init_memory(&self, initial_observation: &str) -> SymbolicMemory {
        let manipulators: Vec<&str> = self.ruleset.manipulators.iter().map(|s| s.as_str()).collect();
        let empty = SymbolicMemory::new(
            &self.ruleset.domain_name,
            &manipulators,
            self.ruleset.summary_style,
        );
        let mut m = self.update_memory(&empty, initial_observation, None);
        m.step = 0;
        m
    }

    /// Applies one observation. `last_action` is accepted for parity with
    /// trajectory logs; the bundled rules only read the observation.
    pub fn update_memory(
        &self,
        m: &SymbolicMemory,
        observation: &str,
        _last_action: Option<&str>,
    ) -> SymbolicMemory {
        let mut next = m.clone();
        next.step += 1;
        let hits = self.hits(observation);
        if hits.is_empty() {
            return next;
        }
        match &self.ruleset.policy {
            ConflictPolicy::BlocksRebuild => apply_blocks_rebuild(&mut next, &hits),
            ConflictPolicy::RetractMentioned { positional } => {
                apply_retract_mentioned(&mut next, &hits, positional)
            }
        }
        next
    }

    /// Memory obtained by folding `update_memory` over observations.
    pub fn fold<'a, I>(&self, m: &SymbolicMemory, observations: I) -> SymbolicMemory
    where
        I: IntoIterator<Item = &'a str>,
    {
        observations
            .into_iter()
            .fold(m.clone(), |acc, o| self.update_memory(&acc, o, None))
    }

    fn hits<'a>(&'a self, observation: &'a str) -> Vec<Hit<'a>> {
        let mut found: Vec<(usize, usize, Hit<'a>)> = Vec::new();
        for (pi, p) in self.patterns.iter().enumerate() {
            for c in p.regex.captures_iter(observation) {
                let start = c.get(0).map_or(0, |m| m.start());
                let caps = (0..c.len()).map(|i| c.get(i).map(|m| m.as_str())).collect();
                found.push((
                    start,
                    pi,
                    Hit {
                        effects: &p.effects,
                        caps,
                    },
                ));
            }
        }
        found.sort_by_key(|(start, pi, _)| (*start, *pi));
        found.into_iter().map(|(_, _, h)| h).collect()
    }
}

fn lower(s: String) -> String {
    s.trim().to_lowercase()
}

fn parse_template(template: &str, caps: &[Option<&str>], loc: Option<&str>) -> Option<Predicate> {
    canonical_predicate(&expand(template, caps, loc)).ok()
}

/// Block-stacking semantics: holding first, then a rebuild of every
/// mentioned block's position and clearness facts.
fn apply_blocks_rebuild(m: &mut SymbolicMemory, hits: &[Hit<'_>]) {
    let mut first_held: Option<String> = None;
    let mut saw_empty = false;
    let mut observed_on: BTreeMap<String, String> = BTreeMap::new();
    let mut on_table: BTreeSet<String> = BTreeSet::new();
    let mut clear: BTreeSet<String> = BTreeSet::new();
    let mut not_clear: BTreeSet<String> = BTreeSet::new();

    for hit in hits {
        for eff in hit.effects {
            match eff {
                Effect::Hold { object, .. } => {
                    if first_held.is_none() {
                        first_held = Some(lower(expand(object, &hit.caps, None)));
                    }
                }
                Effect::Release { .. } => saw_empty = true,
                Effect::Assert { predicate } => {
                    let Some(p) = parse_template(predicate, &hit.caps, None) else {
                        continue;
                    };
                    let args = p.args();
                    match (p.name(), args.len()) {
                        ("on", 2) => {
                            observed_on.insert(args[0].clone(), args[1].clone());
                        }
                        ("on_table", 1) => {
                            on_table.insert(args[0].clone());
                        }
                        ("clear", 1) => {
                            clear.insert(args[0].clone());
                        }
                        ("not_clear", 1) => {
                            not_clear.insert(args[0].clone());
                        }
                        _ => {
                            m.predicates.insert(p);
                        }
                    }
                }
                other => apply_world_effect(m, other, &hit.caps, &BTreeSet::new()),
            }
        }
    }

    let manipulator = m
        .holding
        .keys()
        .next()
        .cloned()
        .unwrap_or_else(|| "arm".to_string());
    let held = match first_held {
        Some(b) => Some(b),
        None if saw_empty => None,
        None => m.holding.get(&manipulator).cloned().flatten(),
    };
    m.holding.insert(manipulator, held.clone());

    let bases: BTreeSet<String> = observed_on.values().cloned().collect();
    let mut mentioned: BTreeSet<String> = BTreeSet::new();
    mentioned.extend(observed_on.keys().cloned());
    mentioned.extend(bases.iter().cloned());
    mentioned.extend(on_table.iter().cloned());
    mentioned.extend(clear.iter().cloned());
    mentioned.extend(not_clear.iter().cloned());
    if let Some(h) = &held {
        mentioned.insert(h.clone());
    }

    let mut fresh: Vec<Predicate> = Vec::new();
    fresh.push(Predicate::atom(if held.is_none() {
        "arm_empty"
    } else {
        "arm_not_empty"
    }));
    for block in &mentioned {
        let is_held = held.as_deref() == Some(block.as_str());
        if !is_held {
            if let Some(base) = observed_on.get(block) {
                fresh.push(pred("on", &[block, base]));
            } else if on_table.contains(block) {
                fresh.push(pred("on_table", &[block]));
            }
        }
        if not_clear.contains(block) {
            fresh.push(pred("not_clear", &[block]));
        } else if is_held || clear.contains(block) {
            fresh.push(pred("clear", &[block]));
        } else if bases.contains(block) {
            fresh.push(pred("not_clear", &[block]));
        } else {
            fresh.push(pred("clear", &[block]));
        }
    }

    m.predicates.retain(|p| {
        if p.name() == "arm_empty" || p.name() == "arm_not_empty" {
            return false;
        }
        let rebuilt = matches!(p.name(), "on" | "on_table" | "clear" | "not_clear");
        !(rebuilt && mentioned.iter().any(|b| p.mentions(b)))
    });
    m.predicates.extend(fresh);
}

fn pred(name: &str, args: &[&String]) -> Predicate {
    Predicate::new(name, args.iter().map(|s| s.as_str())).expect("valid generated predicate")
}

fn apply_retract_mentioned(m: &mut SymbolicMemory, hits: &[Hit<'_>], positional: &[String]) {
    // Objects this observation says are held; positional facts about them
    // in the same observation are ignored.
    let mut held_now: BTreeSet<String> = BTreeSet::new();
    for hit in hits {
        for eff in hit.effects {
            if let Effect::Hold { object, .. } = eff {
                held_now.insert(lower(expand(object, &hit.caps, None)));
            }
        }
    }

    for hit in hits {
        for eff in hit.effects {
            match eff {
                Effect::Assert { predicate } => {
                    let loc = m.agent_location.clone();
                    let Some(p) = parse_template(predicate, &hit.caps, loc.as_deref()) else {
                        continue;
                    };
                    let is_positional = positional.iter().any(|n| n == p.name());
                    if let Some(subject) = p.args().first().cloned() {
                        if is_positional {
                            if held_now.contains(&subject) {
                                continue;
                            }
                            m.predicates.retain(|q| {
                                !(positional.iter().any(|n| n == q.name())
                                    && q.args().first() == Some(&subject))
                            });
                            release_object(m, &subject);
                        } else {
                            m.predicates.retain(|q| {
                                !(q.name() == p.name() && q.args().first() == Some(&subject))
                            });
                        }
                    }
                    m.predicates.insert(p);
                }
                Effect::Hold {
                    manipulator,
                    object,
                } => {
                    let man = lower(expand(manipulator, &hit.caps, None));
                    let obj = lower(expand(object, &hit.caps, None));
                    if obj.is_empty() {
                        continue;
                    }
                    release_object(m, &obj);
                    m.predicates.retain(|q| {
                        !(positional.iter().any(|n| n == q.name())
                            && q.args().first() == Some(&obj))
                    });
                    if m.style != SummaryStyle::Predicates {
                        m.set_discovered(&obj, INVENTORY);
                    }
                    m.holding.insert(man, Some(obj));
                }
                Effect::Release { manipulator } => {
                    let man = lower(expand(manipulator, &hit.caps, None));
                    m.holding.insert(man, None);
                }
                other => apply_world_effect(m, other, &hit.caps, &held_now),
            }
        }
    }
}

fn release_object(m: &mut SymbolicMemory, obj: &str) {
    for held in m.holding.values_mut() {
        if held.as_deref() == Some(obj) {
            *held = None;
        }
    }
}

/// Location, visit and discovered-object effects shared by all policies.
fn apply_world_effect(
    m: &mut SymbolicMemory,
    eff: &Effect,
    caps: &[Option<&str>],
    held_now: &BTreeSet<String>,
) {
    let loc = m.agent_location.clone();
    let ex = |t: &str| expand(t, caps, loc.as_deref()).trim().to_string();
    match eff {
        Effect::Locate { location } => {
            let l = ex(location);
            if !l.is_empty() {
                m.agent_location = Some(l);
            }
        }
        Effect::Visit { location } => {
            let l = ex(location);
            if !l.is_empty() {
                m.visited.insert(l);
            }
        }
        Effect::Discover { object, at } => {
            let o = ex(object).to_lowercase();
            if !o.is_empty() && !held_now.contains(&o) {
                m.set_discovered(&o, &ex(at));
            }
        }
        Effect::DiscoverList { list, at } => {
            let at = ex(at);
            for o in split_object_list(&ex(list)) {
                if !held_now.contains(&o) {
                    m.set_discovered(&o, &at);
                }
            }
        }
        Effect::Contents { location, list } => {
            let at = ex(location);
            let listed = split_object_list(&ex(list));
            let stale: Vec<String> = m
                .discovered
                .iter()
                .filter(|d| d.at == at && !listed.contains(&d.name))
                .map(|d| d.name.clone())
                .collect();
            for s in stale {
                m.forget_discovered(&s);
            }
            for o in listed {
                if held_now.contains(&o) {
                    continue;
                }
                release_object(m, &o);
                m.set_discovered(&o, &at);
            }
        }
        Effect::Inventory { list } => {
            let listed = split_object_list(&ex(list));
            let stale: Vec<String> = m
                .discovered
                .iter()
                .filter(|d| d.at == INVENTORY && !listed.contains(&d.name))
                .map(|d| d.name.clone())
                .collect();
            for s in stale {
                m.forget_discovered(&s);
            }
            for o in &listed {
                m.set_discovered(o, INVENTORY);
            }
            if m.holding.len() == 1 {
                if let Some(slot) = m.holding.values_mut().next() {
                    *slot = listed.first().cloned();
                }
            }
        }
        Effect::Carry { object } => {
            let o = ex(object).to_lowercase();
            if !o.is_empty() {
                m.set_discovered(&o, INVENTORY);
            }
        }
        Effect::Place { object, at } => {
            let o = ex(object).to_lowercase();
            if !o.is_empty() {
                release_object(m, &o);
                m.set_discovered(&o, &ex(at));
            }
        }
        Effect::Assert { .. } | Effect::Hold { .. } | Effect::Release { .. } => {}
    }
}

#[cfg(test)]
mod tests;
