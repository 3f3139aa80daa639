use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::domain::{SummaryStyle, SymbolicMemory, INVENTORY};

const END_SUMMARY: &str = "### END SUMMARY ###";

impl SymbolicMemory {
    /// Deterministic multi-line summary ending with `### END SUMMARY ###`.
    pub fn planning_summary(&self) -> String {
        let mut lines: Vec<String> = Vec::new();
        lines.push(format!(
            "### {} Memory Summary (Step {}) ###",
            self.domain_name.to_uppercase(),
            self.step
        ));
        match self.style {
            SummaryStyle::Predicates => {
                if let Some(loc) = &self.agent_location {
                    lines.push(format!("Agent Location: {loc}"));
                }
                lines.push(format!("Holding: {}", self.holding_repr()));
            }
            SummaryStyle::World | SummaryStyle::WorldWithContents => {
                self.world_sections(&mut lines);
            }
        }
        lines.push("State:".into());
        let preds = self.sorted_predicates();
        if preds.is_empty() {
            lines.push("  (None)".into());
        }
        for p in preds {
            lines.push(format!("  - {p}"));
        }
        lines.push(END_SUMMARY.into());
        lines.join("\n")
    }

    /// `{'arm': 'b1'}` / `{'arm': None}`.
    fn holding_repr(&self) -> String {
        let parts: Vec<String> = self
            .holding
            .iter()
            .map(|(m, h)| match h {
                Some(o) => format!("'{m}': '{o}'"),
                None => format!("'{m}': None"),
            })
            .collect();
        format!("{{{}}}", parts.join(", "))
    }

    fn world_sections(&self, lines: &mut Vec<String>) {
        lines.push("[Agent]".into());
        match &self.agent_location {
            Some(loc) => lines.push(format!("Location: at {loc}")),
            None => lines.push("Location: (unknown)".into()),
        }
        lines.push("Inventory:".into());
        let inv = self.inventory();
        if inv.is_empty() {
            lines.push("  (None)".into());
        }
        for o in inv {
            lines.push(format!("- Obj: {o}"));
        }
        if !self.visited.is_empty() {
            lines.push(String::new());
            lines.push("[Visited Locations]".into());
            for l in &self.visited {
                lines.push(format!("- Loc: {l}"));
            }
        }
        if !self.discovered.is_empty() {
            lines.push(String::new());
            lines.push("[Discovered Objects]".into());
            for d in &self.discovered {
                lines.push(format!("- Obj: {} (at: {})", d.name, d.at));
            }
        }
        if self.style == SummaryStyle::WorldWithContents && !self.visited.is_empty() {
            let mut contents: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
            for v in &self.visited {
                contents.insert(v.as_str(), Vec::new());
            }
            for d in &self.discovered {
                if d.at != INVENTORY {
                    if let Some(list) = contents.get_mut(d.at.as_str()) {
                        list.push(d.name.as_str());
                    }
                }
            }
            lines.push(String::new());
            lines.push("[Receptacles]".into());
            for (loc, mut objs) in contents {
                objs.sort_unstable();
                lines.push(format!("- {loc}: contains=[{}]", objs.join(", ")));
            }
        }
        lines.push(String::new());
    }
}
