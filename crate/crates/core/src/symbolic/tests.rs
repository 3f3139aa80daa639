use super::*;
use alloc::vec;

fn set(m: &SymbolicMemory) -> Vec<String> {
    m.sorted_predicates()
}

fn with(preds: &[&str]) -> SymbolicMemory {
    let t = SymbolicTracker::for_domain(Domain::Blocksworld);
    let mut m = t.init_memory("");
    for p in preds {
        m.predicates.insert(canonical_predicate(p).unwrap());
    }
    m
}

#[test]
fn blocksworld_init_from_observation() {
    let t = SymbolicTracker::for_domain(Domain::Blocksworld);
    let m = t.init_memory("b1 is on the table. b1 is clear. Robot arm is empty.");
    assert_eq!(set(&m), ["arm_empty", "clear(b1)", "on_table(b1)"]);
    assert_eq!(m.holding.get("arm"), Some(&None));
    assert_eq!(m.step, 0);
}

#[test]
fn vacuous_observation_changes_nothing_but_step() {
    for d in [Domain::Blocksworld, Domain::Gripper, Domain::Adventure, Domain::Household] {
        let t = SymbolicTracker::for_domain(d);
        let m = t.init_memory("");
        assert!(m.predicates.is_empty(), "{d:?}");
        let n = t.update_memory(&m, "", None);
        assert_eq!(n.step, 1);
        assert_eq!(n.predicates, m.predicates);
    }
    let t = SymbolicTracker::for_domain(Domain::Blocksworld);
    let m = with(&["on(b1,b2)", "clear(b1)"]);
    let n = t.update_memory(&m, "", Some("look"));
    assert_eq!(set(&n), set(&m));
}

#[test]
fn holding_retracts_old_position() {
    // Hand trace: mentioned = {b1 (held), b2 (clear)}; b1 held -> clear(b1),
    // no position; b2 -> clear(b2), no position; old facts about b1/b2 gone.
    let t = SymbolicTracker::for_domain(Domain::Blocksworld);
    let m = with(&["on(b1,b2)", "clear(b1)"]);
    let n = t.update_memory(&m, "You are holding b1. b2 is clear.", Some("unstack(b1,b2)"));
    assert_eq!(n.holding.get("arm"), Some(&Some("b1".into())));
    assert_eq!(set(&n), ["arm_not_empty", "clear(b1)", "clear(b2)"]);
    assert!(n.check_invariants().is_ok());
}

#[test]
fn base_block_gains_not_clear() {
    let t = SymbolicTracker::for_domain(Domain::Blocksworld);
    let m = with(&["arm_empty"]);
    let n = t.update_memory(
        &m,
        "b1 is on b2. b2 is on the table. b1 is clear. Robot arm is empty.",
        None,
    );
    assert_eq!(
        set(&n),
        ["arm_empty", "clear(b1)", "not_clear(b2)", "on(b1,b2)", "on_table(b2)"]
    );
}

#[test]
fn not_clear_sentence() {
    let t = SymbolicTracker::for_domain(Domain::Blocksworld);
    let m = t.init_memory("b3 is not clear");
    assert!(m.has("not_clear(b3)"));
    assert!(!m.has("clear(b3)"));
}

#[test]
fn unmentioned_blocks_persist() {
    let t = SymbolicTracker::for_domain(Domain::Blocksworld);
    let m = with(&["on(b4,b5)", "clear(b4)", "arm_empty"]);
    let n = t.update_memory(&m, "You are holding b1.", None);
    assert!(n.has("on(b4,b5)") && n.has("clear(b4)"));
    assert!(n.has("arm_not_empty") && !n.has("arm_empty"));
}

#[test]
fn held_block_carried_forward() {
    let t = SymbolicTracker::for_domain(Domain::Blocksworld);
    let m = t.init_memory("You are holding b2.");
    let n = t.update_memory(&m, "b1 is on the table.", None);
    assert_eq!(n.holding.get("arm"), Some(&Some("b2".into())));
    assert!(n.has("arm_not_empty"));
    assert!(n.has("clear(b2)"));
}

#[test]
fn repeated_full_observation_is_idempotent() {
    let t = SymbolicTracker::for_domain(Domain::Blocksworld);
    let obs = "Robot arm is empty. b1 is on b2. b1 is clear. b2 is on the table. b2 is not clear.";
    let once = t.update_memory(&with(&["on(b2,b1)"]), obs, None);
    let twice = t.update_memory(&once, obs, None);
    assert_eq!(once.predicates, twice.predicates);
}

#[test]
fn gripper_rules() {
    let t = SymbolicTracker::for_domain(Domain::Gripper);
    let m = t.init_memory("You are in room1. Ball1 is in room1.");
    assert_eq!(m.agent_location.as_deref(), Some("room1"));
    assert_eq!(set(&m), ["at(ball1,room1)"]);

    let n = t.update_memory(&m, "You picked up ball1 with the left gripper.", None);
    assert_eq!(n.holding.get("left"), Some(&Some("ball1".into())));
    assert!(n.predicates.is_empty());

    let n = t.update_memory(&n, "Gripper left is free.", None);
    assert_eq!(n.holding.get("left"), Some(&None));

    let n = t.update_memory(
        &n,
        "You moved from room1 to room2. You are in room2. Ball1 is in room2.",
        None,
    );
    assert_eq!(n.agent_location.as_deref(), Some("room2"));
    assert_eq!(set(&n), ["at(ball1,room2)"]);
}

#[test]
fn gripper_holding_wins_over_position() {
    let t = SymbolicTracker::for_domain(Domain::Gripper);
    let m = t.init_memory("Ball2 is in room1. Gripper right is carrying ball2.");
    assert_eq!(m.holding.get("right"), Some(&Some("ball2".into())));
    assert!(m.predicates.is_empty());
    assert!(m.check_invariants().is_ok());
}

#[test]
fn gripper_drop_places_ball() {
    let t = SymbolicTracker::for_domain(Domain::Gripper);
    let m = t.init_memory("Gripper left is carrying ball1.");
    let n = t.update_memory(&m, "You dropped ball1 in room2 from the left gripper.", None);
    assert_eq!(n.holding.get("left"), Some(&None));
    assert!(n.has("at(ball1,room2)"));
}

#[test]
fn adventure_tracks_visits_and_objects() {
    let t = SymbolicTracker::for_domain(Domain::Adventure);
    let m = t.init_memory("You are in the Kitchen. There is a kitchen table here.");
    assert!(m.visited.contains("Kitchen"));
    assert_eq!(m.discovered_at("kitchen table"), Some("Kitchen"));
    let n = t.update_memory(&m, "You take the brown sack.", Some("take brown sack"));
    assert_eq!(n.discovered_at("brown sack"), Some(INVENTORY));
    let s = n.planning_summary();
    assert!(s.contains("Location: at Kitchen"), "{s}");
    assert!(s.contains("- Obj: brown sack"));
    assert!(s.contains("- Loc: Kitchen"));
    let n = t.update_memory(&n, "You drop the brown sack.", None);
    assert_eq!(n.discovered_at("brown sack"), Some("Kitchen"));
}

#[test]
fn household_contents_and_holding() {
    let t = SymbolicTracker::for_domain(Domain::Household);
    let m = t.init_memory(
        "You are in the middle of a room. Looking quickly around you, you see a countertop 1, a toilet 1, and a garbagecan 1.",
    );
    assert_eq!(m.discovered_at("toilet 1"), Some("room"));
    let m = t.update_memory(
        &m,
        "You arrive at countertop 1. On the countertop 1, you see a soapbottle 1, and a candle 1.",
        None,
    );
    let m = t.update_memory(&m, "You pick up the soapbottle 1 from the countertop 1.", None);
    assert_eq!(m.holding.get("hand"), Some(&Some("soapbottle 1".into())));
    let m = t.update_memory(
        &m,
        "You arrive at toilet 1. On the toilet 1, you see a soapbar 1, and a soapbar 2.",
        None,
    );
    let s = m.planning_summary();
    assert!(s.contains("- toilet 1: contains=[soapbar 1, soapbar 2]"), "{s}");
    assert!(s.contains("- countertop 1: contains=[candle 1]"), "{s}");
    let m = t.update_memory(&m, "You put the soapbottle 1 in/on the toilet 1.", None);
    assert_eq!(m.holding.get("hand"), Some(&None));
    let m = t.update_memory(&m, "You pick up the soapbar 2 from the toilet 1.", None);
    let s = m.planning_summary();
    assert!(s.contains("- toilet 1: contains=[soapbar 1, soapbottle 1]"), "{s}");
    assert!(s.contains("Holding") || s.contains("- Obj: soapbar 2"));
}

#[test]
fn summary_format() {
    let t = SymbolicTracker::for_domain(Domain::Blocksworld);
    let m = t.init_memory("");
    let s = m.planning_summary();
    assert_eq!(
        s,
        "### BLOCKSWORLD Memory Summary (Step 0) ###\nHolding: {'arm': None}\nState:\n  (None)\n### END SUMMARY ###"
    );
    let m = with(&["clear(b1)", "arm_empty"]);
    let s = m.planning_summary();
    let a = s.find("arm_empty").unwrap();
    let c = s.find("clear(b1)").unwrap();
    assert!(a < c);
    assert_eq!(s, m.clone().planning_summary());
}

#[test]
fn summary_shows_agent_location() {
    let t = SymbolicTracker::for_domain(Domain::Gripper);
    let m = t.init_memory("You are in room2.");
    assert!(m.planning_summary().contains("Agent Location: room2"));
    assert!(m.planning_summary().contains("Holding: {'left': None, 'right': None}"));
}

#[test]
fn custom_ruleset_from_json() {
    let json = r#"{
        "format_version": 1,
        "domain_name": "lights",
        "policy": {"kind": "retract_mentioned"},
        "patterns": [
            {"match": "(?i)lamp (\\w+) is (on|off)", "captures": ["lamp", "state"],
             "effects": [{"op": "assert", "predicate": "lamp($1,$2)"}]}
        ]
    }"#;
    let t = SymbolicTracker::new(DomainRuleset::from_json(json).unwrap()).unwrap();
    let m = t.init_memory("Lamp A is on. Lamp B is off.");
    assert_eq!(set(&m), ["lamp(a,on)", "lamp(b,off)"]);
    let n = t.update_memory(&m, "lamp a is off", None);
    assert_eq!(set(&n), ["lamp(a,off)", "lamp(b,off)"]);
}

#[test]
fn bundled_rulesets_are_listed_in_order() {
    let rs = blocksworld_ruleset();
    assert_eq!(rs.patterns.len(), 6);
    assert_eq!(rs.patterns[0].pattern, "You are holding (b\\d+)");
    assert_eq!(rs.policy, ConflictPolicy::BlocksRebuild);
    assert_eq!(vec!["arm".to_string()], rs.manipulators);
}
