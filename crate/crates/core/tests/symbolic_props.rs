use std::collections::{BTreeSet, VecDeque};

use proptest::prelude::*;
use wmplan_core::env::blocksworld::BlocksState;
use wmplan_core::symbolic::SymbolicTracker;
use wmplan_core::Domain;

fn truth(s: &BlocksState) -> Vec<String> {
    let mut v: Vec<String> = s.predicates().iter().map(|p| p.to_string()).collect();
    v.sort();
    v
}

fn reachable(n: usize) -> Vec<BlocksState> {
    let start = BlocksState::all_on_table(n);
    let mut seen = BTreeSet::from([start.clone()]);
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        for a in s.applicable() {
            let next = s.apply(a).unwrap();
            if seen.insert(next.clone()) {
                queue.push_back(next);
            }
        }
    }
    seen.into_iter().collect()
}

#[test]
fn every_transition_up_to_three_blocks() {
    let tracker = SymbolicTracker::for_domain(Domain::Blocksworld);
    for n in 1..=3 {
        for s in reachable(n) {
            let m = tracker.init_memory(&s.render());
            assert_eq!(m.sorted_predicates(), truth(&s), "init {s:?}");
            for a in s.applicable() {
                let next = s.apply(a).unwrap();
                let m2 = tracker.update_memory(&m, &next.render(), Some(&a.to_string()));
                assert_eq!(m2.sorted_predicates(), truth(&next), "{s:?} --{a}-->");
            }
        }
    }
}

#[test]
fn reachable_counts() {
    // towers of n labelled blocks, plus one block in hand
    assert_eq!(reachable(1).len(), 2);
    assert_eq!(reachable(2).len(), 5);
    assert_eq!(reachable(3).len(), 22);
}

proptest! {
    #[test]
    fn walks_keep_memory_exact(picks in proptest::collection::vec(any::<u16>(), 1..20)) {
        let tracker = SymbolicTracker::for_domain(Domain::Blocksworld);
        let mut s = BlocksState::all_on_table(6);
        let mut m = tracker.init_memory(&s.render());
        for p in picks {
            let acts = s.applicable();
            let a = acts[p as usize % acts.len()];
            s = s.apply(a).unwrap();
            m = tracker.update_memory(&m, &s.render(), None);
            prop_assert_eq!(m.sorted_predicates(), truth(&s));
        }
    }

    #[test]
    fn invalid_action_message_changes_nothing(picks in proptest::collection::vec(any::<u16>(), 0..10)) {
        let tracker = SymbolicTracker::for_domain(Domain::Blocksworld);
        let mut s = BlocksState::all_on_table(4);
        for p in picks {
            let acts = s.applicable();
            s = s.apply(acts[p as usize % acts.len()]).unwrap();
        }
        let m = tracker.init_memory(&s.render());
        let m2 = tracker.update_memory(&m, wmplan_core::INVALID_ACTION_MESSAGE, None);
        prop_assert_eq!(m2.sorted_predicates(), m.sorted_predicates());
        prop_assert_eq!(m2.step, m.step + 1);
    }
}
