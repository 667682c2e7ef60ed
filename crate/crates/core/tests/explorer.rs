mod common;

use common::{isomorphic, scenario, uid, LOWE_SHAPE};
use nslab::crypto::check_refinement;
use nslab::explorer::{check_lemma_suite, explore, successors, SearchOutcome};
use nslab::model::GlobalState;
use nslab::run::run_abstract;
use nslab::world::World;
use nslab::{Scenario, SpecId};
use std::collections::HashSet;

fn parse(text: &str) -> Scenario {
    Scenario::parse(text).unwrap()
}

#[test]
fn ns_search_rediscovers_lowe() {
    let s = scenario("ns-search");
    let r = explore::<GlobalState>(&s, &[SpecId::PostNs], 1).unwrap();
    assert_eq!(r.outcome, SearchOutcome::Counterexample);
    let t = r.trace.as_ref().unwrap();
    let run = nslab::trace::replay::<GlobalState>(t).unwrap().unwrap();
    let fin = run.worlds.last().unwrap().medium.clone();
    assert!(
        isomorphic(fin.history(), &LOWE_SHAPE),
        "{:?}",
        t.actions().collect::<Vec<_>>()
    );
    let v = &r.verdicts[0];
    assert!(v.has("mutual-partner") && v.has("secrecy"));
    // the intruder never edits a conforming user's record
    assert_eq!(v.rely_broken, None);
}

#[test]
fn nsl_search_holds_and_layering_is_clean() {
    let s = scenario("nsl-search");
    let r = explore::<GlobalState>(&s, &[SpecId::PostNs, SpecId::NslFt], 1).unwrap();
    assert_eq!(r.outcome, SearchOutcome::HoldsWithinBounds);
    assert!(r.layering.checked > 0);
    assert_eq!(r.layering.violations, 0);
}

#[test]
fn worker_count_does_not_change_the_result() {
    for name in ["ns-search", "nsl-search"] {
        let s = scenario(name);
        let one = explore::<GlobalState>(&s, &[SpecId::PostNs], 1).unwrap();
        for workers in [2, 4] {
            let many = explore::<GlobalState>(&s, &[SpecId::PostNs], workers).unwrap();
            assert_eq!(one.states, many.states, "{name} with {workers} workers");
            assert_eq!(one.outcome, many.outcome);
            assert_eq!(one.counterexample, many.counterexample);
            assert_eq!(
                one.trace.as_ref().map(|t| t.render()),
                many.trace.as_ref().map(|t| t.render())
            );
        }
    }
}

#[test]
fn honest_only_exploration_never_violates_post_ns() {
    for variant in ["ns", "nsl"] {
        let s = parse(&format!(
            "nslab-scenario 1\nname honest-any\nlevel abstract\n\
             user A conforming\nuser B conforming\nuser C conforming\n\
             role A sender peer=any variant={variant}\nrole B receiver variant={variant}\n\
             role C receiver variant={variant}\nintruder none\nbounds max_steps=40\n"
        ));
        let r = explore::<GlobalState>(&s, &[SpecId::PostNs, SpecId::Inv], 2).unwrap();
        assert_eq!(
            r.outcome,
            SearchOutcome::HoldsWithinBounds,
            "{variant}: {:?}",
            r.verdicts
        );
        assert!(r.states > 20, "{variant}: only {} states", r.states);
    }
}

#[test]
fn state_budget_makes_the_search_inconclusive() {
    let mut s = scenario("nsl-search");
    s.bounds.max_states = Some(5);
    let r = explore::<GlobalState>(&s, &[SpecId::PostNs], 1).unwrap();
    assert_eq!(r.outcome, SearchOutcome::Inconclusive);
}

#[test]
fn spawns_respect_the_session_bound() {
    let text = "nslab-scenario 1\nname spawn\nlevel abstract\n\
                user A conforming\nuser B conforming\n\
                role A sender peer=B variant=ns\nrole B receiver variant=ns\nintruder none\n";
    for cap in [1usize, 2, 3] {
        let mut s = parse(text);
        s.bounds.max_sessions_per_user = cap;
        let init = World::<GlobalState>::init(&s).unwrap();
        let mut seen = HashSet::from([init.clone()]);
        let mut stack = vec![init];
        let mut most = 0;
        while let Some(w) = stack.pop() {
            most = most.max(w.machines.iter().filter(|m| m.owner() == &uid("B")).count());
            for ev in successors(&w, &s) {
                let (next, _) = w.apply(&ev).unwrap();
                if seen.insert(next.clone()) {
                    stack.push(next);
                }
            }
        }
        assert_eq!(most, cap, "cap {cap}");
        let r = explore::<GlobalState>(&s, &[SpecId::PostNs], 1).unwrap();
        assert!(r.holds());
    }
}

#[test]
fn lemma_suite_holds_on_scripted_runs() {
    for name in ["honest-ns", "honest-nsl", "lowe-on-ns", "lowe-on-nsl"] {
        let s = scenario(name);
        let r = run_abstract(&s, s.bounds.max_steps).unwrap();
        let suite = check_lemma_suite(&r.worlds, &r.records).unwrap();
        assert!(
            suite.obligations_hold(),
            "{name}: {:?}",
            suite.failed().collect::<Vec<_>>()
        );
        let rely = &suite.relies[0];
        assert_eq!(rely.holds, name.starts_with("honest"), "{name}: {rely}");
    }
}

#[test]
fn shrinking_knowledge_breaks_dyn_inv() {
    let s = scenario("honest-ns");
    let r = run_abstract(&s, s.bounds.max_steps).unwrap();
    let mut worlds = r.worlds.clone();
    let last = worlds.len() - 1;
    worlds[last].medium = worlds[last]
        .medium
        .with_user(&uid("B"), |rec| {
            for k in rec.knows.values_mut() {
                k.clear();
            }
        })
        .unwrap();
    let suite = check_lemma_suite(&worlds, &r.records).unwrap();
    let failed: Vec<_> = suite.failed().map(|f| f.name.as_str()).collect();
    assert!(failed.contains(&"dyn-inv"), "{failed:?}");
}

#[test]
fn rewritten_history_breaks_dyn_inv() {
    let s = scenario("lowe-on-ns");
    let r = run_abstract(&s, s.bounds.max_steps).unwrap();
    let states = r.states().unwrap();
    let before = &states[3];
    let after = GlobalState::from_parts(
        states[4].users().clone(),
        states[4].history()[1..].to_vec(),
        states[4].pkeys().clone(),
    );
    let d = nslab::invariants::dyn_inv(before, &after);
    assert!(!d.holds);
}

#[test]
fn shared_public_key_breaks_refinement() {
    let s = parse(
        "nslab-scenario 1\nname shared-key\nlevel concrete\n\
         user A conforming\nuser B conforming\nuser C rogue\n\
         role A sender peer=B variant=ns\nrole B receiver variant=ns\n\
         intruder lowe-script me=C a=A b=B\npkey C as B\n",
    );
    let v = check_refinement(&s).unwrap();
    assert!(!v.holds);
    let f = &v.failures[0];
    assert_eq!(f.conjunct, "no-read-others");
    assert!(f.detail.contains("(C,n1)"), "{}", f.detail);
}

#[test]
fn refinement_holds_for_scripted_scenarios() {
    for name in ["honest-ns", "honest-nsl", "lowe-on-ns", "lowe-on-nsl"] {
        let v = check_refinement(&scenario(name)).unwrap();
        assert!(v.holds, "{name}: {:?}", v.failures);
    }
}
