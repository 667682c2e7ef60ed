//! Exit criteria. Each test prints one `PASS`/`FAIL` line, bypassing the
//! harness's output capture, then asserts.

mod common;

use std::io::Write;
use std::time::{Duration, Instant};

use common::{capture, golden_path, isomorphic, scenario, scn_path, uid, LOWE_SHAPE};
use nslab::cli::{cmd_explore, cmd_replay, cmd_run, Options, EXIT_OK};
use nslab::crypto::{check_dec_enc, check_refinement, KeyRegistry};
use nslab::explorer::{explore, ExploreReport, SearchOutcome};
use nslab::invariants::{dyn_inv, no_forge, no_leaks, no_read_others, unique_nonces};
use nslab::model::{u_hist, GlobalState, Item, Nonce};
use nslab::roles::Status;
use nslab::run::{run_abstract, run_concrete};
use nslab::scenario::Level;
use nslab::specs::{check_post_ns, eval_nsl_ft};
use nslab::trace::{replay, Trace};
use nslab::SpecId;

const HONEST_RUNTIME: Duration = Duration::from_secs(1);
const SEARCH_RUNTIME: Duration = Duration::from_secs(60);
const REFINEMENT_RUNTIME: Duration = Duration::from_secs(1);
const SEARCH_MAX_STEPS: usize = 14;
const SEARCH_MAX_CONTENT: usize = 2;
const SEARCH_INVENTS: usize = 0;
const KEY_UNIVERSE: usize = 16;

fn verdict(n: u8, title: &str, ok: bool, detail: &str) {
    let line = format!(
        "{} criterion {n} ({title}): {detail}\n",
        if ok { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(ok, "criterion {n} failed: {detail}");
}

fn trace_of(name: &str, opts: Options) -> (i32, String) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.trace");
    let opts = Options {
        trace_out: Some(out.clone()),
        ..opts
    };
    let (code, _) = capture(|b| cmd_run(&scn_path(name), &opts, b));
    (code, std::fs::read_to_string(out).unwrap())
}

fn search(name: &str) -> (ExploreReport, Duration) {
    let s = scenario(name);
    assert!(s.bounds.max_steps <= SEARCH_MAX_STEPS);
    assert!(s.bounds.max_content_len <= SEARCH_MAX_CONTENT);
    assert_eq!(s.bounds.max_intruder_invents, SEARCH_INVENTS);
    let t = Instant::now();
    let r = explore::<GlobalState>(&s, &[SpecId::PostNs], 1).unwrap();
    (r, t.elapsed())
}

/// Histories of every trace the first four criteria produce.
fn criterion_traces() -> Vec<(String, Vec<GlobalState>)> {
    let mut out = Vec::new();
    for name in ["honest-ns", "honest-nsl", "lowe-on-ns", "lowe-on-nsl"] {
        let s = scenario(name);
        out.push((
            name.to_string(),
            run_abstract(&s, s.bounds.max_steps).unwrap().states().unwrap(),
        ));
    }
    let (r, _) = search("ns-search");
    let t = r.trace.unwrap();
    let rep = replay::<GlobalState>(&t).unwrap().unwrap();
    out.push((
        "ns-search".into(),
        rep.worlds.iter().map(|w| w.medium.clone()).collect(),
    ));
    out
}

#[test]
fn criterion_1_honest_ns() {
    let s = scenario("honest-ns");
    let t = Instant::now();
    let r = run_abstract(&s, s.bounds.max_steps).unwrap();
    let elapsed = t.elapsed();
    let states = r.states().unwrap();
    let fin = states.last().unwrap();
    let invents = fin.history().iter().filter(|a| a.as_invent().is_some()).count();
    let msgs: Vec<_> = fin.history().iter().filter_map(|a| a.as_msg()).collect();
    let (a, b) = (uid("A"), uid("B"));
    let shapes = msgs.len() == 3
        && msgs[0].rec() == &b
        && matches!(msgs[0].content(), [Item::Uid(u), Item::Nonce(_)] if u == &a)
        && msgs[1].rec() == &a
        && matches!(msgs[1].content(), [Item::Nonce(_), Item::Nonce(_)])
        && msgs[2].rec() == &b
        && matches!(msgs[2].content(), [Item::Nonce(_)]);
    let sf = fin.user(&a).unwrap().sessions().into_iter().next().unwrap();
    let st = fin.user(&b).unwrap().sessions().into_iter().next().unwrap();
    let post = check_post_ns(&states[0], fin, &a, &b, &sf, &st).unwrap();
    let ok = invents == 2 && shapes && post.holds && elapsed < HONEST_RUNTIME;
    verdict(
        1,
        "honest NS",
        ok,
        &format!(
            "{invents} invents, {} msgs, shapes {shapes}, post-ns {}, {elapsed:?} < {HONEST_RUNTIME:?}",
            msgs.len(),
            post.holds
        ),
    );
}

#[test]
fn criterion_2_lowe_attack() {
    let (_, text) = trace_of("lowe-on-ns", Options::default());
    let golden = std::fs::read_to_string(golden_path("lowe-on-ns")).unwrap();
    let s = scenario("lowe-on-ns");
    let r = run_abstract(&s, s.bounds.max_steps).unwrap();
    let fin = r.final_state().unwrap();
    let b = fin.user(&uid("B")).unwrap();
    let bs = b.sessions().into_iter().next().unwrap();
    let intruder_knows = fin.user(&uid("I")).unwrap().all_known();
    let want: std::collections::BTreeSet<Nonce> = [Nonce::new(1), Nonce::new(2)].into();
    let mut rs = r;
    let v = rs.check(&[SpecId::PostNs]).unwrap().remove(0);
    let ok = text == golden
        && isomorphic(fin.history(), &LOWE_SHAPE)
        && b.is_complete(&bs)
        && b.partner(&bs) == Some(&uid("A"))
        && intruder_knows == want
        && v.has("secrecy")
        && v.has("mutual-partner");
    verdict(
        2,
        "Lowe attack",
        ok,
        &format!(
            "golden {}, a1/d1/b1/a2/d3 {}, B complete with A {}, intruder knows {:?}, post-ns failures {:?}",
            text == golden,
            isomorphic(fin.history(), &LOWE_SHAPE),
            b.is_complete(&bs) && b.partner(&bs) == Some(&uid("A")),
            intruder_knows,
            v.failures.iter().map(|f| f.conjunct.as_str()).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn criterion_3_lowe_fix() {
    let (_, text) = trace_of("lowe-on-nsl", Options::default());
    let golden = std::fs::read_to_string(golden_path("lowe-on-nsl")).unwrap();
    let s = scenario("lowe-on-nsl");
    let r = run_abstract(&s, s.bounds.max_steps).unwrap();
    let sender = &r.world.machines[0];
    let abort = r.records.iter().find_map(|x| x.abort.clone()).unwrap_or_default();
    let aborted_at = r.records.iter().find(|x| x.abort.is_some()).map(|x| x.stmt.clone());
    let states = r.states().unwrap();
    let fin = states.last().unwrap();
    let a = fin.user(&uid("A")).unwrap();
    let a_done = a.sessions().iter().any(|s| a.is_complete(s));
    let ft = eval_nsl_ft(&states[0], fin);
    let ok = text == golden
        && sender.status() == Status::Aborted
        && aborted_at.as_deref() == Some("rcv-b1")
        && abort.starts_with("expected [I,")
        && !a_done
        && ft.holds;
    verdict(
        3,
        "Lowe fix",
        ok,
        &format!(
            "golden {}, sender {:?} at {aborted_at:?} ({abort}), A complete {a_done}, nsl-ft {}",
            text == golden,
            sender.status(),
            ft.holds
        ),
    );
}

#[test]
fn criterion_4_rediscovery() {
    let (ns, t_ns) = search("ns-search");
    let (ns_again, _) = search("ns-search");
    let (nsl, t_nsl) = search("nsl-search");
    let (nsl_again, _) = search("nsl-search");
    let hist = ns.trace.as_ref().map(|t| {
        replay::<GlobalState>(t)
            .unwrap()
            .unwrap()
            .worlds
            .last()
            .unwrap()
            .medium
            .clone()
    });
    let iso = hist.as_ref().is_some_and(|h| isomorphic(h.history(), &LOWE_SHAPE));
    let ok = ns.outcome == SearchOutcome::Counterexample
        && iso
        && nsl.outcome == SearchOutcome::HoldsWithinBounds
        && ns.states == ns_again.states
        && nsl.states == nsl_again.states
        && t_ns < SEARCH_RUNTIME
        && t_nsl < SEARCH_RUNTIME;
    verdict(
        4,
        "rediscovery",
        ok,
        &format!(
            "NS {:?} after {} states in {t_ns:?}, Lowe-isomorphic {iso}; NSL {:?} after {} states in {t_nsl:?}",
            ns.outcome, ns.states, nsl.outcome, nsl.states
        ),
    );
}

#[test]
fn criterion_5_invariant_suite() {
    let mut violations = Vec::new();
    let mut checks = 0usize;
    for (name, states) in criterion_traces() {
        for (i, pair) in states.windows(2).enumerate() {
            checks += 1;
            let r = dyn_inv(&pair[0], &pair[1]);
            if !r.holds {
                violations.push(format!("{name} step {}: {r}", i + 1));
            }
        }
        for (i, st) in states.iter().enumerate() {
            for r in [unique_nonces(st.history()), no_read_others(st)] {
                checks += 1;
                if !r.holds {
                    violations.push(format!("{name} state {i}: {r}"));
                }
            }
        }
        let fin = states.last().unwrap();
        for (u, rec) in fin.users() {
            if !rec.conforms() {
                continue;
            }
            let mine = u_hist(fin.history(), u);
            for k in 1..=mine.len() {
                for r in [no_leaks(&mine[..k]), no_forge(&mine[..k])] {
                    checks += 1;
                    if !r.holds {
                        violations.push(format!("{name} {u} prefix {k}: {r}"));
                    }
                }
            }
        }
    }
    let mut firsts: Vec<&str> = Vec::new();
    for v in &violations {
        let key = v.split(" prefix").next().unwrap();
        if !firsts.iter().any(|f| f.starts_with(key)) {
            firsts.push(v);
        }
    }
    verdict(
        5,
        "invariant suite",
        violations.is_empty(),
        &format!(
            "{} violations in {checks} checks; first per user: {}",
            violations.len(),
            firsts.join("; ")
        ),
    );
}

#[test]
fn criterion_6_layering() {
    let (r, _) = search("nsl-search");
    let l = &r.layering;
    let ok = r.holds() && l.checked > 0 && l.violations == 0;
    verdict(
        6,
        "layering",
        ok,
        &format!(
            "{} completed conforming pairs checked, {} post-ns violations",
            l.checked, l.violations
        ),
    );
}

#[test]
fn criterion_7_refinement() {
    let t = Instant::now();
    let mut details = Vec::new();
    let mut ok = true;
    for name in ["honest-ns", "lowe-on-ns", "lowe-on-nsl"] {
        let mut s = scenario(name);
        s.level = Level::Concrete;
        let v = check_refinement(&s).unwrap();
        let a = run_abstract(&s, s.bounds.max_steps).unwrap();
        let c = run_concrete(&s, s.bounds.max_steps).unwrap();
        let same_steps = a.records.len() == c.records.len()
            && a.records
                .iter()
                .zip(&c.records)
                .all(|(x, y)| (&x.actor, &x.stmt, &x.abort) == (&y.actor, &y.stmt, &y.abort));
        let same_history = c.final_state().unwrap().history() == a.final_state().unwrap().history();
        ok &= v.holds && same_steps && same_history;
        details.push(format!("{name} {}", v.holds && same_steps && same_history));
    }
    let four = GlobalState::new(["A", "B", "C", "D"].map(|u| (uid(u), true)));
    let reg = KeyRegistry::of(&four);
    let payloads = [
        vec![Item::Nonce(Nonce::new(1))],
        vec![Item::Uid(uid("A")), Item::Nonce(Nonce::new(1))],
        vec![
            Item::Uid(uid("B")),
            Item::Nonce(Nonce::new(1)),
            Item::Nonce(Nonce::new(2)),
        ],
    ];
    for p in &payloads {
        let (r, opened, total) = check_dec_enc(&reg, p).unwrap();
        ok &= r.holds && total == KEY_UNIVERSE && opened == 4;
    }
    let elapsed = t.elapsed();
    ok &= elapsed < REFINEMENT_RUNTIME;
    verdict(
        7,
        "refinement",
        ok,
        &format!(
            "{}; dec-enc-prop over {KEY_UNIVERSE} key pairs; {elapsed:?} < {REFINEMENT_RUNTIME:?}",
            details.join(", ")
        ),
    );
}

#[test]
fn criterion_8_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let mut produced = Vec::new();
    let mut identical = true;
    for (name, level) in [
        ("honest-ns", Level::Abstract),
        ("lowe-on-ns", Level::Abstract),
        ("lowe-on-nsl", Level::Abstract),
        ("honest-ns", Level::Concrete),
        ("lowe-on-ns", Level::Concrete),
        ("lowe-on-nsl", Level::Concrete),
        ("ns-search", Level::Abstract),
    ] {
        let mut texts = Vec::new();
        for k in 0..2 {
            let out = dir.path().join(format!("{name}-{level}-{k}.trace"));
            let opts = Options {
                trace_out: Some(out.clone()),
                level: Some(level),
                ..Options::default()
            };
            capture(|b| {
                if name.ends_with("search") {
                    cmd_explore(&scn_path(name), &opts, b)
                } else {
                    cmd_run(&scn_path(name), &opts, b)
                }
            });
            texts.push(std::fs::read_to_string(&out).unwrap());
            produced.push(out);
        }
        identical &= texts[0] == texts[1];
    }
    let mut replay_fail = Vec::new();
    for p in &produced {
        let (code, out) = capture(|b| cmd_replay(p, b));
        if code != EXIT_OK {
            replay_fail.push(format!("{}: {}", p.display(), out.lines().next().unwrap_or("")));
        }
        Trace::parse(&std::fs::read_to_string(p).unwrap()).unwrap();
    }
    verdict(
        8,
        "determinism",
        identical && replay_fail.is_empty(),
        &format!(
            "{} traces, reruns byte-identical {identical}, replay failures {:?}",
            produced.len(),
            replay_fail
        ),
    );
}
