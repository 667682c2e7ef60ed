//! Bounded depth-first search over all interleavings of role-machine steps
//! and intruder moves, with spec checks at quiescent states and safety
//! checks at every state.
//!
//! Tie-break order at every node: machines by index (a sender with an open
//! partner fans out over the other users by name), then receiver spawns,
//! then intruder moves in [`crate::intruder::legal_moves`] order.
//!
//! The intruder only sends messages some machine is waiting for: the
//! recipient must have a machine at a `rcv` whose pattern the content fits,
//! and an identical message must not already be pending for it. Any other
//! send is either never consumed or can be postponed to the point where it
//! is consumed with the same effect on user records, since intruder
//! knowledge only grows.
//!
//! The search is split at the children of the initial state; each subtree
//! keeps its own visited set and subtrees may run on separate threads.
//! Results are merged in child order and stop at the first subtree holding
//! a counterexample, so counts and traces do not depend on the number of
//! workers.

use std::collections::{BTreeSet, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::error::Result;
use crate::intruder::IntruderMove;
use crate::invariants::{dyn_inv, inv_sigma, no_read_others, unique_nonces, PredicateReport};
use crate::medium::Medium;
use crate::model::{GlobalState, Uid};
use crate::roles::{matches_pattern, Status};
use crate::scenario::Scenario;
use crate::specs::{check_no_mods_to_others, eval_post_ns, evaluate, SpecId, SpecVerdict};
use crate::trace::Trace;
use crate::world::{Event, StepRecord, World};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SearchBounds {
    /// Depth limit: events along one path.
    pub max_steps: usize,
    pub max_intruder_invents: usize,
    pub max_content_len: usize,
    /// Role machines per user, counting spawned receivers.
    pub max_sessions_per_user: usize,
    /// Distinct states per root subtree before the search gives up.
    pub max_states: Option<usize>,
}

impl Default for SearchBounds {
    fn default() -> Self {
        SearchBounds {
            max_steps: 64,
            max_intruder_invents: 0,
            max_content_len: 2,
            max_sessions_per_user: 1,
            max_states: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchOutcome {
    HoldsWithinBounds,
    Counterexample,
    /// `max_states` was hit before the space was covered.
    Inconclusive,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LayeringStats {
    /// Quiescent states where two conforming users completed with each other.
    pub checked: usize,
    pub violations: usize,
    pub first_violation: Option<String>,
}

impl LayeringStats {
    fn merge(&mut self, other: &LayeringStats) {
        self.checked += other.checked;
        self.violations += other.violations;
        if self.first_violation.is_none() {
            self.first_violation.clone_from(&other.first_violation);
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExploreReport {
    pub outcome: SearchOutcome,
    /// Distinct states visited, the initial state included.
    pub states: usize,
    pub verdicts: Vec<SpecVerdict>,
    pub counterexample: Option<Vec<Event>>,
    pub trace: Option<Trace>,
    pub layering: LayeringStats,
}

impl ExploreReport {
    pub fn holds(&self) -> bool {
        self.outcome == SearchOutcome::HoldsWithinBounds
    }
}

struct Found {
    events: Vec<Event>,
    verdict: SpecVerdict,
}

struct Subtree<'a, M> {
    scenario: &'a Scenario,
    specs: &'a [SpecId],
    init: GlobalState,
    visited: HashSet<World<M>>,
    states: usize,
    budget_hit: bool,
    events: Vec<Event>,
    path: Vec<GlobalState>,
    env: Vec<bool>,
    layering: LayeringStats,
    found: Option<Found>,
}

impl<'a, M: Medium> Subtree<'a, M> {
    fn new(scenario: &'a Scenario, specs: &'a [SpecId], init: GlobalState) -> Self {
        Subtree {
            scenario,
            specs,
            path: vec![init.clone()],
            init,
            visited: HashSet::new(),
            states: 0,
            budget_hit: false,
            events: Vec::new(),
            env: Vec::new(),
            layering: LayeringStats::default(),
            found: None,
        }
    }

    fn stop(&self) -> bool {
        self.found.is_some() || self.budget_hit
    }

    fn fail(&mut self, verdict: SpecVerdict) {
        self.found = Some(Found {
            events: self.events.clone(),
            verdict,
        });
    }

    /// Visit `w`, reached by `self.events`, whose projection is the last
    /// element of `self.path`.
    fn visit(&mut self, w: &World<M>) -> Result<()> {
        self.states += 1;
        if self.scenario.bounds.max_states.is_some_and(|m| self.states > m) {
            self.budget_hit = true;
            return Ok(());
        }
        if w.machine_quiescent() {
            self.at_quiescent()?;
            if self.stop() {
                return Ok(());
            }
        }
        if self.events.len() >= self.scenario.bounds.max_steps {
            return Ok(());
        }
        for ev in successors(w, self.scenario) {
            let (next, _) = w.apply(&ev)?;
            if !self.visited.insert(next.clone()) {
                continue;
            }
            self.enter(&next, ev, w)?;
            if self.stop() {
                return Ok(());
            }
        }
        Ok(())
    }

    fn enter(&mut self, next: &World<M>, ev: Event, from: &World<M>) -> Result<()> {
        let env = is_environment(from, &ev);
        let state = next.medium.project()?;
        self.events.push(ev);
        self.env.push(env);
        self.path.push(state);
        if let Some(v) = self.safety() {
            self.fail(v);
        } else {
            self.visit(next)?;
        }
        self.events.pop();
        self.env.pop();
        self.path.pop();
        Ok(())
    }

    /// Safety predicates on the newest state and transition, plus the
    /// invariant spec when requested.
    fn safety(&self) -> Option<SpecVerdict> {
        let n = self.path.len();
        let (b, a) = (&self.path[n - 2], &self.path[n - 1]);
        for r in [dyn_inv(b, a), unique_nonces(a.history()), no_read_others(a)] {
            if !r.holds {
                return Some(SpecVerdict::new(
                    "safety",
                    vec![crate::specs::Failure {
                        conjunct: r.name,
                        detail: r.witness.unwrap_or_default(),
                    }],
                ));
            }
        }
        if self.specs.contains(&SpecId::Inv) {
            let r = inv_sigma(a);
            if !r.holds {
                return Some(evaluate(SpecId::Inv, &self.path[n - 1..], &[]));
            }
        }
        None
    }

    fn at_quiescent(&mut self) -> Result<()> {
        let fin = self.path.last().expect("path holds the initial state").clone();
        if completed_pair(&fin) {
            self.layering.checked += 1;
            let v = eval_post_ns(&self.init, &fin);
            if !v.holds {
                self.layering.violations += 1;
                if self.layering.first_violation.is_none() {
                    let f = &v.failures[0];
                    self.layering.first_violation = Some(format!("{}: {}", f.conjunct, f.detail));
                }
            }
        }
        for spec in self.specs {
            if *spec == SpecId::Inv {
                continue;
            }
            let v = evaluate(*spec, &self.path, &self.env);
            if !v.holds {
                self.fail(v);
                return Ok(());
            }
        }
        Ok(())
    }
}

/// Whether some conforming user completed a session with a conforming
/// partner that completed a session naming it back.
fn completed_pair(s: &GlobalState) -> bool {
    s.users().iter().any(|(y, rec)| {
        rec.conforms()
            && rec.complete.iter().any(|(sess, done)| {
                *done
                    && rec.partner(sess).is_some_and(|x| {
                        s.user(x).is_some_and(|xr| {
                            xr.conforms()
                                && xr
                                    .complete
                                    .iter()
                                    .any(|(t, d)| *d && t != sess && xr.partner(t) == Some(y))
                        })
                    })
            })
    })
}

/// Steps by anyone other than a conforming user's machine.
pub fn is_environment<M: Medium>(w: &World<M>, ev: &Event) -> bool {
    match ev {
        Event::Machine { index, .. } => {
            let owner = w.machines[*index].owner();
            !w.medium.users().get(owner).is_some_and(|r| r.conforms())
        }
        _ => true,
    }
}

/// Successor events in tie-break order, intruder moves pruned to sends
/// some machine is waiting for.
pub fn successors<M: Medium>(w: &World<M>, scenario: &Scenario) -> Vec<Event> {
    let mut out = w.machine_events();
    out.extend(w.spawn_events(&scenario.bounds));
    let Some(intruder) = &w.intruder else {
        return out;
    };
    if w.script_enabled() {
        out.push(Event::Script);
    }
    let me = intruder.me();
    let relevant = |rec: &Uid, content: &[crate::model::Item]| -> bool {
        if rec == me {
            return false;
        }
        let waiting = w.machines.iter().any(|m| {
            m.owner() == rec
                && !m.status().is_terminal()
                && m.waiting_for().is_some_and(|p| matches_pattern(content, p))
        });
        let pending = (0..w.medium.len())
            .any(|i| !w.inbox.is_consumed(rec, i) && w.medium.open(i, rec).is_some_and(|v| v.content == content));
        waiting && !pending
    };
    for mv in intruder.legal_moves(&w.medium) {
        let keep = match &mv {
            IntruderMove::InventNonce => true,
            IntruderMove::Compose { rec, content } => relevant(rec, content),
            IntruderMove::ReplayOpaque(idx) => w.medium.peek(*idx).is_some_and(|v| relevant(&v.rec, &v.content)),
        };
        if keep {
            out.push(Event::Intruder(mv));
        }
    }
    out
}

struct SubResult {
    states: usize,
    budget_hit: bool,
    layering: LayeringStats,
    found: Option<Found>,
}

fn run_subtree<M: Medium>(
    scenario: &Scenario,
    specs: &[SpecId],
    root: &World<M>,
    init: &GlobalState,
    ev: &Event,
) -> Result<SubResult> {
    let mut sub = Subtree::new(scenario, specs, init.clone());
    let (child, _) = root.apply(ev)?;
    sub.visited.insert(root.clone());
    sub.visited.insert(child.clone());
    sub.enter(&child, ev.clone(), root)?;
    Ok(SubResult {
        states: sub.states,
        budget_hit: sub.budget_hit,
        layering: sub.layering,
        found: sub.found,
    })
}

/// Explore `scenario` for the given specs using up to `workers` threads.
pub fn explore<M: Medium>(scenario: &Scenario, specs: &[SpecId], workers: usize) -> Result<ExploreReport> {
    let root: World<M> = World::init(scenario)?;
    let init = root.medium.project()?;
    // the initial state itself
    let mut top = Subtree::<M>::new(scenario, specs, init.clone());
    top.visited.insert(root.clone());
    top.states = 1;
    let mut report = ExploreReport {
        outcome: SearchOutcome::HoldsWithinBounds,
        states: 1,
        verdicts: Vec::new(),
        counterexample: None,
        trace: None,
        layering: LayeringStats::default(),
    };
    if root.machine_quiescent() {
        top.at_quiescent()?;
        report.layering = top.layering.clone();
        if let Some(f) = top.found.take() {
            return finish(scenario, specs, report, Some(f));
        }
    }
    if scenario.bounds.max_steps == 0 {
        return finish(scenario, specs, report, None);
    }
    let children = successors(&root, scenario);
    let results: Vec<Mutex<Option<Result<SubResult>>>> = children.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let first_stop = AtomicUsize::new(usize::MAX);
    let workers = workers.max(1).min(children.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= children.len() || i > first_stop.load(Ordering::SeqCst) {
                    break;
                }
                let r = run_subtree(scenario, specs, &root, &init, &children[i]);
                let stops = match &r {
                    Ok(sub) => sub.found.is_some() || sub.budget_hit,
                    Err(_) => true,
                };
                if stops {
                    first_stop.fetch_min(i, Ordering::SeqCst);
                }
                *results[i].lock().expect("result slot") = Some(r);
            });
        }
    });
    let mut found = None;
    for slot in results {
        let Some(r) = slot.into_inner().expect("result slot") else {
            break;
        };
        let sub = r?;
        report.states += sub.states;
        report.layering.merge(&sub.layering);
        if sub.budget_hit {
            report.outcome = SearchOutcome::Inconclusive;
            break;
        }
        if sub.found.is_some() {
            found = sub.found;
            break;
        }
    }
    finish(scenario, specs, report, found)
}

fn finish(
    scenario: &Scenario,
    specs: &[SpecId],
    mut report: ExploreReport,
    found: Option<Found>,
) -> Result<ExploreReport> {
    match found {
        Some(f) => {
            report.outcome = SearchOutcome::Counterexample;
            let mut v = f.verdict;
            let trace = crate::trace::record(scenario, &f.events, std::slice::from_ref(&v))?;
            v.counterexample = Some(trace.clone());
            report.verdicts = vec![v];
            report.counterexample = Some(f.events);
            report.trace = Some(trace);
        }
        None => {
            report.verdicts = specs
                .iter()
                .map(|s| {
                    let mut v = SpecVerdict::new(s.as_str(), Vec::new());
                    v.holds = report.outcome == SearchOutcome::HoldsWithinBounds;
                    v
                })
                .collect();
        }
    }
    Ok(report)
}

/// Obligations checked along one run, and the optimistic rely conditions
/// reported separately: they may legitimately fail once a rogue principal
/// acts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LemmaSuite {
    pub obligations: Vec<PredicateReport>,
    pub relies: Vec<PredicateReport>,
}

impl LemmaSuite {
    pub fn obligations_hold(&self) -> bool {
        self.obligations.iter().all(|r| r.holds)
    }

    pub fn failed(&self) -> impl Iterator<Item = &PredicateReport> {
        self.obligations.iter().filter(|r| !r.holds)
    }
}

/// Check the proof obligations along a run given as its worlds
/// (`worlds[0]` initial) and the records of the steps between them.
///
/// Obligations: `dyn-inv` on every transition; `unique-nonces` and
/// `no-read-others` in every state; every step of a conforming machine
/// preserves `inv-Σ` when it held before the step; every machine
/// step modifies only its own session; an aborted session never
/// completes; completion of conforming users is never undone.
pub fn check_lemma_suite<M: Medium>(worlds: &[World<M>], records: &[StepRecord]) -> Result<LemmaSuite> {
    let states: Vec<GlobalState> = worlds.iter().map(|w| w.medium.project()).collect::<Result<_>>()?;
    let mut ob = Vec::new();
    let first_fail = |name: &str, mut it: Box<dyn Iterator<Item = Option<String>> + '_>| match it.find_map(|x| x) {
        Some(w) => PredicateReport::fail(name, w),
        None => PredicateReport::pass(name),
    };

    ob.push(first_fail(
        "dyn-inv",
        Box::new(states.windows(2).enumerate().map(|(i, p)| {
            let r = dyn_inv(&p[0], &p[1]);
            (!r.holds).then(|| format!("step {}: {}", i + 1, r.witness.unwrap_or_default()))
        })),
    ));
    ob.push(first_fail(
        "unique-nonces",
        Box::new(states.iter().enumerate().map(|(i, s)| {
            let r = unique_nonces(s.history());
            (!r.holds).then(|| format!("state {i}: {}", r.witness.unwrap_or_default()))
        })),
    ));
    ob.push(first_fail(
        "no-read-others",
        Box::new(states.iter().enumerate().map(|(i, s)| {
            let r = no_read_others(s);
            (!r.holds).then(|| format!("state {i}: {}", r.witness.unwrap_or_default()))
        })),
    ));
    ob.push(first_fail(
        "conforming-steps-preserve",
        Box::new(records.iter().enumerate().map(|(i, rec)| {
            if is_environment(&worlds[i], &rec.event) {
                return None;
            }
            let (b, a) = (inv_sigma(&states[i]), inv_sigma(&states[i + 1]));
            (b.holds && !a.holds).then(|| format!("step {} by {}: {}", i + 1, rec.actor, a.witness.unwrap_or_default()))
        })),
    ));
    ob.push(first_fail(
        "guarantee",
        Box::new(records.iter().enumerate().map(|(i, rec)| {
            let idx = rec.machine_index()?;
            let m = &worlds[i + 1].machines[idx];
            let good = BTreeSet::from([m.owner().clone()]);
            let sess: BTreeSet<_> = m.session().cloned().into_iter().collect();
            let r = check_no_mods_to_others(&states[i], &states[i + 1], &good, &sess);
            (!r.holds).then(|| format!("step {} by {}: {}", i + 1, rec.actor, r.witness.unwrap_or_default()))
        })),
    ));
    ob.push(first_fail(
        "abort-excludes-complete",
        Box::new(worlds.iter().zip(&states).enumerate().map(|(i, (w, s))| {
            w.machines.iter().find_map(|m| {
                let sess = m.session()?;
                (m.status() == Status::Aborted && s.user(m.owner())?.is_complete(sess))
                    .then(|| format!("state {i}: {sess} aborted and complete"))
            })
        })),
    ));
    ob.push(first_fail(
        "complete-monotone",
        Box::new(states.windows(2).enumerate().map(|(i, p)| {
            p[0].users().iter().filter(|(_, r)| r.conforms()).find_map(|(u, r)| {
                r.complete.iter().find_map(|(s, done)| {
                    (*done && !p[1].user(u).is_some_and(|n| n.is_complete(s)))
                        .then(|| format!("step {}: {s} uncompleted", i + 1))
                })
            })
        })),
    ));

    let relies = vec![match states.iter().enumerate().find_map(|(i, s)| {
        let r = inv_sigma(s);
        (!r.holds).then_some((i, r))
    }) {
        None => PredicateReport::pass("inv-sigma"),
        Some((i, r)) => {
            let by = if i == 0 {
                "initially".to_string()
            } else {
                format!("after step {} by {}", i, records[i - 1].actor)
            };
            PredicateReport::fail("inv-sigma", format!("{by}: {}", r.witness.unwrap_or_default()))
        }
    }];
    Ok(LemmaSuite {
        obligations: ob,
        relies,
    })
}
