//! Operation specifications checked against pairs of states: the optimistic
//! post-condition for two conforming users, the fault-tolerant layer for
//! the corrected protocol, and the rely/guarantee frame predicates.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::invariants::{inv_sigma, PredicateReport};
use crate::model::{GlobalState, Nonce, Sid, Uid, UserState};
use crate::trace::Trace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpecId {
    PostNs,
    NslFt,
    Inv,
}

impl SpecId {
    pub const ALL: [SpecId; 3] = [SpecId::PostNs, SpecId::NslFt, SpecId::Inv];

    pub fn as_str(self) -> &'static str {
        match self {
            SpecId::PostNs => "post-ns",
            SpecId::NslFt => "nsl-ft",
            SpecId::Inv => "inv",
        }
    }

    /// One name, or `all` for every spec.
    pub fn parse_many(s: &str) -> std::result::Result<Vec<SpecId>, String> {
        match s {
            "post-ns" => Ok(vec![SpecId::PostNs]),
            "nsl-ft" => Ok(vec![SpecId::NslFt]),
            "inv" => Ok(vec![SpecId::Inv]),
            "all" => Ok(SpecId::ALL.to_vec()),
            _ => Err(format!("unknown spec `{s}` (post-ns, nsl-ft, inv, all)")),
        }
    }
}

impl fmt::Display for SpecId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Failure {
    pub conjunct: String,
    pub detail: String,
}

impl Failure {
    fn new(conjunct: &str, detail: impl Into<String>) -> Self {
        Failure {
            conjunct: conjunct.to_string(),
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpecVerdict {
    pub spec: String,
    pub holds: bool,
    pub failures: Vec<Failure>,
    pub counterexample: Option<Trace>,
    /// Set when an environment step broke the rely condition, which
    /// discharges the implementation from the post-condition.
    pub rely_broken: Option<String>,
}

impl SpecVerdict {
    pub fn new(spec: impl Into<String>, failures: Vec<Failure>) -> Self {
        SpecVerdict {
            spec: spec.into(),
            holds: failures.is_empty(),
            failures,
            counterexample: None,
            rely_broken: None,
        }
    }

    pub fn has(&self, conjunct: &str) -> bool {
        self.failures.iter().any(|f| f.conjunct == conjunct)
    }
}

fn user<'a>(s: &'a GlobalState, u: &Uid) -> Result<&'a UserState> {
    s.user(u).ok_or_else(|| Error::UnknownUser(u.clone()))
}

fn show_partner(rec: &UserState, sess: &Sid) -> String {
    rec.partner(sess).map_or("unset".to_string(), Uid::to_string)
}

/// The post-condition for two conforming users `from`/`to` in sessions
/// `sf`/`st`. Each failing conjunct is reported separately:
/// `mutual-partner`, `complete`, `shared-nonces` and `secrecy`.
pub fn check_post_ns(
    before: &GlobalState,
    after: &GlobalState,
    from: &Uid,
    to: &Uid,
    sf: &Sid,
    st: &Sid,
) -> Result<SpecVerdict> {
    let (bf, bt) = (user(before, from)?, user(before, to)?);
    if bf.is_complete(sf) || bt.is_complete(st) || !bf.conforms() || !bt.conforms() {
        return Err(Error::PreconditionUnmet(format!(
            "pre-NS needs {from}/{to} conforming with {sf}/{st} incomplete"
        )));
    }
    let (af, at) = (user(after, from)?, user(after, to)?);
    let mut failures = Vec::new();
    if af.partner(sf) != Some(to) || at.partner(st) != Some(from) {
        failures.push(Failure::new(
            "mutual-partner",
            format!(
                "intPartner({sf})={} intPartner({st})={}",
                show_partner(af, sf),
                show_partner(at, st)
            ),
        ));
    }
    let incomplete: Vec<String> = [(af, sf), (at, st)]
        .iter()
        .filter(|(r, s)| !r.is_complete(s))
        .map(|(_, s)| s.to_string())
        .collect();
    if !incomplete.is_empty() {
        failures.push(Failure::new("complete", format!("incomplete {}", incomplete.join(","))));
    }
    let shared: Vec<Nonce> = af.knows_in(sf).intersection(&at.knows_in(st)).copied().collect();
    let mut pairs = Vec::new();
    for (i, na) in shared.iter().enumerate() {
        for nb in &shared[i + 1..] {
            pairs.push((*na, *nb));
        }
    }
    if pairs.is_empty() {
        failures.push(Failure::new(
            "shared-nonces",
            format!("{sf} and {st} share {} nonce(s)", shared.len()),
        ));
    } else {
        let leak = |na: Nonce, nb: Nonce| -> Option<String> {
            after
                .users()
                .iter()
                .filter(|(u, _)| *u != from && *u != to)
                .find_map(|(u, rec)| {
                    rec.knows
                        .iter()
                        .find(|(_, k)| k.contains(&na) && k.contains(&nb))
                        .map(|(su, _)| format!("{u}:{su} knows {{{na},{nb}}}"))
                })
        };
        let leaks: Vec<String> = pairs
            .iter()
            .map(|&(a, b)| leak(a, b))
            .collect::<Option<_>>()
            .unwrap_or_default();
        if !leaks.is_empty() {
            failures.push(Failure::new("secrecy", leaks[0].clone()));
        }
    }
    Ok(SpecVerdict::new(SpecId::PostNs.as_str(), failures))
}

/// The fault-tolerant layer for the corrected protocol: if `from` completed
/// `sf`, no conforming third user knows one of `from`'s nonces while
/// believing it talks to `from`.
pub fn check_post_nsl_ft(
    before: &GlobalState,
    after: &GlobalState,
    from: &Uid,
    to: &Uid,
    sf: &Sid,
) -> Result<SpecVerdict> {
    let bf = user(before, from)?;
    if !bf.conforms() || bf.is_complete(sf) {
        return Err(Error::PreconditionUnmet(format!(
            "pre-NS(L)-FT needs {from} conforming with {sf} incomplete"
        )));
    }
    let af = user(after, from)?;
    let mut failures = Vec::new();
    if af.is_complete(sf) {
        'outer: for na in af.knows_in(sf) {
            for (u, rec) in after.users() {
                if u == from || u == to || !rec.conforms() {
                    continue;
                }
                for (su, k) in &rec.knows {
                    if k.contains(&na) && rec.partner(su) == Some(from) {
                        failures.push(Failure::new(
                            "third-party",
                            format!("{u}:{su} knows {na} with intPartner {from} while {sf} completed"),
                        ));
                        break 'outer;
                    }
                }
            }
        }
    }
    Ok(SpecVerdict::new(SpecId::NslFt.as_str(), failures))
}

/// `noMods`: `u`'s `complete` and `intPartner` are unchanged at `sess`.
pub fn check_guar_no_mods(before: &GlobalState, after: &GlobalState, u: &Uid, sess: &Sid) -> PredicateReport {
    let name = format!("noMods({u},{sess})");
    let (Some(b), Some(a)) = (before.user(u), after.user(u)) else {
        return PredicateReport::fail(name, format!("{u} missing"));
    };
    if b.complete.get(sess) != a.complete.get(sess) {
        return PredicateReport::fail(name, format!("complete({sess}) changed"));
    }
    if b.partner(sess) != a.partner(sess) {
        return PredicateReport::fail(name, format!("intPartner({sess}) changed"));
    }
    PredicateReport::pass(name)
}

/// `noModsToOthers`: users outside `good` are untouched, and good users'
/// `complete`/`intPartner` change only at the given sessions.
pub fn check_no_mods_to_others(
    before: &GlobalState,
    after: &GlobalState,
    good: &BTreeSet<Uid>,
    sessions: &BTreeSet<Sid>,
) -> PredicateReport {
    let name = "noModsToOthers";
    for (u, b) in before.users() {
        let Some(a) = after.user(u) else {
            return PredicateReport::fail(name, format!("{u} disappeared"));
        };
        if !good.contains(u) {
            if a != b {
                return PredicateReport::fail(name, u.to_string());
            }
            continue;
        }
        let keys: BTreeSet<Sid> = b
            .complete
            .keys()
            .chain(a.complete.keys())
            .chain(b.int_partner.keys())
            .chain(a.int_partner.keys())
            .filter(|s| !sessions.contains(*s))
            .cloned()
            .collect();
        for s in keys {
            if b.complete.get(&s) != a.complete.get(&s) || b.partner(&s) != a.partner(&s) {
                return PredicateReport::fail(name, format!("{u}:{s}"));
            }
        }
    }
    PredicateReport::pass(name)
}

/// Completion-driven evaluation of the optimistic spec on a final state:
/// every completed session of a conforming user whose partner conforms
/// must be matched by a session of that partner satisfying the post.
pub fn eval_post_ns(init: &GlobalState, fin: &GlobalState) -> SpecVerdict {
    for (y, rec) in fin.users() {
        if !rec.conforms() {
            continue;
        }
        for (s, done) in &rec.complete {
            if !done {
                continue;
            }
            let Some(x) = rec.partner(s) else { continue };
            let Some(xr) = fin.user(x) else { continue };
            if !xr.conforms() {
                continue;
            }
            let candidates: Vec<Sid> = xr.sessions().into_iter().filter(|c| c != s).collect();
            let mut first = None;
            let mut ok = false;
            for c in &candidates {
                match check_post_ns(init, fin, y, x, s, c) {
                    Ok(v) if v.holds => {
                        ok = true;
                        break;
                    }
                    Ok(v) => {
                        first.get_or_insert(v);
                    }
                    Err(_) => {}
                }
            }
            if ok {
                continue;
            }
            return first.unwrap_or_else(|| {
                SpecVerdict::new(
                    SpecId::PostNs.as_str(),
                    vec![Failure::new(
                        "mutual-partner",
                        format!("{y}:{s} names {x}, which has no session"),
                    )],
                )
            });
        }
    }
    SpecVerdict::new(SpecId::PostNs.as_str(), Vec::new())
}

/// Fault-tolerant layer for every session of every conforming user, with
/// `to` the session's intended partner.
pub fn eval_nsl_ft(init: &GlobalState, fin: &GlobalState) -> SpecVerdict {
    for (from, rec) in fin.users() {
        if !rec.conforms() {
            continue;
        }
        for (sf, to) in &rec.int_partner {
            if let Ok(v) = check_post_nsl_ft(init, fin, from, to, sf) {
                if !v.holds {
                    return v;
                }
            }
        }
    }
    SpecVerdict::new(SpecId::NslFt.as_str(), Vec::new())
}

/// The invariant spec: `inv-Σ` in every state of the run.
pub fn eval_inv(states: &[GlobalState]) -> SpecVerdict {
    for (i, s) in states.iter().enumerate() {
        let r = inv_sigma(s);
        if !r.holds {
            return SpecVerdict::new(
                SpecId::Inv.as_str(),
                vec![Failure::new(
                    "inv-sigma",
                    format!("state {i}: {}", r.witness.unwrap_or_default()),
                )],
            );
        }
    }
    SpecVerdict::new(SpecId::Inv.as_str(), Vec::new())
}

/// Evaluate `spec` over a run given as its sequence of states, and record
/// whether an environment step broke the rely. `environment[i]` tells
/// whether step `i` (from `states[i]` to `states[i+1]`) was taken by the
/// environment, that is by anyone but a conforming user's role machine.
pub fn evaluate(spec: SpecId, states: &[GlobalState], environment: &[bool]) -> SpecVerdict {
    let (init, fin) = (&states[0], &states[states.len() - 1]);
    let mut v = match spec {
        SpecId::PostNs => eval_post_ns(init, fin),
        SpecId::NslFt => eval_nsl_ft(init, fin),
        SpecId::Inv => eval_inv(states),
    };
    if !v.holds && spec != SpecId::Inv {
        v.rely_broken = rely_violation(states, environment);
    }
    v
}

/// First environment step that changed a conforming user's `complete` or
/// `intPartner`.
pub fn rely_violation(states: &[GlobalState], environment: &[bool]) -> Option<String> {
    for (i, pair) in states.windows(2).enumerate() {
        if !environment.get(i).copied().unwrap_or(false) {
            continue;
        }
        let (b, a) = (&pair[0], &pair[1]);
        for (u, rec) in a.users() {
            if !rec.conforms() {
                continue;
            }
            for s in rec.sessions() {
                let r = check_guar_no_mods(b, a, u, &s);
                if !r.holds {
                    return Some(format!("step {} broke {}", i + 1, r.name));
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roles::{run_honest_pair, Variant};

    fn uid(s: &str) -> Uid {
        Uid::new(s)
    }

    #[test]
    fn honest_run_satisfies_post_ns() {
        let (fin, _) = run_honest_pair(&uid("A"), &uid("B"), Variant::Ns).unwrap();
        let init = GlobalState::new([(uid("A"), true), (uid("B"), true)]);
        let v = check_post_ns(
            &init,
            &fin,
            &uid("A"),
            &uid("B"),
            &Sid::new(uid("A"), 1),
            &Sid::new(uid("B"), 1),
        )
        .unwrap();
        assert!(v.holds, "{v:?}");
        assert!(eval_post_ns(&init, &fin).holds);
        assert!(eval_nsl_ft(&init, &fin).holds);
    }

    #[test]
    fn third_party_knowing_both_breaks_secrecy() {
        let (fin, _) = run_honest_pair(&uid("A"), &uid("B"), Variant::Ns).unwrap();
        let init = GlobalState::new([(uid("A"), true), (uid("B"), true)]);
        let both = fin.user(&uid("A")).unwrap().knows_in(&Sid::new(uid("A"), 1));
        let mut users: Vec<(Uid, UserState)> = fin.users().clone().into_iter().collect();
        let mut c = UserState::new(crate::model::SKey::of(&uid("C")), false);
        c.knows.insert(Sid::new(uid("C"), 1), both);
        users.push((uid("C"), c));
        let leaked = GlobalState::from_parts(users.into_iter().collect(), fin.history().to_vec(), fin.pkeys().clone());
        let v = check_post_ns(
            &init,
            &leaked,
            &uid("A"),
            &uid("B"),
            &Sid::new(uid("A"), 1),
            &Sid::new(uid("B"), 1),
        )
        .unwrap();
        assert!(!v.holds);
        assert_eq!(v.failures.len(), 1);
        assert!(v.has("secrecy"));
        assert!(v.failures[0].detail.starts_with("C:C#1"));
    }

    #[test]
    fn precondition() {
        let (fin, _) = run_honest_pair(&uid("A"), &uid("B"), Variant::Ns).unwrap();
        let r = check_post_ns(
            &fin,
            &fin,
            &uid("A"),
            &uid("B"),
            &Sid::new(uid("A"), 1),
            &Sid::new(uid("B"), 1),
        );
        assert!(matches!(r, Err(Error::PreconditionUnmet(_))));
        let r = check_post_nsl_ft(&fin, &fin, &uid("A"), &uid("B"), &Sid::new(uid("A"), 1));
        assert!(matches!(r, Err(Error::PreconditionUnmet(_))));
    }

    #[test]
    fn frame_predicates() {
        let s = GlobalState::new([(uid("A"), true), (uid("B"), true), (uid("C"), true)]);
        let st = Sid::new(uid("B"), 1);
        let good = BTreeSet::from([uid("A"), uid("B")]);
        let sess = BTreeSet::from([st.clone()]);
        assert!(check_guar_no_mods(&s, &s, &uid("B"), &st).holds);
        assert!(check_no_mods_to_others(&s, &s, &good, &sess).holds);

        let s2 = s
            .with_user(&uid("B"), |r| {
                r.int_partner.insert(st.clone(), uid("A"));
            })
            .unwrap();
        assert!(check_no_mods_to_others(&s, &s2, &good, &sess).holds);
        assert!(!check_guar_no_mods(&s, &s2, &uid("B"), &st).holds);

        let s3 = s
            .with_user(&uid("C"), |r| {
                r.knows.insert(Sid::new(uid("C"), 1), BTreeSet::new());
            })
            .unwrap();
        let r = check_no_mods_to_others(&s, &s3, &good, &sess);
        assert!(!r.holds);
        assert_eq!(r.witness.as_deref(), Some("C"));
    }

    #[test]
    fn spec_names() {
        assert_eq!(SpecId::parse_many("all").unwrap(), SpecId::ALL.to_vec());
        assert!(SpecId::parse_many("post").is_err());
    }
}
