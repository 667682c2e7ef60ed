//! State and history predicates: `inv-Σ` and its conjuncts, and the dynamic
//! invariant over state pairs.
//!
//! Every predicate is total and returns a [`PredicateReport`] whose witness
//! explains the first violation found. Indices in witnesses are 1-based
//! positions in the sequence the predicate was given.
//!
//! `no_leaks` and `no_app_leaks` pair an earlier message the user received
//! with a later one it sent. Nonces the user invented itself do not
//! constrain later sends.

use std::collections::BTreeSet;
use std::fmt;

use crate::model::{u_hist, Action, GlobalState, Item, Msg, Nonce, Uid};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredicateReport {
    pub name: String,
    pub holds: bool,
    pub witness: Option<String>,
}

impl PredicateReport {
    pub fn pass(name: impl Into<String>) -> Self {
        PredicateReport {
            name: name.into(),
            holds: true,
            witness: None,
        }
    }

    pub fn fail(name: impl Into<String>, witness: impl Into<String>) -> Self {
        PredicateReport {
            name: name.into(),
            holds: false,
            witness: Some(witness.into()),
        }
    }

    /// Rename, keeping verdict and witness.
    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

impl fmt::Display for PredicateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.witness {
            None => write!(f, "{}: holds", self.name),
            Some(w) => write!(f, "{}: fails ({w})", self.name),
        }
    }
}

/// No two distinct `Invent` entries carry the same nonce.
pub fn unique_nonces(history: &[Action]) -> PredicateReport {
    let invents: Vec<(usize, Nonce)> = history
        .iter()
        .enumerate()
        .filter_map(|(i, a)| a.as_invent().map(|inv| (i + 1, inv.what)))
        .collect();
    for (k, (i, n)) in invents.iter().enumerate() {
        if let Some((j, _)) = invents[k + 1..].iter().find(|(_, m)| m == n) {
            return PredicateReport::fail("unique-nonces", format!("({i},{j}) both invent {n}"));
        }
    }
    PredicateReport::pass("unique-nonces")
}

/// Every nonce a user knows was invented by it or carried by a message
/// addressed to it.
pub fn no_read_others(state: &GlobalState) -> PredicateReport {
    let history = state.history();
    for (u, rec) in state.users() {
        for n in rec.all_known() {
            let justified = history.iter().any(|a| match a {
                Action::Invent(inv) => &inv.user == u && inv.what == n,
                Action::Msg(m) => m.rec() == u && m.nonces().any(|c| c == n),
            });
            if !justified {
                return PredicateReport::fail("no-read-others", format!("({u},{n})"));
            }
        }
    }
    PredicateReport::pass("no-read-others")
}

fn messages(actions: &[Action]) -> Vec<(usize, &Msg)> {
    actions
        .iter()
        .enumerate()
        .filter_map(|(i, a)| a.as_msg().map(|m| (i + 1, m)))
        .collect()
}

fn shared_nonce(a: &Msg, b: &Msg) -> Option<Nonce> {
    let first: BTreeSet<Nonce> = a.nonces().collect();
    b.nonces().find(|c| first.contains(c))
}

/// A nonce that arrived in a message from (ghost) `α` may only be passed on
/// in a message addressed back to `α`.
///
/// Pairs `i < j` are constrained when message `i` was received by the same
/// principal that (ghost) sent message `j`.
pub fn no_leaks(actions: &[Action]) -> PredicateReport {
    let msgs = messages(actions);
    for (k, (i, mi)) in msgs.iter().enumerate() {
        for (j, mj) in &msgs[k + 1..] {
            if mi.rec() != mj.ghost_sender() {
                continue;
            }
            if let Some(c) = shared_nonce(mi, mj) {
                if mj.rec() != mi.ghost_sender() {
                    return PredicateReport::fail(
                        "no-leaks",
                        format!(
                            "{c} received at {i} from {} is sent at {j} to {}",
                            mi.ghost_sender(),
                            mj.rec()
                        ),
                    );
                }
            }
        }
    }
    PredicateReport::pass("no-leaks")
}

/// Like [`no_leaks`], but the originator is the one claimed by a `Uid` item
/// in the earlier message's content instead of the ghost sender. Earlier
/// messages without a `Uid` item constrain nothing.
pub fn no_app_leaks(actions: &[Action]) -> PredicateReport {
    let msgs = messages(actions);
    for (k, (i, mi)) in msgs.iter().enumerate() {
        let claimed: Vec<&Uid> = mi.content().iter().filter_map(Item::as_uid).collect();
        if claimed.is_empty() {
            continue;
        }
        for (j, mj) in &msgs[k + 1..] {
            if let Some(c) = shared_nonce(mi, mj) {
                if !claimed.contains(&mj.rec()) {
                    return PredicateReport::fail(
                        "no-app-leaks",
                        format!(
                            "{c} from {i} (claimed by {}) is sent at {j} to {}",
                            claimed[0],
                            mj.rec()
                        ),
                    );
                }
            }
        }
    }
    PredicateReport::pass("no-app-leaks")
}

/// Every `Uid` item in a message's content is its (ghost) sender.
pub fn no_forge(actions: &[Action]) -> PredicateReport {
    for (i, m) in messages(actions) {
        if let Some(u) = m
            .content()
            .iter()
            .filter_map(Item::as_uid)
            .find(|u| *u != m.ghost_sender())
        {
            return PredicateReport::fail("no-forge", format!("message {i} from {} claims {u}", m.ghost_sender()));
        }
    }
    PredicateReport::pass("no-forge")
}

/// `no_leaks ∧ no_forge` on one conforming user's slice of the history.
pub fn conforming_conjunct(history: &[Action], u: &Uid) -> PredicateReport {
    let mine = u_hist(history, u);
    for r in [no_leaks(&mine), no_forge(&mine)] {
        if !r.holds {
            let w = r.witness.unwrap_or_default();
            return PredicateReport::fail(format!("{}({u})", r.name), w);
        }
    }
    PredicateReport::pass(format!("conforming({u})"))
}

/// `inv-Σ`: unique nonces, no reading of others' mail, and no leaks and no
/// forgery in the slice of every conforming user. The report names the first
/// conjunct that fails.
pub fn inv_sigma(state: &GlobalState) -> PredicateReport {
    let parts = [unique_nonces(state.history()), no_read_others(state)];
    if let Some(bad) = parts.into_iter().find(|r| !r.holds) {
        return fail_conjunct(bad);
    }
    for (u, rec) in state.users() {
        if !rec.conforms() {
            continue;
        }
        let r = conforming_conjunct(state.history(), u);
        if !r.holds {
            return fail_conjunct(r);
        }
    }
    PredicateReport::pass("inv-sigma")
}

fn fail_conjunct(r: PredicateReport) -> PredicateReport {
    PredicateReport::fail("inv-sigma", format!("{}: {}", r.name, r.witness.unwrap_or_default()))
}

/// Dynamic invariant over a transition: the history only grows at its end,
/// per-session knowledge only grows, and conformity never changes.
///
/// Prefix ordering is used for "history ⊆ history′".
pub fn dyn_inv(before: &GlobalState, after: &GlobalState) -> PredicateReport {
    let (h0, h1) = (before.history(), after.history());
    if h1.len() < h0.len() || h1[..h0.len()] != *h0 {
        let at = h0.iter().zip(h1).position(|(a, b)| a != b).unwrap_or(h1.len()) + 1;
        return PredicateReport::fail("dyn-inv", format!("history rewritten at {at}"));
    }
    for (u, rec) in before.users() {
        let Some(next) = after.user(u) else {
            return PredicateReport::fail("dyn-inv", format!("user {u} disappeared"));
        };
        if next.conforms() != rec.conforms() {
            return PredicateReport::fail("dyn-inv", format!("conforms of {u} changed"));
        }
        for (sess, known) in &rec.knows {
            if !known.is_subset(&next.knows_in(sess)) {
                return PredicateReport::fail("dyn-inv", format!("({u},{sess}) knows shrank"));
            }
        }
    }
    PredicateReport::pass("dyn-inv")
}
