//! Symbolic public-key encryption and the concrete medium built on it.
//!
//! At this level a message carries no recipient: it is a ciphertext under
//! some public key, and a principal can read it exactly when its secret
//! key matches. `match(pk, sk)` holds iff some user has secret key `sk` and
//! registered public key `pk`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::error::{Error, Result};
use crate::invariants::{no_read_others, PredicateReport};
use crate::medium::Medium;
use crate::model::{
    render_content, Action, GlobalState, Invent, Item, Msg, MsgView, Nonce, PKey, SKey, Uid, UserState,
};
use crate::scenario::{Level, Scenario};
use crate::specs::{Failure, SpecVerdict};

/// A sealed payload. Only [`dec`] with a matching secret key opens it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EncMsg {
    payload: Vec<Item>,
    pk: PKey,
}

impl EncMsg {
    pub fn pk(&self) -> &PKey {
        &self.pk
    }
}

pub fn enc(content: Vec<Item>, pk: &PKey) -> Result<EncMsg> {
    if content.is_empty() {
        return Err(Error::EmptyContent);
    }
    Ok(EncMsg {
        payload: content,
        pk: pk.clone(),
    })
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("secret key does not match the encryption key")]
pub struct DecryptFailure;

pub fn dec(m: &EncMsg, sk: &SKey, registry: &KeyRegistry) -> std::result::Result<Vec<Item>, DecryptFailure> {
    if registry.matches(&m.pk, sk) {
        Ok(m.payload.clone())
    } else {
        Err(DecryptFailure)
    }
}

/// Registered public keys and secret keys of the run's users.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct KeyRegistry {
    keys: BTreeMap<Uid, (PKey, SKey)>,
}

impl KeyRegistry {
    pub fn new(users: &BTreeMap<Uid, UserState>, pkeys: &BTreeMap<Uid, PKey>) -> Self {
        let keys = users
            .iter()
            .filter_map(|(u, rec)| pkeys.get(u).map(|pk| (u.clone(), (pk.clone(), rec.skey.clone()))))
            .collect();
        KeyRegistry { keys }
    }

    pub fn of(state: &GlobalState) -> Self {
        Self::new(state.users(), state.pkeys())
    }

    pub fn matches(&self, pk: &PKey, sk: &SKey) -> bool {
        self.keys.values().any(|(p, s)| p == pk && s == sk)
    }

    /// The user registered under `pk`; the first by name if several share it.
    pub fn owner_of(&self, pk: &PKey) -> Option<&Uid> {
        self.keys.iter().find(|(_, (p, _))| p == pk).map(|(u, _)| u)
    }

    pub fn pkey(&self, u: &Uid) -> Option<&PKey> {
        self.keys.get(u).map(|(p, _)| p)
    }

    pub fn pkeys(&self) -> impl Iterator<Item = &PKey> {
        self.keys.values().map(|(p, _)| p)
    }

    pub fn skeys(&self) -> impl Iterator<Item = &SKey> {
        self.keys.values().map(|(_, s)| s)
    }
}

/// A ciphertext on the wire, with the true emitter as a ghost.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WireMsg {
    pub body: EncMsg,
    ghost_sender: Uid,
}

impl WireMsg {
    pub fn new(body: EncMsg, ghost_sender: Uid) -> Self {
        WireMsg { body, ghost_sender }
    }

    pub fn ghost_sender(&self) -> &Uid {
        &self.ghost_sender
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum WireEvent {
    Wire(WireMsg),
    Invent(Invent),
}

/// Map a concrete history to the abstract one: the recipient of a
/// ciphertext is the owner of its key.
pub fn abstract_of(history: &[WireEvent], registry: &KeyRegistry) -> Result<Vec<Action>> {
    history
        .iter()
        .map(|e| match e {
            WireEvent::Invent(i) => Ok(Action::Invent(i.clone())),
            WireEvent::Wire(w) => {
                let rec = registry
                    .owner_of(&w.body.pk)
                    .ok_or_else(|| Error::UnknownKey(w.body.pk.to_string()))?;
                Ok(Msg::new(rec.clone(), w.ghost_sender.clone(), w.body.payload.clone())?.into())
            }
        })
        .collect()
}

/// The concrete global state: user records, the wire history and the key
/// registry.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WireState {
    users: BTreeMap<Uid, UserState>,
    history: Vec<WireEvent>,
    pkeys: BTreeMap<Uid, PKey>,
    registry: KeyRegistry,
}

impl WireState {
    pub fn history(&self) -> &[WireEvent] {
        &self.history
    }

    pub fn registry(&self) -> &KeyRegistry {
        &self.registry
    }

    fn mentions(&self, n: Nonce) -> bool {
        self.history.iter().any(|e| match e {
            WireEvent::Invent(i) => i.what == n,
            WireEvent::Wire(w) => w.body.payload.contains(&Item::Nonce(n)),
        })
    }

    fn push_wire(&mut self, to: &Uid, from: &Uid, content: Vec<Item>) -> Result<()> {
        let pk = self
            .pkeys
            .get(to)
            .ok_or_else(|| Error::UnknownUser(to.clone()))?
            .clone();
        self.history
            .push(WireEvent::Wire(WireMsg::new(enc(content, &pk)?, from.clone())));
        Ok(())
    }
}

impl Medium for WireState {
    fn users(&self) -> &BTreeMap<Uid, UserState> {
        &self.users
    }

    fn user_mut(&mut self, u: &Uid) -> Result<&mut UserState> {
        self.users.get_mut(u).ok_or_else(|| Error::UnknownUser(u.clone()))
    }

    fn len(&self) -> usize {
        self.history.len()
    }

    fn is_message(&self, idx: usize) -> bool {
        matches!(self.history.get(idx), Some(WireEvent::Wire(_)))
    }

    fn open(&self, idx: usize, reader: &Uid) -> Option<MsgView> {
        let WireEvent::Wire(w) = self.history.get(idx)? else {
            return None;
        };
        let sk = &self.users.get(reader)?.skey;
        let content = dec(&w.body, sk, &self.registry).ok()?;
        Some(MsgView {
            rec: reader.clone(),
            content,
        })
    }

    fn peek(&self, idx: usize) -> Option<MsgView> {
        let WireEvent::Wire(w) = self.history.get(idx)? else {
            return None;
        };
        Some(MsgView {
            rec: self.registry.owner_of(&w.body.pk)?.clone(),
            content: w.body.payload.clone(),
        })
    }

    fn from_abstract(state: GlobalState) -> Result<Self> {
        if !state.history().is_empty() {
            return Err(Error::PreconditionUnmet(
                "concrete runs start from an empty history".into(),
            ));
        }
        Ok(WireState {
            registry: KeyRegistry::of(&state),
            users: state.users().clone(),
            history: Vec::new(),
            pkeys: state.pkeys().clone(),
        })
    }

    fn invent(&mut self, user: &Uid, what: Nonce) -> Result<()> {
        if self.mentions(what) {
            return Err(Error::FreshnessViolation(what));
        }
        self.history.push(WireEvent::Invent(Invent {
            user: user.clone(),
            what,
        }));
        Ok(())
    }

    fn send(&mut self, from: &Uid, to: &Uid, content: Vec<Item>) -> Result<()> {
        self.push_wire(to, from, content)
    }

    fn replay(&mut self, idx: usize, by: &Uid) -> Result<()> {
        let Some(WireEvent::Wire(w)) = self.history.get(idx) else {
            return Err(Error::PreconditionUnmet(format!("entry {} is not a message", idx + 1)));
        };
        let copy = WireMsg::new(w.body.clone(), by.clone());
        self.history.push(WireEvent::Wire(copy));
        Ok(())
    }

    fn record(&self, idx: usize, ghost: bool) -> String {
        match &self.history[idx] {
            WireEvent::Invent(i) => format!("action=invent user={} what={}", i.user, i.what),
            WireEvent::Wire(w) => {
                let mut s = format!(
                    "action=wire body=enc({},{})",
                    render_content(&w.body.payload),
                    w.body.pk
                );
                if ghost {
                    s.push_str(&format!(" ghost:sender={}", w.ghost_sender));
                }
                s
            }
        }
    }

    fn project(&self) -> Result<GlobalState> {
        Ok(GlobalState::from_parts(
            self.users.clone(),
            abstract_of(&self.history, &self.registry)?,
            self.pkeys.clone(),
        ))
    }
}

/// Both encryption laws over the registry's keys for one payload:
/// `dec(enc(c, pk), sk) = c` exactly when `match(pk, sk)`, and `sk` opens
/// something exactly when some `pk` matches it. Returns the report and the
/// number of `(pk, sk)` pairs that decrypt.
pub fn check_dec_enc(registry: &KeyRegistry, content: &[Item]) -> Result<(PredicateReport, usize, usize)> {
    let pks: Vec<&PKey> = registry.pkeys().collect();
    let sks: Vec<&SKey> = registry.skeys().collect();
    let mut ok = 0;
    for sk in &sks {
        let mut opens_any = false;
        for pk in &pks {
            let m = enc(content.to_vec(), pk)?;
            let got = dec(&m, sk, registry);
            let expect = registry.matches(pk, sk);
            if got.is_ok() != expect || got.as_ref().is_ok_and(|c| c.as_slice() != content) {
                return Ok((
                    PredicateReport::fail("dec-enc-prop", format!("dec(enc(c,{pk}),{sk})")),
                    ok,
                    pks.len() * sks.len(),
                ));
            }
            if got.is_ok() {
                ok += 1;
                opens_any = true;
            }
        }
        if opens_any != pks.iter().any(|pk| registry.matches(pk, sk)) {
            return Ok((
                PredicateReport::fail("dec-enc-prop", format!("{sk} opens nothing")),
                ok,
                0,
            ));
        }
    }
    Ok((PredicateReport::pass("dec-enc-prop"), ok, pks.len() * sks.len()))
}

/// Run the scenario at both levels under the same scheduler and compare
/// step by step: the projected concrete history equals the abstract one,
/// user records agree, and the projection never lets anyone know a nonce
/// it could not have read.
pub fn check_refinement(scenario: &Scenario) -> Result<SpecVerdict> {
    let mut abs_s = scenario.clone();
    abs_s.level = Level::Abstract;
    let mut con_s = scenario.clone();
    con_s.level = Level::Concrete;
    let max = scenario.bounds.max_steps;
    let a = crate::run::run_abstract(&abs_s, max)?;
    let c = crate::run::run_concrete(&con_s, max)?;
    let mut failures = Vec::new();
    let n = a.worlds.len().max(c.worlds.len());
    for k in 0..n {
        let (Some(aw), Some(cw)) = (a.worlds.get(k), c.worlds.get(k)) else {
            failures.push(Failure {
                conjunct: "same-length".into(),
                detail: format!("abstract {} steps, concrete {}", a.records.len(), c.records.len()),
            });
            break;
        };
        let proj = cw.medium.project()?;
        let r = no_read_others(&proj);
        if !r.holds {
            failures.push(Failure {
                conjunct: "no-read-others".into(),
                detail: format!("state {k}: {}", r.witness.unwrap_or_default()),
            });
            break;
        }
        if proj.history() != aw.medium.history() {
            failures.push(Failure {
                conjunct: "history".into(),
                detail: format!("state {k}: projected history differs"),
            });
            break;
        }
        if proj.users() != aw.medium.users() {
            failures.push(Failure {
                conjunct: "users".into(),
                detail: format!("state {k}: user records differ"),
            });
            break;
        }
    }
    Ok(SpecVerdict::new("refinement", failures))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uid(s: &str) -> Uid {
        Uid::new(s)
    }

    fn four() -> GlobalState {
        GlobalState::new(["A", "B", "C", "D"].map(|u| (uid(u), true)))
    }

    #[test]
    fn enc_dec_basics() {
        let s = four();
        let reg = KeyRegistry::of(&s);
        let c = vec![Item::Uid(uid("A")), Item::Nonce(Nonce::new(1))];
        let t = enc(c.clone(), &PKey::of(&uid("B"))).unwrap();
        assert_eq!(dec(&t, &SKey::of(&uid("B")), &reg), Ok(c.clone()));
        assert_eq!(dec(&t, &SKey::of(&uid("A")), &reg), Err(DecryptFailure));
        assert_eq!(t, enc(c, &PKey::of(&uid("B"))).unwrap());
        assert_eq!(enc(vec![], &PKey::of(&uid("B"))), Err(Error::EmptyContent));
    }

    #[test]
    fn dec_enc_prop_exhaustive() {
        let reg = KeyRegistry::of(&four());
        let (r, ok, total) = check_dec_enc(&reg, &[Item::Nonce(Nonce::new(1))]).unwrap();
        assert!(r.holds);
        assert_eq!((ok, total), (4, 16));
    }

    #[test]
    fn abstract_of_maps_keys_to_recipients() {
        let reg = KeyRegistry::of(&four());
        let w = WireMsg::new(
            enc(
                vec![Item::Uid(uid("A")), Item::Nonce(Nonce::new(1))],
                &PKey::of(&uid("B")),
            )
            .unwrap(),
            uid("A"),
        );
        let acts = abstract_of(&[WireEvent::Wire(w)], &reg).unwrap();
        let m = acts[0].as_msg().unwrap();
        assert_eq!((m.rec(), m.ghost_sender()), (&uid("B"), &uid("A")));
        assert!(abstract_of(&[], &reg).unwrap().is_empty());

        let stray = WireMsg::new(
            enc(vec![Item::Nonce(Nonce::new(1))], &PKey::of(&uid("Z"))).unwrap(),
            uid("A"),
        );
        assert!(matches!(
            abstract_of(&[WireEvent::Wire(stray)], &reg),
            Err(Error::UnknownKey(_))
        ));
    }

    #[test]
    fn shared_key_lets_two_users_read() {
        let s = four().with_pkey(&uid("C"), PKey::of(&uid("B"))).unwrap();
        let mut w = WireState::from_abstract(s).unwrap();
        w.send(&uid("A"), &uid("B"), vec![Item::Nonce(Nonce::new(1))]).unwrap();
        assert!(w.open(0, &uid("B")).is_some());
        assert!(w.open(0, &uid("C")).is_some());
        assert!(w.open(0, &uid("D")).is_none());
    }
}
