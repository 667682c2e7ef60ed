//! The symbolic universe: principals, sessions, nonces, messages, user
//! records and the global state, plus the history functions the invariants
//! are phrased over.
//!
//! Everything here is an immutable value. Operations that "change" a state
//! return a new one.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Principal identifier.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Uid(Arc<str>);

impl Uid {
    pub fn new(name: impl AsRef<str>) -> Self {
        Uid(Arc::from(name.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Uid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Uid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Uid {
    fn from(s: &str) -> Self {
        Uid::new(s)
    }
}

/// Session identifier, rendered `owner#n`. Allocated per principal by [`Fresh`].
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sid {
    owner: Uid,
    index: u32,
}

impl Sid {
    pub fn new(owner: Uid, index: u32) -> Self {
        Sid { owner, index }
    }

    pub fn owner(&self) -> &Uid {
        &self.owner
    }

    pub fn index(&self) -> u32 {
        self.index
    }
}

impl fmt::Display for Sid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.owner, self.index)
    }
}

impl fmt::Debug for Sid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A fresh symbol. The index is its creation order within a run; equality is
/// symbol identity.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Nonce(u32);

impl Nonce {
    pub fn new(index: u32) -> Self {
        Nonce(index)
    }

    pub fn index(self) -> u32 {
        self.0
    }
}

impl fmt::Display for Nonce {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Debug for Nonce {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Item {
    Uid(Uid),
    Nonce(Nonce),
}

impl Item {
    pub fn as_nonce(&self) -> Option<Nonce> {
        match self {
            Item::Nonce(n) => Some(*n),
            Item::Uid(_) => None,
        }
    }

    pub fn as_uid(&self) -> Option<&Uid> {
        match self {
            Item::Uid(u) => Some(u),
            Item::Nonce(_) => None,
        }
    }

    pub fn kind(&self) -> ItemKind {
        match self {
            Item::Uid(_) => ItemKind::Uid,
            Item::Nonce(_) => ItemKind::Nonce,
        }
    }
}

impl From<Nonce> for Item {
    fn from(n: Nonce) -> Self {
        Item::Nonce(n)
    }
}

impl From<Uid> for Item {
    fn from(u: Uid) -> Self {
        Item::Uid(u)
    }
}

impl From<&Uid> for Item {
    fn from(u: &Uid) -> Self {
        Item::Uid(u.clone())
    }
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Item::Uid(u) => write!(f, "{u}"),
            Item::Nonce(n) => write!(f, "{n}"),
        }
    }
}

impl fmt::Debug for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ItemKind {
    Uid,
    Nonce,
}

/// Renders `[A,n1]`.
pub fn render_content(content: &[Item]) -> String {
    let parts: Vec<String> = content.iter().map(Item::to_string).collect();
    format!("[{}]", parts.join(","))
}

/// Public key atom. The label names the user it was minted for; which keys
/// match which secret keys is decided by the registry, not the label.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PKey(Uid);

/// Secret key atom.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SKey(Uid);

impl PKey {
    pub fn of(u: &Uid) -> Self {
        PKey(u.clone())
    }
}

impl SKey {
    pub fn of(u: &Uid) -> Self {
        SKey(u.clone())
    }
}

impl fmt::Display for PKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pk({})", self.0)
    }
}

impl fmt::Debug for PKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for SKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sk({})", self.0)
    }
}

impl fmt::Debug for SKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A message in the global history.
///
/// `sender` is ghost data: it records who really emitted the message and is
/// only reachable through [`Msg::ghost_sender`], which role machines never
/// call. Machines see a [`MsgView`].
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Msg {
    rec: Uid,
    sender: Uid,
    content: Vec<Item>,
}

impl Msg {
    pub fn new(rec: Uid, sender: Uid, content: Vec<Item>) -> Result<Self> {
        if content.is_empty() {
            return Err(Error::EmptyContent);
        }
        Ok(Msg { rec, sender, content })
    }

    pub fn rec(&self) -> &Uid {
        &self.rec
    }

    pub fn content(&self) -> &[Item] {
        &self.content
    }

    pub fn ghost_sender(&self) -> &Uid {
        &self.sender
    }

    pub fn view(&self) -> MsgView {
        MsgView {
            rec: self.rec.clone(),
            content: self.content.clone(),
        }
    }

    pub fn nonces(&self) -> impl Iterator<Item = Nonce> + '_ {
        self.content.iter().filter_map(Item::as_nonce)
    }
}

/// What a principal can observe of a message: no ghost sender.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct MsgView {
    pub rec: Uid,
    pub content: Vec<Item>,
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Invent {
    pub user: Uid,
    pub what: Nonce,
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Action {
    Msg(Msg),
    Invent(Invent),
}

impl Action {
    pub fn as_msg(&self) -> Option<&Msg> {
        match self {
            Action::Msg(m) => Some(m),
            Action::Invent(_) => None,
        }
    }

    pub fn as_invent(&self) -> Option<&Invent> {
        match self {
            Action::Invent(i) => Some(i),
            Action::Msg(_) => None,
        }
    }

    /// Nonces mentioned by this action, invented or carried.
    pub fn mentions(&self, n: Nonce) -> bool {
        match self {
            Action::Msg(m) => m.nonces().any(|c| c == n),
            Action::Invent(i) => i.what == n,
        }
    }
}

impl From<Msg> for Action {
    fn from(m: Msg) -> Self {
        Action::Msg(m)
    }
}

impl From<Invent> for Action {
    fn from(i: Invent) -> Self {
        Action::Invent(i)
    }
}

/// Per-principal record.
///
/// The session maps are filled lazily: a session appears in `int_partner`,
/// `knows` and `complete` together when its owner joins it.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct UserState {
    pub int_partner: BTreeMap<Sid, Uid>,
    pub knows: BTreeMap<Sid, BTreeSet<Nonce>>,
    pub skey: SKey,
    conforms: bool,
    pub complete: BTreeMap<Sid, bool>,
}

impl UserState {
    pub fn new(skey: SKey, conforms: bool) -> Self {
        UserState {
            int_partner: BTreeMap::new(),
            knows: BTreeMap::new(),
            skey,
            conforms,
            complete: BTreeMap::new(),
        }
    }

    pub fn conforms(&self) -> bool {
        self.conforms
    }

    /// `complete(sess)`, false for sessions never joined.
    pub fn is_complete(&self, sess: &Sid) -> bool {
        self.complete.get(sess).copied().unwrap_or(false)
    }

    pub fn partner(&self, sess: &Sid) -> Option<&Uid> {
        self.int_partner.get(sess)
    }

    pub fn knows_in(&self, sess: &Sid) -> BTreeSet<Nonce> {
        self.knows.get(sess).cloned().unwrap_or_default()
    }

    pub fn sessions(&self) -> BTreeSet<Sid> {
        self.int_partner
            .keys()
            .chain(self.knows.keys())
            .chain(self.complete.keys())
            .cloned()
            .collect()
    }

    /// Every nonce the user knows in any session.
    pub fn all_known(&self) -> BTreeSet<Nonce> {
        self.knows.values().flatten().copied().collect()
    }

    pub(crate) fn join(&mut self, sess: &Sid) {
        self.knows.entry(sess.clone()).or_default();
        self.complete.entry(sess.clone()).or_insert(false);
    }

    pub(crate) fn learn(&mut self, sess: &Sid, n: Nonce) {
        self.knows.entry(sess.clone()).or_default().insert(n);
    }
}

/// The global state: user records, the append-only history and the public
/// key registry.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct GlobalState {
    users: BTreeMap<Uid, UserState>,
    history: Vec<Action>,
    pkeys: BTreeMap<Uid, PKey>,
}

impl GlobalState {
    /// Fresh state for the given principals. Each user gets `pk(u)`/`sk(u)`.
    pub fn new<I>(users: I) -> Self
    where
        I: IntoIterator<Item = (Uid, bool)>,
    {
        let mut map = BTreeMap::new();
        let mut pkeys = BTreeMap::new();
        for (u, conforms) in users {
            pkeys.insert(u.clone(), PKey::of(&u));
            map.insert(u.clone(), UserState::new(SKey::of(&u), conforms));
        }
        GlobalState {
            users: map,
            history: Vec::new(),
            pkeys,
        }
    }

    /// Assemble a state from parts, e.g. a hand-written adversarial history.
    /// No invariant is checked; use the `invariants` module for that.
    pub fn from_parts(users: BTreeMap<Uid, UserState>, history: Vec<Action>, pkeys: BTreeMap<Uid, PKey>) -> Self {
        GlobalState { users, history, pkeys }
    }

    pub fn users(&self) -> &BTreeMap<Uid, UserState> {
        &self.users
    }

    pub fn user(&self, u: &Uid) -> Option<&UserState> {
        self.users.get(u)
    }

    pub fn history(&self) -> &[Action] {
        &self.history
    }

    pub fn pkeys(&self) -> &BTreeMap<Uid, PKey> {
        &self.pkeys
    }

    /// A copy of this state with one user record edited.
    pub fn with_user(&self, u: &Uid, edit: impl FnOnce(&mut UserState)) -> Result<Self> {
        let mut next = self.clone();
        let rec = next.users.get_mut(u).ok_or_else(|| Error::UnknownUser(u.clone()))?;
        edit(rec);
        Ok(next)
    }

    /// A copy of this state in which `u`'s conformity flag is `conforms`.
    /// This builds a different hypothetical state; runs never flip the flag.
    pub fn with_conforms(&self, u: &Uid, conforms: bool) -> Result<Self> {
        self.with_user(u, |rec| rec.conforms = conforms)
    }

    /// A copy of this state with `u`'s registry entry replaced.
    pub fn with_pkey(&self, u: &Uid, pk: PKey) -> Result<Self> {
        if !self.users.contains_key(u) {
            return Err(Error::UnknownUser(u.clone()));
        }
        let mut next = self.clone();
        next.pkeys.insert(u.clone(), pk);
        Ok(next)
    }

    pub(crate) fn user_mut(&mut self, u: &Uid) -> Result<&mut UserState> {
        self.users.get_mut(u).ok_or_else(|| Error::UnknownUser(u.clone()))
    }

    pub(crate) fn push(&mut self, act: Action) -> Result<()> {
        if let Action::Invent(inv) = &act {
            if self.history.iter().any(|a| a.mentions(inv.what)) {
                return Err(Error::FreshnessViolation(inv.what));
            }
        }
        self.history.push(act);
        Ok(())
    }
}

/// Extend the history by one action.
///
/// Fails with [`Error::FreshnessViolation`] if an `Invent` names a nonce that
/// already occurs in the history.
pub fn append_action(state: &GlobalState, act: Action) -> Result<GlobalState> {
    let mut next = state.clone();
    next.push(act)?;
    Ok(next)
}

/// The part of the history that involves `user`: messages it received or
/// (ghost) sent, and nonces it invented. Order is preserved.
pub fn u_hist(history: &[Action], user: &Uid) -> Vec<Action> {
    history
        .iter()
        .filter(|a| match a {
            Action::Msg(m) => m.rec() == user || m.ghost_sender() == user,
            Action::Invent(i) => &i.user == user,
        })
        .cloned()
        .collect()
}

/// Keep `s[i]` where `sel[i]` holds.
pub fn select<T: Clone>(sel: &[bool], s: &[T]) -> Result<Vec<T>> {
    if sel.len() != s.len() {
        return Err(Error::LengthMismatch {
            selector: sel.len(),
            sequence: s.len(),
        });
    }
    Ok(sel
        .iter()
        .zip(s)
        .filter(|(keep, _)| **keep)
        .map(|(_, x)| x.clone())
        .collect())
}

/// Whether some mask selects `s1` out of `s2`.
///
/// Greedy matching decides the existence of the mask in linear time.
pub fn subseq<T: PartialEq>(s1: &[T], s2: &[T]) -> bool {
    let mut rest = s2.iter();
    s1.iter().all(|x| rest.any(|y| y == x))
}

/// Nonce and session allocation for one run.
///
/// Nonces come from a single monotone counter, so `unique-nonces` holds by
/// construction; session numbers count per principal.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct Fresh {
    next_nonce: u32,
    sessions: BTreeMap<Uid, u32>,
}

impl Fresh {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn nonce(&mut self) -> Nonce {
        self.next_nonce += 1;
        Nonce(self.next_nonce)
    }

    pub fn sid(&mut self, owner: &Uid) -> Sid {
        let n = self.sessions.entry(owner.clone()).or_insert(0);
        *n += 1;
        Sid::new(owner.clone(), *n)
    }
}
