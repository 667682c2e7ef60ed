//! Resumable state machines for the initiator (`sender`) and responder
//! (`receiver`) of the three-message exchange, in the original (NS) and
//! Lowe-corrected (NSL) variants.
//!
//! One call to [`RoleMachine::step`] executes one statement:
//!
//! | pc | sender                          | receiver                          |
//! |----|---------------------------------|-----------------------------------|
//! | 0  | `start`: new session, partner   | `start`: new session              |
//! | 1  | `invent` NA                     | `rcv-a1` ⟨from, Nf⟩, partner      |
//! | 2  | `send-a1` ⟨this, NA⟩            | `invent` NB                       |
//! | 3  | `rcv-b1` ⟨ret, Nt⟩ + check      | `send-b1` ⟨Nf, NB⟩                |
//! | 4  | `send-a2` ⟨Nt⟩                  | `rcv-a2` ⟨ret⟩ + check            |
//! | 5  | `complete`                      | `complete`                        |
//!
//! NSL differs in two places only: `send-b1` prepends the receiver's own
//! identity, and `rcv-b1` expects ⟨partner, NA, Nt⟩ and aborts when the
//! identity is not the intended partner.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::medium::Medium;
use crate::model::{render_content, Fresh, GlobalState, Item, ItemKind, MsgView, Nonce, Sid, Uid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Ns,
    Nsl,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Ns => "ns",
            Variant::Nsl => "nsl",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    /// Initiator. `to` is `None` until the partner is chosen by the scheduler.
    Sender {
        to: Option<Uid>,
    },
    Receiver,
}

impl Role {
    pub fn name(&self) -> &'static str {
        match self {
            Role::Sender { .. } => "sender",
            Role::Receiver => "receiver",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Running,
    Blocked,
    Completed,
    Aborted,
}

impl Status {
    pub fn is_terminal(self) -> bool {
        matches!(self, Status::Completed | Status::Aborted)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stmt {
    Start,
    InventNa,
    SendA1,
    RecvB1,
    SendA2,
    RecvA1,
    InventNb,
    SendB1,
    RecvA2,
    Complete,
}

const SENDER: [Stmt; 6] = [
    Stmt::Start,
    Stmt::InventNa,
    Stmt::SendA1,
    Stmt::RecvB1,
    Stmt::SendA2,
    Stmt::Complete,
];

const RECEIVER: [Stmt; 6] = [
    Stmt::Start,
    Stmt::RecvA1,
    Stmt::InventNb,
    Stmt::SendB1,
    Stmt::RecvA2,
    Stmt::Complete,
];

impl Stmt {
    pub fn label(self) -> &'static str {
        match self {
            Stmt::Start => "start",
            Stmt::InventNa | Stmt::InventNb => "invent",
            Stmt::SendA1 => "send-a1",
            Stmt::RecvB1 => "rcv-b1",
            Stmt::SendA2 => "send-a2",
            Stmt::RecvA1 => "rcv-a1",
            Stmt::SendB1 => "send-b1",
            Stmt::RecvA2 => "rcv-a2",
            Stmt::Complete => "complete",
        }
    }
}

/// Content shape a `rcv` accepts: arity and item kind per position.
pub type Pattern = &'static [ItemKind];

const P_UID_NONCE: Pattern = &[ItemKind::Uid, ItemKind::Nonce];
const P_NONCE_NONCE: Pattern = &[ItemKind::Nonce, ItemKind::Nonce];
const P_UID_NONCE_NONCE: Pattern = &[ItemKind::Uid, ItemKind::Nonce, ItemKind::Nonce];
const P_NONCE: Pattern = &[ItemKind::Nonce];

pub fn matches_pattern(content: &[Item], pattern: &[ItemKind]) -> bool {
    content.len() == pattern.len() && content.iter().zip(pattern).all(|(i, k)| i.kind() == *k)
}

/// Which history entries each principal has already consumed.
///
/// `rcv` takes the most recent unread message matching its pattern;
/// non-matching messages stay unread for other machines of the same owner.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Inbox {
    consumed: BTreeMap<Uid, BTreeSet<usize>>,
}

impl Inbox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_consumed(&self, reader: &Uid, idx: usize) -> bool {
        self.consumed.get(reader).is_some_and(|s| s.contains(&idx))
    }

    pub fn consume(&mut self, reader: &Uid, idx: usize) {
        self.consumed.entry(reader.clone()).or_default().insert(idx);
    }

    /// Unread messages `reader` can open, most recent first.
    pub fn unread<M: Medium>(&self, medium: &M, reader: &Uid) -> Vec<(usize, MsgView)> {
        (0..medium.len())
            .rev()
            .filter(|&i| !self.is_consumed(reader, i))
            .filter_map(|i| medium.open(i, reader).map(|v| (i, v)))
            .collect()
    }

    /// The most recent unread message for `reader` whose content fits `pattern`.
    pub fn latest<M: Medium>(&self, medium: &M, reader: &Uid, pattern: &[ItemKind]) -> Option<(usize, MsgView)> {
        (0..medium.len())
            .rev()
            .filter(|&i| !self.is_consumed(reader, i))
            .filter_map(|i| medium.open(i, reader).map(|v| (i, v)))
            .find(|(_, v)| matches_pattern(&v.content, pattern))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Locals {
    pub na: Option<Nonce>,
    pub nb: Option<Nonce>,
    pub nf: Option<Nonce>,
    pub nt: Option<Nonce>,
    pub from: Option<Uid>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RoleMachine {
    owner: Uid,
    variant: Variant,
    role: Role,
    session: Option<Sid>,
    pc: usize,
    locals: Locals,
    status: Status,
}

/// What one step did, for traces and for the scheduler.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Effect {
    pub stmt: Stmt,
    pub outcome: Outcome,
    /// History index of the action appended by this step, if any.
    pub appended: Option<usize>,
    /// History index of the message consumed by this step, if any.
    pub consumed: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Progress,
    Blocked,
    Completed,
    Aborted(String),
}

pub struct StepOutcome<M> {
    pub machine: RoleMachine,
    pub state: M,
    pub inbox: Inbox,
    pub fresh: Fresh,
    pub effect: Effect,
}

impl RoleMachine {
    pub fn sender(owner: Uid, to: Option<Uid>, variant: Variant) -> Self {
        Self::new(owner, Role::Sender { to }, variant)
    }

    pub fn receiver(owner: Uid, variant: Variant) -> Self {
        Self::new(owner, Role::Receiver, variant)
    }

    fn new(owner: Uid, role: Role, variant: Variant) -> Self {
        RoleMachine {
            owner,
            variant,
            role,
            session: None,
            pc: 0,
            locals: Locals::default(),
            status: Status::Running,
        }
    }

    pub fn owner(&self) -> &Uid {
        &self.owner
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn role(&self) -> &Role {
        &self.role
    }

    pub fn session(&self) -> Option<&Sid> {
        self.session.as_ref()
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn locals(&self) -> &Locals {
        &self.locals
    }

    pub fn pc(&self) -> usize {
        self.pc
    }

    pub(crate) fn normalize_status(&mut self) {
        if self.status == Status::Blocked {
            self.status = Status::Running;
        }
    }

    /// Partner chosen for a sender, if any.
    pub fn peer(&self) -> Option<&Uid> {
        match &self.role {
            Role::Sender { to } => to.as_ref(),
            Role::Receiver => None,
        }
    }

    /// Bind the partner of a sender whose partner is still open.
    pub fn with_peer(&self, to: Uid) -> Self {
        let mut m = self.clone();
        if let Role::Sender { to: slot @ None } = &mut m.role {
            *slot = Some(to);
        }
        m
    }

    pub fn next_stmt(&self) -> Option<Stmt> {
        if self.status.is_terminal() {
            return None;
        }
        let prog: &[Stmt] = match self.role {
            Role::Sender { .. } => &SENDER,
            Role::Receiver => &RECEIVER,
        };
        prog.get(self.pc).copied()
    }

    /// Pattern of the pending `rcv`, if the next statement is one.
    pub fn waiting_for(&self) -> Option<Pattern> {
        match self.next_stmt()? {
            Stmt::RecvA1 => Some(P_UID_NONCE),
            Stmt::RecvB1 => Some(match self.variant {
                Variant::Ns => P_NONCE_NONCE,
                Variant::Nsl => P_UID_NONCE_NONCE,
            }),
            Stmt::RecvA2 => Some(P_NONCE),
            _ => None,
        }
    }

    /// Whether a step would change anything.
    pub fn can_step<M: Medium>(&self, state: &M, inbox: &Inbox) -> bool {
        match self.next_stmt() {
            None => false,
            Some(Stmt::Start) => !matches!(self.role, Role::Sender { to: None }),
            Some(_) => match self.waiting_for() {
                Some(p) => inbox.latest(state, &self.owner, p).is_some(),
                None => true,
            },
        }
    }

    /// Execute one statement.
    ///
    /// Terminal machines are returned unchanged. A `rcv` with nothing to
    /// receive leaves everything unchanged except the status, which becomes
    /// `Blocked`.
    pub fn step<M: Medium>(&self, state: &M, inbox: &Inbox, fresh: &Fresh) -> Result<StepOutcome<M>> {
        let mut m = self.clone();
        let mut st = state.clone();
        let mut ib = inbox.clone();
        let mut fr = fresh.clone();
        let Some(stmt) = self.next_stmt() else {
            return Ok(StepOutcome {
                machine: m,
                state: st,
                inbox: ib,
                fresh: fr,
                effect: Effect {
                    stmt: Stmt::Complete,
                    outcome: Outcome::Blocked,
                    appended: None,
                    consumed: None,
                },
            });
        };
        let before = st.len();
        let mut consumed = None;
        let outcome = m.exec(stmt, &mut st, &mut ib, &mut fr, &mut consumed)?;
        let appended = (st.len() > before).then_some(before);
        m.status = match &outcome {
            Outcome::Progress => Status::Running,
            Outcome::Blocked => Status::Blocked,
            Outcome::Completed => Status::Completed,
            Outcome::Aborted(_) => Status::Aborted,
        };
        if outcome != Outcome::Blocked {
            m.pc += 1;
        }
        Ok(StepOutcome {
            machine: m,
            state: st,
            inbox: ib,
            fresh: fr,
            effect: Effect {
                stmt,
                outcome,
                appended,
                consumed,
            },
        })
    }

    fn sess(&self) -> Result<Sid> {
        self.session
            .clone()
            .ok_or_else(|| Error::PreconditionUnmet(format!("{} has no session", self.owner)))
    }

    fn local<T: Clone>(v: &Option<T>, name: &str) -> Result<T> {
        v.clone()
            .ok_or_else(|| Error::PreconditionUnmet(format!("local {name} is unbound")))
    }

    fn receive<M: Medium>(&self, st: &M, ib: &mut Inbox, consumed: &mut Option<usize>) -> Option<Vec<Item>> {
        let pattern = self.waiting_for()?;
        let (idx, view) = ib.latest(st, &self.owner, pattern)?;
        ib.consume(&self.owner, idx);
        *consumed = Some(idx);
        Some(view.content)
    }

    fn exec<M: Medium>(
        &mut self,
        stmt: Stmt,
        st: &mut M,
        ib: &mut Inbox,
        fr: &mut Fresh,
        consumed: &mut Option<usize>,
    ) -> Result<Outcome> {
        let me = self.owner.clone();
        match stmt {
            Stmt::Start => {
                let s = fr.sid(&me);
                if let Role::Sender { to } = &self.role {
                    let to = to
                        .clone()
                        .ok_or_else(|| Error::PreconditionUnmet(format!("sender {me} has no partner")))?;
                    let rec = st.user_mut(&me)?;
                    rec.join(&s);
                    rec.int_partner.insert(s.clone(), to);
                }
                self.session = Some(s);
            }
            Stmt::InventNa | Stmt::InventNb => {
                let s = self.sess()?;
                let n = fr.nonce();
                st.invent(&me, n)?;
                st.user_mut(&me)?.learn(&s, n);
                if stmt == Stmt::InventNa {
                    self.locals.na = Some(n);
                } else {
                    self.locals.nb = Some(n);
                }
            }
            Stmt::SendA1 => {
                let to = self.peer().cloned().expect("sender started with a partner");
                let na = Self::local(&self.locals.na, "NA")?;
                st.send(&me, &to, vec![Item::Uid(me.clone()), Item::Nonce(na)])?;
            }
            Stmt::RecvB1 => {
                let Some(content) = self.receive(st, ib, consumed) else {
                    return Ok(Outcome::Blocked);
                };
                let s = self.sess()?;
                let to = self.peer().cloned().expect("sender started with a partner");
                let na = Self::local(&self.locals.na, "NA")?;
                let (claimed, ret, nt) = match self.variant {
                    Variant::Ns => (None, &content[0], &content[1]),
                    Variant::Nsl => (content[0].as_uid(), &content[1], &content[2]),
                };
                let identity_ok = claimed.is_none_or(|c| *c == to);
                if !identity_ok || ret.as_nonce() != Some(na) {
                    let expected = match self.variant {
                        Variant::Ns => format!("[{na},_]"),
                        Variant::Nsl => format!("[{to},{na},_]"),
                    };
                    return Ok(Outcome::Aborted(format!(
                        "expected {expected} got {}",
                        render_content(&content)
                    )));
                }
                let nt = nt.as_nonce().expect("pattern guarantees a nonce");
                self.locals.nt = Some(nt);
                st.user_mut(&me)?.learn(&s, nt);
            }
            Stmt::SendA2 => {
                let to = self.peer().cloned().expect("sender started with a partner");
                let nt = Self::local(&self.locals.nt, "Nt")?;
                st.send(&me, &to, vec![Item::Nonce(nt)])?;
            }
            Stmt::RecvA1 => {
                let Some(content) = self.receive(st, ib, consumed) else {
                    return Ok(Outcome::Blocked);
                };
                let s = self.sess()?;
                let from = content[0].as_uid().expect("pattern").clone();
                let nf = content[1].as_nonce().expect("pattern");
                let rec = st.user_mut(&me)?;
                rec.join(&s);
                rec.int_partner.insert(s.clone(), from.clone());
                rec.learn(&s, nf);
                self.locals.from = Some(from);
                self.locals.nf = Some(nf);
            }
            Stmt::SendB1 => {
                let from = Self::local(&self.locals.from, "from")?;
                let nf = Self::local(&self.locals.nf, "Nf")?;
                let nb = Self::local(&self.locals.nb, "NB")?;
                let mut content = Vec::with_capacity(3);
                if self.variant == Variant::Nsl {
                    content.push(Item::Uid(me.clone()));
                }
                content.extend([Item::Nonce(nf), Item::Nonce(nb)]);
                st.send(&me, &from, content)?;
            }
            Stmt::RecvA2 => {
                let Some(content) = self.receive(st, ib, consumed) else {
                    return Ok(Outcome::Blocked);
                };
                let nb = Self::local(&self.locals.nb, "NB")?;
                if content[0].as_nonce() != Some(nb) {
                    return Ok(Outcome::Aborted(format!(
                        "expected [{nb}] got {}",
                        render_content(&content)
                    )));
                }
            }
            Stmt::Complete => {
                let s = self.sess()?;
                st.user_mut(&me)?.complete.insert(s, true);
                return Ok(Outcome::Completed);
            }
        }
        Ok(Outcome::Progress)
    }
}

/// Run a conforming sender `from → to` against a conforming receiver `to`
/// under the round-robin scheduler until both complete.
///
/// Returns the final state and the trace. A self-session (`from == to`) runs
/// the two roles in two distinct sessions of the same principal.
pub fn run_honest_pair(from: &Uid, to: &Uid, variant: Variant) -> Result<(GlobalState, crate::trace::Trace)> {
    let scenario = crate::scenario::Scenario::honest_pair(from, to, variant);
    let run = crate::run::run_abstract(&scenario, usize::MAX)?;
    let done = run.world.machines.iter().all(|m| m.status() == Status::Completed);
    if !done {
        return Err(Error::Deadlock);
    }
    Ok((run.world.medium, run.trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Msg;

    fn uid(s: &str) -> Uid {
        Uid::new(s)
    }

    fn state() -> GlobalState {
        GlobalState::new([(uid("A"), true), (uid("B"), true), (uid("I"), false)])
    }

    fn run_steps(
        m: &RoleMachine,
        s: &GlobalState,
        ib: &Inbox,
        fr: &Fresh,
        n: usize,
    ) -> (RoleMachine, GlobalState, Inbox, Fresh) {
        let (mut m, mut s, mut ib, mut fr) = (m.clone(), s.clone(), ib.clone(), fr.clone());
        for _ in 0..n {
            let out = m.step(&s, &ib, &fr).unwrap();
            (m, s, ib, fr) = (out.machine, out.state, out.inbox, out.fresh);
        }
        (m, s, ib, fr)
    }

    #[test]
    fn sender_first_three_steps() {
        let a = RoleMachine::sender(uid("A"), Some(uid("B")), Variant::Ns);
        let (m, s, _, _) = run_steps(&a, &state(), &Inbox::new(), &Fresh::new(), 3);
        let na = m.locals().na.unwrap();
        assert_eq!(s.history().len(), 2);
        assert_eq!(s.history()[0].as_invent().unwrap().what, na);
        let a1 = s.history()[1].as_msg().unwrap();
        assert_eq!(a1.rec(), &uid("B"));
        assert_eq!(a1.ghost_sender(), &uid("A"));
        assert_eq!(a1.content(), &[Item::Uid(uid("A")), Item::Nonce(na)]);
        let sid = m.session().unwrap();
        assert_eq!(s.user(&uid("A")).unwrap().partner(sid), Some(&uid("B")));
    }

    #[test]
    fn sender_blocks_without_mail() {
        let a = RoleMachine::sender(uid("A"), Some(uid("B")), Variant::Ns);
        let (m, s, ib, fr) = run_steps(&a, &state(), &Inbox::new(), &Fresh::new(), 3);
        assert!(!m.can_step(&s, &ib));
        let out = m.step(&s, &ib, &fr).unwrap();
        assert_eq!(out.machine.status(), Status::Blocked);
        assert_eq!(out.state, s);
        assert_eq!(out.inbox, ib);
        assert_eq!(out.effect.outcome, Outcome::Blocked);
    }

    #[test]
    fn nsl_sender_aborts_on_wrong_identity() {
        let a = RoleMachine::sender(uid("A"), Some(uid("I")), Variant::Nsl);
        let (m, s, ib, fr) = run_steps(&a, &state(), &Inbox::new(), &Fresh::new(), 3);
        let na = m.locals().na.unwrap();
        let nb = Nonce::new(99);
        let b1 = Msg::new(
            uid("A"),
            uid("B"),
            vec![Item::Uid(uid("B")), Item::Nonce(na), Item::Nonce(nb)],
        )
        .unwrap();
        let s = crate::model::append_action(&s, b1.into()).unwrap();
        let out = m.step(&s, &ib, &fr).unwrap();
        assert_eq!(out.machine.status(), Status::Aborted);
        match &out.effect.outcome {
            Outcome::Aborted(why) => assert!(why.contains("expected [I,n1,_]"), "{why}"),
            o => panic!("{o:?}"),
        }
        let sid = out.machine.session().unwrap().clone();
        let rec = out.state.user(&uid("A")).unwrap();
        assert!(!rec.is_complete(&sid));
        assert!(!rec.knows_in(&sid).contains(&nb));
        // aborted machines no longer move
        let again = out.machine.step(&out.state, &out.inbox, &out.fresh).unwrap();
        assert_eq!(again.machine, out.machine);
        assert_eq!(again.state, out.state);
    }

    #[test]
    fn ns_sender_aborts_on_wrong_nonce() {
        let a = RoleMachine::sender(uid("A"), Some(uid("B")), Variant::Ns);
        let (m, s, ib, fr) = run_steps(&a, &state(), &Inbox::new(), &Fresh::new(), 3);
        let b1 = Msg::new(
            uid("A"),
            uid("B"),
            vec![Item::Nonce(Nonce::new(50)), Item::Nonce(Nonce::new(51))],
        )
        .unwrap();
        let s = crate::model::append_action(&s, b1.into()).unwrap();
        let out = m.step(&s, &ib, &fr).unwrap();
        assert_eq!(out.machine.status(), Status::Aborted);
    }

    #[test]
    fn rcv_takes_most_recent_matching_and_skips_other_shapes() {
        let b = RoleMachine::receiver(uid("B"), Variant::Ns);
        let mut s = state();
        for (sender, n) in [("A", 1), ("I", 2)] {
            let m = Msg::new(
                uid("B"),
                uid(sender),
                vec![Item::Uid(uid(sender)), Item::Nonce(Nonce::new(n))],
            )
            .unwrap();
            s = crate::model::append_action(&s, m.into()).unwrap();
        }
        let odd = Msg::new(uid("B"), uid("I"), vec![Item::Nonce(Nonce::new(3))]).unwrap();
        s = crate::model::append_action(&s, odd.into()).unwrap();
        let (m, s2, ib, _) = run_steps(&b, &s, &Inbox::new(), &Fresh::new(), 2);
        assert_eq!(m.locals().from, Some(uid("I")));
        assert!(ib.is_consumed(&uid("B"), 1));
        assert!(!ib.is_consumed(&uid("B"), 2));
        assert_eq!(ib.unread(&s2, &uid("B")).len(), 2);
    }

    #[test]
    fn ghost_sender_does_not_influence_steps() {
        let b = RoleMachine::receiver(uid("B"), Variant::Ns);
        let content = vec![Item::Uid(uid("A")), Item::Nonce(Nonce::new(7))];
        let mk = |sender: &str| {
            let m = Msg::new(uid("B"), uid(sender), content.clone()).unwrap();
            crate::model::append_action(&state(), m.into()).unwrap()
        };
        let (s_a, s_i) = (mk("A"), mk("I"));
        assert_eq!(
            Inbox::new().unread(&s_a, &uid("B")),
            Inbox::new().unread(&s_i, &uid("B"))
        );
        let (ma, _, ia, fa) = run_steps(&b, &s_a, &Inbox::new(), &Fresh::new(), 4);
        let (mi, _, ii, fi) = run_steps(&b, &s_i, &Inbox::new(), &Fresh::new(), 4);
        assert_eq!((ma, ia, fa), (mi, ii, fi));
    }

    #[test]
    fn honest_pairs() {
        for variant in [Variant::Ns, Variant::Nsl] {
            let (s, _) = run_honest_pair(&uid("A"), &uid("B"), variant).unwrap();
            let invents = s.history().iter().filter(|a| a.as_invent().is_some()).count();
            let msgs: Vec<&Msg> = s.history().iter().filter_map(|a| a.as_msg()).collect();
            assert_eq!((invents, msgs.len()), (2, 3));
            let b1_len = if variant == Variant::Ns { 2 } else { 3 };
            assert_eq!(msgs[1].content().len(), b1_len);
            let a = s.user(&uid("A")).unwrap();
            let b = s.user(&uid("B")).unwrap();
            let sf = Sid::new(uid("A"), 1);
            let st = Sid::new(uid("B"), 1);
            assert!(a.is_complete(&sf) && b.is_complete(&st));
            assert_eq!(a.knows_in(&sf), b.knows_in(&st));
            assert_eq!(a.knows_in(&sf).len(), 2);
        }
    }

    #[test]
    fn self_session_runs_in_two_sessions() {
        let (s, _) = run_honest_pair(&uid("A"), &uid("A"), Variant::Ns).unwrap();
        let a = s.user(&uid("A")).unwrap();
        let s1 = Sid::new(uid("A"), 1);
        let s2 = Sid::new(uid("A"), 2);
        assert!(a.is_complete(&s1) && a.is_complete(&s2));
        assert_eq!(a.partner(&s1), Some(&uid("A")));
        assert_eq!(a.partner(&s2), Some(&uid("A")));
    }
}
