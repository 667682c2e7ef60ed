//! Dolev-Yao intruder: a non-conforming principal that sees every entry of
//! the history, reads only what is addressed (or encrypted) to it, and
//! composes new messages from what it has learned.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::Result;
use crate::medium::Medium;
use crate::model::{render_content, Item, Nonce, Sid, Uid};
use crate::roles::Inbox;

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct IntruderKnowledge {
    pub known_items: BTreeSet<Item>,
    /// History entries the intruder has seen but cannot read.
    pub observed_opaque: BTreeSet<usize>,
}

impl IntruderKnowledge {
    pub fn nonces(&self) -> impl Iterator<Item = Nonce> + '_ {
        self.known_items.iter().filter_map(Item::as_nonce)
    }

    pub fn uids(&self) -> impl Iterator<Item = &Uid> + '_ {
        self.known_items.iter().filter_map(Item::as_uid)
    }
}

/// Everything `me` can derive from the medium: all principal names, the
/// items of messages it can open, and the indices of those it cannot.
pub fn closure<M: Medium>(knowledge: &IntruderKnowledge, state: &M, me: &Uid) -> IntruderKnowledge {
    let mut k = knowledge.clone();
    k.known_items.extend(state.users().keys().cloned().map(Item::Uid));
    for idx in 0..state.len() {
        if !state.is_message(idx) {
            continue;
        }
        match state.open(idx, me) {
            Some(view) => k.known_items.extend(view.content),
            None => {
                k.observed_opaque.insert(idx);
            }
        }
    }
    k
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum IntruderMove {
    InventNonce,
    Compose { rec: Uid, content: Vec<Item> },
    ReplayOpaque(usize),
}

impl fmt::Display for IntruderMove {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntruderMove::InventNonce => f.write_str("invent"),
            IntruderMove::Compose { rec, content } => {
                write!(f, "compose rec={rec} content={}", render_content(content))
            }
            IntruderMove::ReplayOpaque(i) => write!(f, "replay idx={}", i + 1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MoveBounds {
    pub max_content: usize,
    pub invents_left: usize,
}

/// All moves available under `bounds`, in a fixed order: compositions by
/// recipient then content (shorter first, items in their natural order),
/// then replays by index, then invention.
pub fn legal_moves(knowledge: &IntruderKnowledge, bounds: MoveBounds) -> Vec<IntruderMove> {
    let items: Vec<&Item> = knowledge.known_items.iter().collect();
    let mut contents: Vec<Vec<Item>> = Vec::new();
    let mut layer: Vec<Vec<Item>> = vec![Vec::new()];
    for _ in 0..bounds.max_content {
        layer = layer
            .iter()
            .flat_map(|prefix| {
                items.iter().map(move |it| {
                    let mut c = prefix.clone();
                    c.push((*it).clone());
                    c
                })
            })
            .collect();
        contents.extend(layer.iter().cloned());
    }
    let mut moves = Vec::new();
    for rec in knowledge.uids() {
        for content in &contents {
            moves.push(IntruderMove::Compose {
                rec: rec.clone(),
                content: content.clone(),
            });
        }
    }
    moves.extend(knowledge.observed_opaque.iter().map(|&i| IntruderMove::ReplayOpaque(i)));
    if bounds.invents_left > 0 {
        moves.push(IntruderMove::InventNonce);
    }
    moves
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Lowe's relay: forward `[a, N]` and `[N]` arriving at `me` to `b`.
    LoweScript { a: Uid, b: Uid },
    /// Any legal move; the explorer picks.
    Search { max_content: usize, max_invents: usize },
}

/// The intruder principal as an actor of a run.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Intruder {
    me: Uid,
    mode: Mode,
    session: Sid,
    knowledge: IntruderKnowledge,
    invented: usize,
    moves: usize,
}

impl Intruder {
    pub fn new(me: Uid, mode: Mode) -> Self {
        Intruder {
            session: Sid::new(me.clone(), 1),
            me,
            mode,
            knowledge: IntruderKnowledge::default(),
            invented: 0,
            moves: 0,
        }
    }

    pub fn lowe_script(me: Uid, a: Uid, b: Uid) -> Self {
        Self::new(me, Mode::LoweScript { a, b })
    }

    pub fn me(&self) -> &Uid {
        &self.me
    }

    pub fn mode(&self) -> &Mode {
        &self.mode
    }

    /// The session the intruder records its knowledge under.
    pub fn session(&self) -> &Sid {
        &self.session
    }

    pub fn knowledge(&self) -> &IntruderKnowledge {
        &self.knowledge
    }

    /// Number of moves taken so far.
    pub fn moves(&self) -> usize {
        self.moves
    }

    /// Enter the intruder's session in its user record: `intPartner` is the
    /// intruder itself, `knows` starts empty.
    pub fn register<M: Medium>(&self, state: &mut M) -> Result<()> {
        let rec = state.user_mut(&self.me)?;
        rec.join(&self.session);
        rec.int_partner.insert(self.session.clone(), self.me.clone());
        Ok(())
    }

    pub fn bounds(&self) -> MoveBounds {
        match self.mode {
            Mode::Search {
                max_content,
                max_invents,
            } => MoveBounds {
                max_content,
                invents_left: max_invents.saturating_sub(self.invented),
            },
            Mode::LoweScript { .. } => MoveBounds {
                max_content: 0,
                invents_left: 0,
            },
        }
    }

    /// Current knowledge including everything now visible on the medium.
    pub fn current<M: Medium>(&self, state: &M) -> IntruderKnowledge {
        closure(&self.knowledge, state, &self.me)
    }

    /// Legal moves in search mode; empty for the script.
    pub fn legal_moves<M: Medium>(&self, state: &M) -> Vec<IntruderMove> {
        match self.mode {
            Mode::Search { .. } => legal_moves(&self.current(state), self.bounds()),
            Mode::LoweScript { .. } => Vec::new(),
        }
    }

    /// The message the script would forward next: the most recent unread one
    /// readable by `me` shaped `[a, N]` or `[N]`.
    pub fn script_trigger<M: Medium>(&self, state: &M, inbox: &Inbox) -> Option<(usize, Vec<Item>)> {
        let Mode::LoweScript { a, .. } = &self.mode else {
            return None;
        };
        inbox
            .unread(state, &self.me)
            .into_iter()
            .map(|(i, v)| (i, v.content))
            .find(|(_, c)| match c.as_slice() {
                [Item::Uid(u), Item::Nonce(_)] => u == a,
                [Item::Nonce(_)] => true,
                _ => false,
            })
    }

    /// Absorb what is visible and mirror the nonces into `knows(session)`.
    fn absorb<M: Medium>(&mut self, state: &mut M) -> Result<()> {
        self.knowledge = self.current(state);
        let nonces: Vec<Nonce> = self.knowledge.nonces().collect();
        let rec = state.user_mut(&self.me)?;
        for n in nonces {
            rec.learn(&self.session, n);
        }
        Ok(())
    }

    /// Take one scripted step. Returns `None` when the script has nothing
    /// to react to.
    pub fn script_step<M: Medium>(&self, state: &M, inbox: &Inbox) -> Result<Option<(Intruder, M, Inbox, usize)>> {
        let Mode::LoweScript { b, .. } = &self.mode else {
            return Ok(None);
        };
        let Some((idx, content)) = self.script_trigger(state, inbox) else {
            return Ok(None);
        };
        let mut me = self.clone();
        let mut st = state.clone();
        let mut ib = inbox.clone();
        ib.consume(&self.me, idx);
        me.absorb(&mut st)?;
        st.send(&self.me, b, content)?;
        me.moves += 1;
        Ok(Some((me, st, ib, idx)))
    }

    /// Apply a search move. `fresh` supplies invented nonces.
    pub fn apply<M: Medium>(
        &self,
        mv: &IntruderMove,
        state: &M,
        fresh: &mut crate::model::Fresh,
    ) -> Result<(Intruder, M)> {
        let mut me = self.clone();
        let mut st = state.clone();
        me.absorb(&mut st)?;
        match mv {
            IntruderMove::InventNonce => {
                let n = fresh.nonce();
                st.invent(&self.me, n)?;
                me.knowledge.known_items.insert(Item::Nonce(n));
                st.user_mut(&self.me)?.learn(&self.session, n);
                me.invented += 1;
            }
            IntruderMove::Compose { rec, content } => st.send(&self.me, rec, content.clone())?,
            IntruderMove::ReplayOpaque(idx) => st.replay(*idx, &self.me)?,
        }
        me.moves += 1;
        Ok((me, st))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{append_action, GlobalState, Msg};

    fn uid(s: &str) -> Uid {
        Uid::new(s)
    }

    fn abi() -> GlobalState {
        GlobalState::new([(uid("A"), true), (uid("B"), true), (uid("I"), false)])
    }

    fn with_msg(s: &GlobalState, rec: &str, sender: &str, content: Vec<Item>) -> GlobalState {
        append_action(s, Msg::new(uid(rec), uid(sender), content).unwrap().into()).unwrap()
    }

    fn n(i: u32) -> Item {
        Item::Nonce(Nonce::new(i))
    }

    #[test]
    fn closure_reads_own_mail() {
        let s = with_msg(&abi(), "I", "A", vec![Item::Uid(uid("A")), n(1)]);
        let k = closure(&IntruderKnowledge::default(), &s, &uid("I"));
        assert!(k.known_items.contains(&Item::Uid(uid("A"))));
        assert!(k.known_items.contains(&n(1)));
        assert!(k.observed_opaque.is_empty());
    }

    #[test]
    fn closure_cannot_read_others_mail() {
        let s = with_msg(&abi(), "B", "A", vec![Item::Uid(uid("A")), n(1)]);
        let k = closure(&IntruderKnowledge::default(), &s, &uid("I"));
        assert!(!k.known_items.contains(&n(1)));
        assert_eq!(k.observed_opaque, BTreeSet::from([0]));
    }

    #[test]
    fn closure_of_empty_history_is_the_names() {
        let k = closure(&IntruderKnowledge::default(), &abi(), &uid("I"));
        let expected: BTreeSet<Item> = ["A", "B", "I"].into_iter().map(|u| Item::Uid(uid(u))).collect();
        assert_eq!(k.known_items, expected);
    }

    #[test]
    fn closure_is_idempotent() {
        let s = with_msg(&abi(), "I", "A", vec![Item::Uid(uid("A")), n(1)]);
        let s = with_msg(&s, "B", "A", vec![n(2)]);
        let k1 = closure(&IntruderKnowledge::default(), &s, &uid("I"));
        assert_eq!(closure(&k1, &s, &uid("I")), k1);
    }

    #[test]
    fn move_counts() {
        let k = closure(&IntruderKnowledge::default(), &abi(), &uid("I"));
        let moves = legal_moves(
            &k,
            MoveBounds {
                max_content: 1,
                invents_left: 1,
            },
        );
        let composes = moves
            .iter()
            .filter(|m| matches!(m, IntruderMove::Compose { .. }))
            .count();
        assert_eq!(composes, 9);
        assert_eq!(moves.len(), 10);
        assert_eq!(moves.last(), Some(&IntruderMove::InventNonce));

        let none = legal_moves(
            &k,
            MoveBounds {
                max_content: 0,
                invents_left: 0,
            },
        );
        assert!(none.is_empty());
    }

    #[test]
    fn moves_include_lowe_d1() {
        let s = with_msg(&abi(), "I", "A", vec![Item::Uid(uid("A")), n(1)]);
        let k = closure(&IntruderKnowledge::default(), &s, &uid("I"));
        let moves = legal_moves(
            &k,
            MoveBounds {
                max_content: 2,
                invents_left: 0,
            },
        );
        assert!(moves.contains(&IntruderMove::Compose {
            rec: uid("B"),
            content: vec![Item::Uid(uid("A")), n(1)],
        }));
        // 4 known items: 4 + 16 contents for each of 3 recipients
        assert_eq!(moves.len(), 3 * (4 + 16));
    }

    #[test]
    fn script_waits_without_trigger() {
        let i = Intruder::lowe_script(uid("I"), uid("A"), uid("B"));
        assert!(i.script_step(&abi(), &Inbox::new()).unwrap().is_none());
        let s = with_msg(&abi(), "B", "A", vec![Item::Uid(uid("A")), n(1)]);
        assert!(i.script_step(&s, &Inbox::new()).unwrap().is_none());
    }

    #[test]
    fn script_forwards_a1_to_b() {
        let mut s = abi();
        let i = Intruder::lowe_script(uid("I"), uid("A"), uid("B"));
        i.register(&mut s).unwrap();
        let s = with_msg(&s, "I", "A", vec![Item::Uid(uid("A")), n(1)]);
        let (i2, s2, ib, idx) = i.script_step(&s, &Inbox::new()).unwrap().unwrap();
        assert_eq!(idx, 0);
        assert!(ib.is_consumed(&uid("I"), 0));
        let d1 = s2.history()[1].as_msg().unwrap();
        assert_eq!(d1.rec(), &uid("B"));
        assert_eq!(d1.ghost_sender(), &uid("I"));
        assert_eq!(d1.content(), &[Item::Uid(uid("A")), n(1)]);
        assert_eq!(i2.moves(), 1);
        let rec = s2.user(&uid("I")).unwrap();
        assert!(rec.knows_in(i2.session()).contains(&Nonce::new(1)));
        // consumed: nothing further to do
        assert!(i2.script_step(&s2, &ib).unwrap().is_none());
    }

    #[test]
    fn replay_keeps_content_and_rec() {
        let mut s = abi();
        let i = Intruder::new(
            uid("I"),
            Mode::Search {
                max_content: 0,
                max_invents: 0,
            },
        );
        i.register(&mut s).unwrap();
        let s = with_msg(&s, "B", "A", vec![Item::Uid(uid("A")), n(1)]);
        let moves = i.legal_moves(&s);
        assert_eq!(moves, vec![IntruderMove::ReplayOpaque(0)]);
        let (_, s2) = i.apply(&moves[0], &s, &mut crate::model::Fresh::new()).unwrap();
        let (a, b) = (s2.history()[0].as_msg().unwrap(), s2.history()[1].as_msg().unwrap());
        assert_eq!(a.view(), b.view());
        assert_eq!(b.ghost_sender(), &uid("I"));
    }
}
