//! The shared medium role machines and the intruder act on.
//!
//! At the abstract level readability is the `rec` field; at the concrete
//! level ([`crate::crypto::WireState`]) it is decryption with the reader's
//! secret key. Machines are written once against this trait.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::hash::Hash;

use crate::error::{Error, Result};
use crate::model::{render_content, Action, GlobalState, Invent, Item, Msg, MsgView, Nonce, Uid, UserState};

pub trait Medium: Clone + PartialEq + Eq + Hash + Debug + Send + Sync {
    fn users(&self) -> &BTreeMap<Uid, UserState>;

    fn user_mut(&mut self, u: &Uid) -> Result<&mut UserState>;

    /// Number of history entries.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn is_message(&self, idx: usize) -> bool;

    /// The view of entry `idx` if it is a message `reader` can read.
    fn open(&self, idx: usize, reader: &Uid) -> Option<MsgView>;

    /// Meta-level view of entry `idx`, regardless of who may read it. For
    /// drivers and checkers only; principals go through [`Medium::open`].
    fn peek(&self, idx: usize) -> Option<MsgView>;

    /// Build the medium for an abstract state with an empty history.
    fn from_abstract(state: GlobalState) -> Result<Self>;

    /// Record that `user` invented `what`.
    fn invent(&mut self, user: &Uid, what: Nonce) -> Result<()>;

    /// Emit a message for `to`; `from` is the ghost sender.
    fn send(&mut self, from: &Uid, to: &Uid, content: Vec<Item>) -> Result<()>;

    /// Re-emit entry `idx` unchanged except for the ghost sender.
    fn replay(&mut self, idx: usize, by: &Uid) -> Result<()>;

    /// Trace rendering of entry `idx`; ghost fields only when `ghost` is set.
    fn record(&self, idx: usize, ghost: bool) -> String;

    /// The abstract state this medium stands for.
    fn project(&self) -> Result<GlobalState>;
}

impl Medium for GlobalState {
    fn users(&self) -> &BTreeMap<Uid, UserState> {
        GlobalState::users(self)
    }

    fn user_mut(&mut self, u: &Uid) -> Result<&mut UserState> {
        GlobalState::user_mut(self, u)
    }

    fn len(&self) -> usize {
        self.history().len()
    }

    fn is_message(&self, idx: usize) -> bool {
        matches!(self.history().get(idx), Some(Action::Msg(_)))
    }

    fn open(&self, idx: usize, reader: &Uid) -> Option<MsgView> {
        match self.history().get(idx)? {
            Action::Msg(m) if m.rec() == reader => Some(m.view()),
            _ => None,
        }
    }

    fn peek(&self, idx: usize) -> Option<MsgView> {
        self.history().get(idx)?.as_msg().map(Msg::view)
    }

    fn from_abstract(state: GlobalState) -> Result<Self> {
        Ok(state)
    }

    fn invent(&mut self, user: &Uid, what: Nonce) -> Result<()> {
        self.push(Action::Invent(Invent {
            user: user.clone(),
            what,
        }))
    }

    fn send(&mut self, from: &Uid, to: &Uid, content: Vec<Item>) -> Result<()> {
        if self.user(to).is_none() {
            return Err(Error::UnknownUser(to.clone()));
        }
        self.push(Msg::new(to.clone(), from.clone(), content)?.into())
    }

    fn replay(&mut self, idx: usize, by: &Uid) -> Result<()> {
        let Some(Action::Msg(m)) = self.history().get(idx) else {
            return Err(Error::PreconditionUnmet(format!("entry {} is not a message", idx + 1)));
        };
        let copy = Msg::new(m.rec().clone(), by.clone(), m.content().to_vec())?;
        self.push(copy.into())
    }

    fn record(&self, idx: usize, ghost: bool) -> String {
        match &self.history()[idx] {
            Action::Invent(i) => format!("action=invent user={} what={}", i.user, i.what),
            Action::Msg(m) => {
                let mut s = format!("action=msg rec={} content={}", m.rec(), render_content(m.content()));
                if ghost {
                    s.push_str(&format!(" ghost:sender={}", m.ghost_sender()));
                }
                s
            }
        }
    }

    fn project(&self) -> Result<GlobalState> {
        Ok(self.clone())
    }
}
