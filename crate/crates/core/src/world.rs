//! A run in progress: the medium, who has read what, the role machines,
//! the intruder and the fresh-value supply. Every transition goes through
//! [`World::apply`].

use std::fmt;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::explorer::SearchBounds;
use crate::intruder::{Intruder, IntruderMove, Mode};
use crate::medium::Medium;
use crate::model::{Fresh, Uid};
use crate::roles::{Effect, Inbox, Outcome, Role, RoleMachine, Status};
use crate::scenario::{IntruderSpec, RoleKind, Scenario};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Event {
    /// Step machine `index`. `peer` binds the partner of a sender whose
    /// scenario left it open; it is only accepted on the first step.
    Machine { index: usize, peer: Option<Uid> },
    /// One step of the scripted intruder.
    Script,
    /// One search move of the intruder.
    Intruder(IntruderMove),
    /// Start another receiver instance for a user.
    Spawn(Uid),
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Machine { index, peer: None } => write!(f, "machine {index}"),
            Event::Machine { index, peer: Some(p) } => write!(f, "machine {index} peer={p}"),
            Event::Script => f.write_str("script"),
            Event::Intruder(m) => write!(f, "intruder {m}"),
            Event::Spawn(u) => write!(f, "spawn {u}"),
        }
    }
}

/// What one applied event did, as it appears in a trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepRecord {
    pub event: Event,
    pub actor: String,
    pub stmt: String,
    /// Abort reason, when the step aborted its machine.
    pub abort: Option<String>,
    /// Rendered appended action, ghost fields included.
    pub action: Option<String>,
    pub digest: String,
}

impl StepRecord {
    /// Owner of the acting machine, if the actor is a role machine.
    pub fn machine_index(&self) -> Option<usize> {
        match self.event {
            Event::Machine { index, .. } => Some(index),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct World<M> {
    pub medium: M,
    pub inbox: Inbox,
    pub machines: Vec<RoleMachine>,
    pub intruder: Option<Intruder>,
    pub fresh: Fresh,
}

impl<M: Medium> World<M> {
    pub fn init(scenario: &Scenario) -> Result<Self> {
        let mut medium = M::from_abstract(scenario.initial_state()?)?;
        let machines = scenario
            .roles
            .iter()
            .map(|r| match &r.kind {
                RoleKind::Sender { peer } => RoleMachine::sender(r.user.clone(), peer.clone(), r.variant),
                RoleKind::Receiver => RoleMachine::receiver(r.user.clone(), r.variant),
            })
            .collect();
        let intruder = match &scenario.intruder {
            IntruderSpec::None => None,
            IntruderSpec::LoweScript { me, a, b } => Some(Intruder::lowe_script(me.clone(), a.clone(), b.clone())),
            IntruderSpec::Search { me } => Some(Intruder::new(
                me.clone(),
                Mode::Search {
                    max_content: scenario.bounds.max_content_len,
                    max_invents: scenario.bounds.max_intruder_invents,
                },
            )),
        };
        if let Some(i) = &intruder {
            i.register(&mut medium)?;
        }
        Ok(World {
            medium,
            inbox: Inbox::new(),
            machines,
            intruder,
            fresh: Fresh::new(),
        })
    }

    pub fn actor_name(&self, event: &Event) -> String {
        match event {
            Event::Machine { index, .. } => match self.machines.get(*index) {
                Some(m) => format!("{}.{}#{index}", m.owner(), m.role().name()),
                None => format!("?#{index}"),
            },
            Event::Script | Event::Intruder(_) => match &self.intruder {
                Some(i) => format!("{}.intruder", i.me()),
                None => "?.intruder".to_string(),
            },
            Event::Spawn(u) => format!("{u}.spawn"),
        }
    }

    fn not_enabled(&self, event: &Event, reason: impl Into<String>) -> Error {
        Error::NotEnabled {
            step: 0,
            actor: self.actor_name(event),
            reason: reason.into(),
        }
    }

    /// Apply one event. Events that would not change anything (a blocked
    /// machine, a script with nothing to forward) are rejected.
    pub fn apply(&self, event: &Event) -> Result<(World<M>, StepRecord)> {
        let mut next = self.clone();
        let before = self.medium.len();
        let (stmt, abort) = match event {
            Event::Machine { index, peer } => {
                let Some(m) = self.machines.get(*index) else {
                    return Err(self.not_enabled(event, "no such machine"));
                };
                let m = match (peer, m.role()) {
                    (None, _) => m.clone(),
                    (Some(p), Role::Sender { to: None }) if m.pc() == 0 => {
                        if p == m.owner() {
                            return Err(self.not_enabled(event, "a sender cannot choose itself"));
                        }
                        m.with_peer(p.clone())
                    }
                    (Some(_), _) => return Err(self.not_enabled(event, "peer already bound")),
                };
                if !m.can_step(&self.medium, &self.inbox) {
                    return Err(self.not_enabled(event, "machine cannot step"));
                }
                let out = m.step(&self.medium, &self.inbox, &self.fresh)?;
                next.machines[*index] = out.machine;
                next.medium = out.state;
                next.inbox = out.inbox;
                next.fresh = out.fresh;
                let Effect { stmt, outcome, .. } = out.effect;
                let abort = match outcome {
                    Outcome::Aborted(why) => Some(why),
                    _ => None,
                };
                (stmt.label().to_string(), abort)
            }
            Event::Script => {
                let Some(i) = &self.intruder else {
                    return Err(self.not_enabled(event, "no intruder"));
                };
                let Some((i2, st, ib, _)) = i.script_step(&self.medium, &self.inbox)? else {
                    return Err(self.not_enabled(event, "nothing to forward"));
                };
                next.intruder = Some(i2);
                next.medium = st;
                next.inbox = ib;
                ("forward".to_string(), None)
            }
            Event::Intruder(mv) => {
                let Some(i) = &self.intruder else {
                    return Err(self.not_enabled(event, "no intruder"));
                };
                if !matches!(i.mode(), Mode::Search { .. }) {
                    return Err(self.not_enabled(event, "scripted intruder"));
                }
                let legal = match mv {
                    IntruderMove::InventNonce => i.bounds().invents_left > 0,
                    IntruderMove::Compose { rec, content } => {
                        let k = i.current(&self.medium);
                        content.len() <= i.bounds().max_content
                            && k.known_items.contains(&rec.clone().into())
                            && content.iter().all(|it| k.known_items.contains(it))
                    }
                    IntruderMove::ReplayOpaque(idx) => i.current(&self.medium).observed_opaque.contains(idx),
                };
                if !legal {
                    return Err(self.not_enabled(event, format!("illegal move {mv}")));
                }
                let (i2, st) = i.apply(mv, &self.medium, &mut next.fresh)?;
                next.intruder = Some(i2);
                next.medium = st;
                (mv.to_string(), None)
            }
            Event::Spawn(u) => {
                let Some(variant) = self
                    .machines
                    .iter()
                    .find(|m| m.owner() == u && *m.role() == Role::Receiver)
                    .map(RoleMachine::variant)
                else {
                    return Err(self.not_enabled(event, "user runs no receiver"));
                };
                next.machines.push(RoleMachine::receiver(u.clone(), variant));
                ("spawn".to_string(), None)
            }
        };
        let action = (next.medium.len() > before).then(|| next.medium.record(before, true));
        let record = StepRecord {
            event: event.clone(),
            actor: self.actor_name(event),
            stmt,
            abort,
            action,
            digest: next.digest(),
        };
        Ok((next, record))
    }

    /// Short stable hash of the whole world, ghost fields included.
    ///
    /// `Blocked` is folded into `Running`: the two differ only in whether a
    /// machine has polled an empty inbox, which is not a transition.
    pub fn digest(&self) -> String {
        let mut w = self.clone();
        for m in &mut w.machines {
            m.normalize_status();
        }
        let h = Sha256::digest(format!("{w:?}").as_bytes());
        h.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Machine events that can fire, in tie-break order. A sender whose
    /// partner is open fans out over the other users by name.
    pub fn machine_events(&self) -> Vec<Event> {
        let mut out = Vec::new();
        for (index, m) in self.machines.iter().enumerate() {
            if let (Role::Sender { to: None }, 0, false) = (m.role(), m.pc(), m.status().is_terminal()) {
                for u in self.medium.users().keys().filter(|u| *u != m.owner()) {
                    out.push(Event::Machine {
                        index,
                        peer: Some(u.clone()),
                    });
                }
            } else if m.can_step(&self.medium, &self.inbox) {
                out.push(Event::Machine { index, peer: None });
            }
        }
        out
    }

    /// Extra receiver instances allowed by `max_sessions_per_user`.
    pub fn spawn_events(&self, bounds: &SearchBounds) -> Vec<Event> {
        let mut users: Vec<&Uid> = self
            .machines
            .iter()
            .filter(|m| *m.role() == Role::Receiver)
            .map(RoleMachine::owner)
            .collect();
        users.sort();
        users.dedup();
        users
            .into_iter()
            .filter(|u| {
                let mine: Vec<&RoleMachine> = self.machines.iter().filter(|m| m.owner() == *u).collect();
                mine.len() < bounds.max_sessions_per_user
                    && mine
                        .iter()
                        .filter(|m| *m.role() == Role::Receiver)
                        .all(|m| m.session().is_some())
            })
            .map(|u| Event::Spawn(u.clone()))
            .collect()
    }

    pub fn script_enabled(&self) -> bool {
        self.intruder
            .as_ref()
            .is_some_and(|i| i.script_trigger(&self.medium, &self.inbox).is_some())
    }

    /// No role machine can move.
    pub fn machine_quiescent(&self) -> bool {
        self.machine_events().is_empty()
    }

    /// No role machine can move and the script has nothing to do.
    pub fn quiescent(&self) -> bool {
        self.machine_quiescent() && !self.script_enabled()
    }

    pub fn all_terminal(&self) -> bool {
        self.machines.iter().all(|m| m.status().is_terminal())
    }

    /// Machines with the given status.
    pub fn count(&self, status: Status) -> usize {
        self.machines.iter().filter(|m| m.status() == status).count()
    }
}
