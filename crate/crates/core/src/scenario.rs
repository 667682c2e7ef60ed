//! Scenario files: who takes part, which roles run, what the intruder does,
//! search bounds and the properties to check.
//!
//! ```text
//! nslab-scenario 1
//! name lowe-on-ns
//! level abstract
//! user A conforming
//! user B conforming
//! user I rogue
//! role A sender peer=I variant=ns
//! role B receiver variant=ns
//! intruder lowe-script me=I a=A b=B
//! bounds max_steps=64 max_content_len=2 max_intruder_invents=0 max_sessions_per_user=1
//! spec post-ns
//! ```
//!
//! One record per line, `#` starts a comment. `peer=any` leaves the
//! sender's partner to the scheduler. `pkey C as B` registers `pk(B)` as
//! C's public key, for corrupted-registry experiments.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::explorer::SearchBounds;
use crate::model::{GlobalState, PKey, Uid};
use crate::roles::Variant;
use crate::specs::SpecId;

pub const HEADER: &str = "nslab-scenario 1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Level {
    #[default]
    Abstract,
    Concrete,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Abstract => "abstract",
            Level::Concrete => "concrete",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "abstract" => Ok(Level::Abstract),
            "concrete" => Ok(Level::Concrete),
            _ => Err(format!("expected abstract or concrete, got `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RoleKind {
    /// `peer: None` means any other declared user, chosen by the scheduler.
    Sender {
        peer: Option<Uid>,
    },
    Receiver,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoleSpec {
    pub user: Uid,
    pub kind: RoleKind,
    pub variant: Variant,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IntruderSpec {
    None,
    LoweScript { me: Uid, a: Uid, b: Uid },
    Search { me: Uid },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub name: String,
    pub level: Level,
    pub users: Vec<(Uid, bool)>,
    pub roles: Vec<RoleSpec>,
    pub intruder: IntruderSpec,
    pub bounds: SearchBounds,
    pub specs: Vec<SpecId>,
    /// `(owner, key holder)`: `pkeys(owner) = pk(key holder)`.
    pub pkey_overrides: Vec<(Uid, Uid)>,
}

impl Scenario {
    /// Two conforming users running one exchange, no intruder.
    pub fn honest_pair(from: &Uid, to: &Uid, variant: Variant) -> Self {
        let mut users = vec![(from.clone(), true)];
        if to != from {
            users.push((to.clone(), true));
        }
        Scenario {
            name: format!("honest-{variant}"),
            level: Level::Abstract,
            users,
            roles: vec![
                RoleSpec {
                    user: from.clone(),
                    kind: RoleKind::Sender { peer: Some(to.clone()) },
                    variant,
                },
                RoleSpec {
                    user: to.clone(),
                    kind: RoleKind::Receiver,
                    variant,
                },
            ],
            intruder: IntruderSpec::None,
            bounds: SearchBounds::default(),
            specs: vec![SpecId::PostNs],
            pkey_overrides: Vec::new(),
        }
    }

    pub fn uids(&self) -> impl Iterator<Item = &Uid> {
        self.users.iter().map(|(u, _)| u)
    }

    pub fn conforms(&self, u: &Uid) -> bool {
        self.users.iter().any(|(v, c)| v == u && *c)
    }

    pub fn intruder_me(&self) -> Option<&Uid> {
        match &self.intruder {
            IntruderSpec::None => None,
            IntruderSpec::LoweScript { me, .. } | IntruderSpec::Search { me } => Some(me),
        }
    }

    /// The initial abstract state, registry overrides applied.
    pub fn initial_state(&self) -> Result<GlobalState> {
        let mut s = GlobalState::new(self.users.iter().cloned());
        for (owner, holder) in &self.pkey_overrides {
            s = s.with_pkey(owner, PKey::of(holder))?;
        }
        Ok(s)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        match lines.next() {
            Some((_, HEADER)) => {}
            Some((n, other)) => return Err(Error::parse(n, "header", format!("expected `{HEADER}`, got `{other}`"))),
            None => return Err(Error::parse(1, "header", "empty scenario")),
        }
        let mut name = None;
        let mut level = Level::Abstract;
        let mut users: Vec<(Uid, bool)> = Vec::new();
        let mut roles = Vec::new();
        let mut intruder: Option<(usize, IntruderSpec)> = None;
        let mut bounds = SearchBounds::default();
        let mut specs = Vec::new();
        let mut pkey_overrides = Vec::new();
        let mut refs: Vec<(usize, &'static str, Uid)> = Vec::new();

        for (n, line) in lines {
            let words: Vec<&str> = line.split_whitespace().collect();
            let (kw, rest) = (words[0], &words[1..]);
            match kw {
                "name" => {
                    let [v] = rest else {
                        return Err(Error::parse(n, "name", "expected one word"));
                    };
                    name = Some(v.to_string());
                }
                "level" => {
                    let [v] = rest else {
                        return Err(Error::parse(n, "level", "expected one word"));
                    };
                    level = v.parse().map_err(|e| Error::parse(n, "level", e))?;
                }
                "user" => {
                    let [id, mode] = rest else {
                        return Err(Error::parse(n, "user", "expected `user ID conforming|rogue`"));
                    };
                    let u = parse_uid(n, "user", id)?;
                    let conforms = match *mode {
                        "conforming" => true,
                        "rogue" => false,
                        _ => {
                            return Err(Error::parse(
                                n,
                                "conforms",
                                format!("expected conforming or rogue, got `{mode}`"),
                            ))
                        }
                    };
                    if users.iter().any(|(v, _)| *v == u) {
                        return Err(Error::parse(n, "user", format!("{u} declared twice")));
                    }
                    users.push((u, conforms));
                }
                "role" => {
                    let [id, kind, opts @ ..] = rest else {
                        return Err(Error::parse(n, "role", "expected `role ID sender|receiver ...`"));
                    };
                    let user = parse_uid(n, "role", id)?;
                    refs.push((n, "role", user.clone()));
                    let mut variant = None;
                    let mut peer = None;
                    for opt in opts {
                        match split_kv(n, opt)? {
                            ("variant", "ns") => variant = Some(Variant::Ns),
                            ("variant", "nsl") => variant = Some(Variant::Nsl),
                            ("variant", v) => {
                                return Err(Error::parse(n, "variant", format!("expected ns or nsl, got `{v}`")))
                            }
                            ("peer", "any") => peer = Some(None),
                            ("peer", v) => {
                                let p = parse_uid(n, "peer", v)?;
                                refs.push((n, "peer", p.clone()));
                                peer = Some(Some(p));
                            }
                            (k, _) => return Err(Error::parse(n, k, "unknown role option")),
                        }
                    }
                    let variant = variant.ok_or_else(|| Error::parse(n, "variant", "missing"))?;
                    let kind = match *kind {
                        "sender" => RoleKind::Sender {
                            peer: peer.ok_or_else(|| Error::parse(n, "peer", "a sender needs peer=ID or peer=any"))?,
                        },
                        "receiver" if peer.is_some() => {
                            return Err(Error::parse(n, "peer", "a receiver takes no peer"))
                        }
                        "receiver" => RoleKind::Receiver,
                        other => {
                            return Err(Error::parse(
                                n,
                                "role",
                                format!("expected sender or receiver, got `{other}`"),
                            ))
                        }
                    };
                    roles.push(RoleSpec { user, kind, variant });
                }
                "intruder" => {
                    if intruder.is_some() {
                        return Err(Error::parse(n, "intruder", "more than one intruder line"));
                    }
                    let spec = parse_intruder(n, rest)?;
                    intruder = Some((n, spec));
                }
                "bounds" => {
                    for opt in rest {
                        let (k, v) = split_kv(n, opt)?;
                        let num: usize = v
                            .parse()
                            .map_err(|_| Error::parse(n, k, format!("expected a non-negative integer, got `{v}`")))?;
                        match k {
                            "max_steps" => bounds.max_steps = num,
                            "max_content_len" => bounds.max_content_len = num,
                            "max_intruder_invents" => bounds.max_intruder_invents = num,
                            "max_sessions_per_user" => bounds.max_sessions_per_user = num,
                            "max_states" => bounds.max_states = Some(num),
                            _ => return Err(Error::parse(n, k, "unknown bound")),
                        }
                    }
                }
                "spec" => {
                    for s in rest {
                        let ids = SpecId::parse_many(s).map_err(|e| Error::parse(n, "spec", e))?;
                        for id in ids {
                            if !specs.contains(&id) {
                                specs.push(id);
                            }
                        }
                    }
                }
                "pkey" => {
                    let [owner, "as", holder] = rest else {
                        return Err(Error::parse(n, "pkey", "expected `pkey OWNER as HOLDER`"));
                    };
                    let owner = parse_uid(n, "pkey", owner)?;
                    let holder = parse_uid(n, "pkey", holder)?;
                    refs.push((n, "pkey", owner.clone()));
                    refs.push((n, "pkey", holder.clone()));
                    pkey_overrides.push((owner, holder));
                }
                other => return Err(Error::parse(n, other, "unknown record")),
            }
        }

        let Some((intruder_line, intruder)) = intruder else {
            return Err(Error::parse(
                0,
                "intruder",
                "missing (use `intruder none` for honest runs)",
            ));
        };
        match &intruder {
            IntruderSpec::None => {}
            IntruderSpec::LoweScript { me, a, b } => {
                for (f, u) in [("me", me), ("a", a), ("b", b)] {
                    refs.push((intruder_line, f, u.clone()));
                }
            }
            IntruderSpec::Search { me } => refs.push((intruder_line, "me", me.clone())),
        }
        let declared: BTreeSet<&Uid> = users.iter().map(|(u, _)| u).collect();
        for (n, field, u) in &refs {
            if !declared.contains(u) {
                return Err(Error::parse(*n, *field, format!("user {u} is not declared")));
            }
        }
        let me = match &intruder {
            IntruderSpec::LoweScript { me, .. } | IntruderSpec::Search { me } => Some(me),
            IntruderSpec::None => None,
        };
        if let Some(me) = me {
            if users.iter().any(|(u, c)| u == me && *c) {
                return Err(Error::parse(
                    intruder_line,
                    "me",
                    format!("intruder {me} must be declared rogue"),
                ));
            }
            if roles.iter().any(|r| &r.user == me) {
                return Err(Error::parse(
                    intruder_line,
                    "me",
                    format!("intruder {me} cannot also run a role"),
                ));
            }
        }
        Ok(Scenario {
            name: name.unwrap_or_else(|| "unnamed".to_string()),
            level,
            users,
            roles,
            intruder,
            bounds,
            specs,
            pkey_overrides,
        })
    }

    /// Canonical text form; `parse(render(s)) == s`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for l in self.lines() {
            out.push_str(&l);
            out.push('\n');
        }
        out
    }

    pub fn lines(&self) -> Vec<String> {
        let mut v = vec![
            HEADER.to_string(),
            format!("name {}", self.name),
            format!("level {}", self.level),
        ];
        for (u, c) in &self.users {
            v.push(format!("user {u} {}", if *c { "conforming" } else { "rogue" }));
        }
        for r in &self.roles {
            v.push(match &r.kind {
                RoleKind::Sender { peer } => format!(
                    "role {} sender peer={} variant={}",
                    r.user,
                    peer.as_ref().map_or("any".to_string(), Uid::to_string),
                    r.variant
                ),
                RoleKind::Receiver => format!("role {} receiver variant={}", r.user, r.variant),
            });
        }
        v.push(match &self.intruder {
            IntruderSpec::None => "intruder none".to_string(),
            IntruderSpec::LoweScript { me, a, b } => format!("intruder lowe-script me={me} a={a} b={b}"),
            IntruderSpec::Search { me } => format!("intruder search me={me}"),
        });
        let b = &self.bounds;
        let mut bl = format!(
            "bounds max_steps={} max_content_len={} max_intruder_invents={} max_sessions_per_user={}",
            b.max_steps, b.max_content_len, b.max_intruder_invents, b.max_sessions_per_user
        );
        if let Some(m) = b.max_states {
            bl.push_str(&format!(" max_states={m}"));
        }
        v.push(bl);
        if !self.specs.is_empty() {
            let names: Vec<&str> = self.specs.iter().map(|s| s.as_str()).collect();
            v.push(format!("spec {}", names.join(" ")));
        }
        for (o, h) in &self.pkey_overrides {
            v.push(format!("pkey {o} as {h}"));
        }
        v
    }
}

fn split_kv(line: usize, opt: &str) -> Result<(&str, &str)> {
    opt.split_once('=')
        .ok_or_else(|| Error::parse(line, opt, "expected key=value"))
}

fn parse_uid(line: usize, field: &str, s: &str) -> Result<Uid> {
    let ok_chars = !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    let looks_like_nonce = s.len() > 1 && s.starts_with('n') && s[1..].chars().all(|c| c.is_ascii_digit());
    if !ok_chars || looks_like_nonce || s == "any" {
        return Err(Error::parse(line, field, format!("`{s}` is not a valid user id")));
    }
    Ok(Uid::new(s))
}

fn parse_intruder(n: usize, rest: &[&str]) -> Result<IntruderSpec> {
    let Some((kind, opts)) = rest.split_first() else {
        return Err(Error::parse(n, "intruder", "expected none, lowe-script or search"));
    };
    let get = |key: &str| -> Result<Uid> {
        let v = opts
            .iter()
            .filter_map(|o| o.split_once('='))
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v)
            .ok_or_else(|| Error::parse(n, key, "missing"))?;
        parse_uid(n, key, v)
    };
    match *kind {
        "none" if opts.is_empty() => Ok(IntruderSpec::None),
        "lowe-script" => {
            let (me, a, b) = (get("me")?, get("a")?, get("b")?);
            if me == a || me == b || a == b {
                return Err(Error::parse(n, "intruder", "me, a and b must be distinct"));
            }
            Ok(IntruderSpec::LoweScript { me, a, b })
        }
        "search" => Ok(IntruderSpec::Search { me: get("me")? }),
        other => Err(Error::parse(n, "intruder", format!("unknown intruder `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LOWE: &str = "nslab-scenario 1
# relay attack
name lowe-on-ns
user A conforming
user B conforming
user I rogue
role A sender peer=I variant=ns
role B receiver variant=ns
intruder lowe-script me=I a=A b=B
spec post-ns
";

    #[test]
    fn parse_and_round_trip() {
        let s = Scenario::parse(LOWE).unwrap();
        assert_eq!(s.name, "lowe-on-ns");
        assert_eq!(s.users.len(), 3);
        assert_eq!(
            s.roles[0].kind,
            RoleKind::Sender {
                peer: Some(Uid::new("I"))
            }
        );
        assert_eq!(Scenario::parse(&s.render()).unwrap(), s);
    }

    fn err_field(text: &str) -> String {
        match Scenario::parse(text) {
            Err(Error::Parse { field, .. }) => field,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn errors_name_the_field() {
        assert_eq!(err_field(&LOWE.replace("peer=I", "peer=Z")), "peer");
        assert_eq!(
            err_field(&LOWE.replace("variant=ns\nrole B", "variant=xx\nrole B")),
            "variant"
        );
        assert_eq!(
            err_field(&LOWE.replace("intruder lowe-script me=I a=A b=B\n", "")),
            "intruder"
        );
        assert_eq!(err_field(&format!("{LOWE}intruder none\n")), "intruder");
        assert_eq!(err_field(&LOWE.replace("user I rogue", "user I conforming")), "me");
        assert_eq!(
            err_field(&LOWE.replace("user B conforming", "user n7 conforming")),
            "user"
        );
        assert_eq!(err_field(&format!("{LOWE}bounds max_steps=x\n")), "max_steps");
        assert_eq!(err_field(&LOWE.replace("nslab-scenario 1", "scenario 2")), "header");
        assert_eq!(err_field(&format!("{LOWE}spec bogus\n")), "spec");
    }

    #[test]
    fn honest_pair_round_trips() {
        let s = Scenario::honest_pair(&Uid::new("A"), &Uid::new("A"), Variant::Nsl);
        assert_eq!(s.users.len(), 1);
        assert_eq!(Scenario::parse(&s.render()).unwrap(), s);
    }
}
