//! Trace files: the scenario, one line per applied event with the digest of
//! the resulting world, and the final verdicts.
//!
//! ```text
//! nslab-trace 1
//! ghost on
//! scenario nslab-scenario 1
//! scenario name lowe-on-ns
//! ...
//! init digest=3f0c9a8d11e2b7a4
//! step 1 actor=A.sender#0 stmt=start digest=...
//! step 3 actor=A.sender#0 stmt=send-a1 action=msg rec=I content=[A,n1] ghost:sender=A digest=...
//! verdict spec=post-ns holds=false
//! failure spec=post-ns conjunct=secrecy detail="I:I#1 knows {n1,n2}"
//! end
//! ```
//!
//! Tokens are `key=value`; values with spaces are double-quoted. Fields
//! only a specification may look at are prefixed `ghost:`; with ghost off
//! they are omitted, which leaves the view available to the principals.
//! Replay re-executes the events, so either form replays.

use crate::error::{Error, Result};
use crate::intruder::IntruderMove;
use crate::medium::Medium;
use crate::model::{Item, Nonce, Uid};
use crate::scenario::Scenario;
use crate::specs::{Failure, SpecVerdict};
use crate::world::{Event, StepRecord, World};

pub const HEADER: &str = "nslab-trace 1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub scenario: Scenario,
    pub ghost: bool,
    pub init_digest: String,
    pub steps: Vec<StepRecord>,
    pub verdicts: Vec<SpecVerdict>,
}

/// Execute `events` from the scenario's initial world at its level and
/// record the result.
pub fn record(scenario: &Scenario, events: &[Event], verdicts: &[SpecVerdict]) -> Result<Trace> {
    match scenario.level {
        crate::scenario::Level::Abstract => record_at::<crate::model::GlobalState>(scenario, events, verdicts),
        crate::scenario::Level::Concrete => record_at::<crate::crypto::WireState>(scenario, events, verdicts),
    }
}

fn record_at<M: Medium>(scenario: &Scenario, events: &[Event], verdicts: &[SpecVerdict]) -> Result<Trace> {
    let mut w: World<M> = World::init(scenario)?;
    let init_digest = w.digest();
    let mut steps = Vec::with_capacity(events.len());
    for (i, ev) in events.iter().enumerate() {
        let (next, rec) = w.apply(ev).map_err(|e| at_step(e, i + 1))?;
        steps.push(rec);
        w = next;
    }
    Ok(Trace {
        scenario: scenario.clone(),
        ghost: true,
        init_digest,
        steps,
        verdicts: verdicts.iter().map(strip_counterexample).collect(),
    })
}

fn strip_counterexample(v: &SpecVerdict) -> SpecVerdict {
    SpecVerdict {
        counterexample: None,
        ..v.clone()
    }
}

fn at_step(e: Error, step: usize) -> Error {
    match e {
        Error::NotEnabled { actor, reason, .. } => Error::NotEnabled { step, actor, reason },
        other => other,
    }
}

fn quote(s: &str) -> String {
    if s.is_empty() || s.contains([' ', '"']) {
        format!("\"{}\"", s.replace('"', "'"))
    } else {
        s.to_string()
    }
}

fn strip_ghost(action: &str) -> String {
    action
        .split(' ')
        .filter(|t| !t.starts_with("ghost:"))
        .collect::<Vec<_>>()
        .join(" ")
}

impl Trace {
    pub fn without_ghost(&self) -> Trace {
        Trace {
            ghost: false,
            ..self.clone()
        }
    }

    /// Applied actions, ghost fields included when the trace has them.
    pub fn actions(&self) -> impl Iterator<Item = String> + '_ {
        self.steps
            .iter()
            .filter_map(|s| s.action.as_deref())
            .map(|a| self.show_action(a))
    }

    fn show_action(&self, a: &str) -> String {
        if self.ghost {
            a.to_string()
        } else {
            strip_ghost(a)
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut line = |s: String| {
            out.push_str(&s);
            out.push('\n');
        };
        line(HEADER.to_string());
        line(format!("ghost {}", if self.ghost { "on" } else { "off" }));
        for l in self.scenario.lines() {
            line(format!("scenario {l}"));
        }
        line(format!("init digest={}", self.init_digest));
        for (i, s) in self.steps.iter().enumerate() {
            let mut t = format!("step {} actor={} stmt={}", i + 1, s.actor, s.stmt);
            if let Event::Machine { peer: Some(p), .. } = &s.event {
                t.push_str(&format!(" peer={p}"));
            }
            if let Some(why) = &s.abort {
                t.push_str(&format!(" outcome=abort reason={}", quote(why)));
            }
            if let Some(a) = &s.action {
                t.push(' ');
                t.push_str(&self.show_action(a));
            }
            t.push_str(&format!(" digest={}", s.digest));
            line(t);
        }
        for v in &self.verdicts {
            line(format!("verdict spec={} holds={}", v.spec, v.holds));
            for f in &v.failures {
                line(format!(
                    "failure spec={} conjunct={} detail={}",
                    v.spec,
                    f.conjunct,
                    quote(&f.detail)
                ));
            }
            if let Some(r) = &v.rely_broken {
                line(format!("rely spec={} broken={}", v.spec, quote(r)));
            }
        }
        line("end".to_string());
        out
    }

    pub fn parse(text: &str) -> Result<Trace> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |field: &str| -> Result<(usize, &str)> {
            lines
                .next()
                .ok_or_else(|| Error::parse(0, field.to_string(), "unexpected end of trace"))
        };
        let (n, h) = next("header")?;
        if h != HEADER {
            return Err(Error::parse(n, "header", format!("expected `{HEADER}`")));
        }
        let (n, g) = next("ghost")?;
        let ghost = match g {
            "ghost on" => true,
            "ghost off" => false,
            _ => return Err(Error::parse(n, "ghost", "expected `ghost on` or `ghost off`")),
        };
        let mut scenario_text = String::new();
        let (mut n, mut l) = next("scenario")?;
        while let Some(rest) = l.strip_prefix("scenario ") {
            scenario_text.push_str(rest);
            scenario_text.push('\n');
            (n, l) = next("init")?;
        }
        let scenario = Scenario::parse(&scenario_text).map_err(|e| match e {
            Error::Parse { field, message, .. } => Error::parse(n, format!("scenario.{field}"), message),
            other => other,
        })?;
        let init_digest = l
            .strip_prefix("init digest=")
            .ok_or_else(|| Error::parse(n, "init", "expected `init digest=...`"))?
            .to_string();
        let mut steps = Vec::new();
        let mut verdicts: Vec<SpecVerdict> = Vec::new();
        loop {
            let (n, l) = next("end")?;
            if l == "end" {
                break;
            }
            let toks = tokenize(l).map_err(|m| Error::parse(n, "line", m))?;
            match toks.first().map(|(k, _)| k.as_str()) {
                Some("step") => steps.push(parse_step(n, &toks, steps.len() + 1)?),
                Some("verdict") => {
                    let spec = get(n, &toks, "spec")?;
                    let holds = get(n, &toks, "holds")? == "true";
                    let mut v = SpecVerdict::new(spec, Vec::new());
                    v.holds = holds;
                    verdicts.push(v);
                }
                Some("failure") => {
                    let v = verdicts
                        .last_mut()
                        .ok_or_else(|| Error::parse(n, "failure", "failure before verdict"))?;
                    v.failures.push(Failure {
                        conjunct: get(n, &toks, "conjunct")?,
                        detail: get(n, &toks, "detail")?,
                    });
                }
                Some("rely") => {
                    let v = verdicts
                        .last_mut()
                        .ok_or_else(|| Error::parse(n, "rely", "rely before verdict"))?;
                    v.rely_broken = Some(get(n, &toks, "broken")?);
                }
                _ => return Err(Error::parse(n, "line", format!("unexpected `{l}`"))),
            }
        }
        Ok(Trace {
            scenario,
            ghost,
            init_digest,
            steps,
            verdicts,
        })
    }
}

/// Split a line into `(key, value)` tokens; bare words have an empty value.
fn tokenize(line: &str) -> std::result::Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    let mut chars = line.chars().peekable();
    loop {
        while chars.peek() == Some(&' ') {
            chars.next();
        }
        if chars.peek().is_none() {
            return Ok(out);
        }
        let mut key = String::new();
        while let Some(&c) = chars.peek() {
            if c == ' ' || c == '=' {
                break;
            }
            key.push(c);
            chars.next();
        }
        let mut value = String::new();
        if chars.peek() == Some(&'=') {
            chars.next();
            if chars.peek() == Some(&'"') {
                chars.next();
                loop {
                    match chars.next() {
                        Some('"') => break,
                        Some(c) => value.push(c),
                        None => return Err("unterminated quote".to_string()),
                    }
                }
            } else {
                while let Some(&c) = chars.peek() {
                    if c == ' ' {
                        break;
                    }
                    value.push(c);
                    chars.next();
                }
            }
        }
        out.push((key, value));
    }
}

fn get(n: usize, toks: &[(String, String)], key: &str) -> Result<String> {
    find(toks, key).ok_or_else(|| Error::parse(n, key, "missing"))
}

fn find(toks: &[(String, String)], key: &str) -> Option<String> {
    toks.iter().find(|(k, _)| k == key).map(|(_, v)| v.clone())
}

pub fn parse_content(s: &str) -> std::result::Result<Vec<Item>, String> {
    let inner = s
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| format!("expected [..], got `{s}`"))?;
    inner
        .split(',')
        .map(|t| {
            let t = t.trim();
            match t.strip_prefix('n').and_then(|d| d.parse::<u32>().ok()) {
                Some(i) => Ok(Item::Nonce(Nonce::new(i))),
                None if !t.is_empty() => Ok(Item::Uid(Uid::new(t))),
                None => Err("empty item".to_string()),
            }
        })
        .collect()
}

fn parse_step(n: usize, toks: &[(String, String)], expected: usize) -> Result<StepRecord> {
    // first token is the bare word `step` followed by the index
    let idx: usize = toks
        .get(1)
        .filter(|(_, v)| v.is_empty())
        .and_then(|(k, _)| k.parse().ok())
        .ok_or_else(|| Error::parse(n, "step", "expected a step index"))?;
    if idx != expected {
        return Err(Error::parse(n, "step", format!("expected step {expected}, got {idx}")));
    }
    let actor = get(n, toks, "actor")?;
    let stmt_word = get(n, toks, "stmt")?;
    let digest = get(n, toks, "digest")?;
    let peer = find(toks, "peer").map(Uid::new);
    let (who, kind) = actor
        .rsplit_once('.')
        .ok_or_else(|| Error::parse(n, "actor", "expected OWNER.KIND"))?;
    let stmt_extra = |key: &str| -> Result<String> {
        // compose/replay parameters follow the stmt word
        let pos = toks.iter().position(|(k, _)| k == "stmt").unwrap_or(0);
        toks[pos + 1..]
            .iter()
            .take_while(|(k, _)| k != "action" && k != "digest")
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| Error::parse(n, key, "missing"))
    };
    let (event, stmt) = match kind {
        "intruder" => match stmt_word.as_str() {
            "forward" => (Event::Script, stmt_word.clone()),
            "invent" => (Event::Intruder(IntruderMove::InventNonce), stmt_word.clone()),
            "compose" => {
                let rec = Uid::new(stmt_extra("rec")?);
                let c = stmt_extra("content")?;
                let content = parse_content(&c).map_err(|m| Error::parse(n, "content", m))?;
                let stmt = format!("compose rec={rec} content={c}");
                (Event::Intruder(IntruderMove::Compose { rec, content }), stmt)
            }
            "replay" => {
                let i = stmt_extra("idx")?;
                let k: usize = i
                    .parse()
                    .ok()
                    .filter(|k| *k >= 1)
                    .ok_or_else(|| Error::parse(n, "idx", "expected a 1-based index"))?;
                (
                    Event::Intruder(IntruderMove::ReplayOpaque(k - 1)),
                    format!("replay idx={k}"),
                )
            }
            other => return Err(Error::parse(n, "stmt", format!("unknown intruder move `{other}`"))),
        },
        "spawn" => (Event::Spawn(Uid::new(who)), stmt_word.clone()),
        _ => {
            let index = kind
                .rsplit_once('#')
                .and_then(|(_, i)| i.parse().ok())
                .ok_or_else(|| Error::parse(n, "actor", "expected OWNER.ROLE#INDEX"))?;
            (Event::Machine { index, peer }, stmt_word.clone())
        }
    };
    let abort = find(toks, "reason");
    let action = toks.iter().position(|(k, _)| k == "action").map(|p| {
        toks[p..]
            .iter()
            .take_while(|(k, _)| k != "digest")
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    });
    Ok(StepRecord {
        event,
        actor,
        stmt,
        abort,
        action,
        digest,
    })
}

/// A successful replay: every world along the run and the records the
/// re-execution produced.
pub struct Replayed<M> {
    pub worlds: Vec<World<M>>,
    pub records: Vec<StepRecord>,
}

/// Where a replay first disagreed with the file. Step 0 is the initial state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Divergence {
    pub step: usize,
    pub reason: String,
}

/// Re-execute the trace at its scenario's level, checking every record.
pub fn replay<M: Medium>(trace: &Trace) -> Result<std::result::Result<Replayed<M>, Divergence>> {
    let mut w: World<M> = World::init(&trace.scenario)?;
    if w.digest() != trace.init_digest {
        return Ok(Err(Divergence {
            step: 0,
            reason: format!("initial digest {} != {}", w.digest(), trace.init_digest),
        }));
    }
    let mut worlds = vec![w.clone()];
    let mut records = Vec::new();
    for (i, s) in trace.steps.iter().enumerate() {
        let k = i + 1;
        let (next, rec) = match w.apply(&s.event) {
            Ok(x) => x,
            Err(e) => {
                return Ok(Err(Divergence {
                    step: k,
                    reason: at_step(e, k).to_string(),
                }))
            }
        };
        let shown = rec.action.as_deref().map(|a| trace.show_action(a));
        let checks = [
            ("actor", rec.actor.clone(), s.actor.clone()),
            ("stmt", rec.stmt.clone(), s.stmt.clone()),
            ("action", format!("{shown:?}"), format!("{:?}", s.action)),
            ("reason", format!("{:?}", rec.abort), format!("{:?}", s.abort)),
            ("digest", rec.digest.clone(), s.digest.clone()),
        ];
        if let Some((what, got, want)) = checks.into_iter().find(|(_, a, b)| a != b) {
            return Ok(Err(Divergence {
                step: k,
                reason: format!("{what}: replay gives {got}, trace has {want}"),
            }));
        }
        records.push(rec);
        worlds.push(next.clone());
        w = next;
    }
    Ok(Ok(Replayed { worlds, records }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer() {
        let t = tokenize(r#"failure spec=post-ns detail="a b" x"#).unwrap();
        assert_eq!(t[0], ("failure".into(), "".into()));
        assert_eq!(t[2], ("detail".into(), "a b".into()));
        assert_eq!(t[3], ("x".into(), "".into()));
        assert!(tokenize(r#"a="b"#).is_err());
    }

    #[test]
    fn content_round_trip() {
        let c = parse_content("[A,n1,n12]").unwrap();
        assert_eq!(crate::model::render_content(&c), "[A,n1,n12]");
        assert!(parse_content("A,n1").is_err());
    }
}
