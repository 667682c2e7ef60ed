//! The `run`, `explore` and `replay` commands.
//!
//! Exit codes: 0 every requested property holds (or the replay matched),
//! 1 a property failed or a replay diverged, 2 malformed input, 3 the
//! search was inconclusive.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::crypto::{check_refinement, WireState};
use crate::error::{Error, Result};
use crate::explorer::{check_lemma_suite, explore, ExploreReport, SearchOutcome};
use crate::medium::Medium;
use crate::model::GlobalState;
use crate::run::run;
use crate::scenario::{IntruderSpec, Level, Scenario};
use crate::specs::{SpecId, SpecVerdict};
use crate::trace::{replay, Trace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_MALFORMED: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

#[derive(Clone, Debug, Default)]
pub struct Options {
    /// Overrides the scenario's `spec` line when non-empty.
    pub specs: Vec<SpecId>,
    pub level: Option<Level>,
    pub trace_out: Option<PathBuf>,
    pub no_ghost: bool,
    pub max_steps: Option<usize>,
    pub workers: usize,
}

fn load_scenario(path: &Path, opts: &Options) -> Result<Scenario> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::parse(0, "path", format!("{}: {e}", path.display())))?;
    let mut s = Scenario::parse(&text)?;
    if let Some(l) = opts.level {
        s.level = l;
    }
    if let Some(m) = opts.max_steps {
        s.bounds.max_steps = m;
    }
    if !opts.specs.is_empty() {
        s.specs = opts.specs.clone();
    }
    Ok(s)
}

fn malformed(out: &mut dyn Write, e: &Error) -> i32 {
    let _ = writeln!(out, "error: {e}");
    EXIT_MALFORMED
}

fn write_trace(out: &mut dyn Write, trace: &Trace, opts: &Options) -> Result<(), i32> {
    let Some(path) = &opts.trace_out else {
        return Ok(());
    };
    let t = if opts.no_ghost {
        trace.without_ghost()
    } else {
        trace.clone()
    };
    if let Err(e) = std::fs::write(path, t.render()) {
        let _ = writeln!(out, "error: cannot write {}: {e}", path.display());
        return Err(EXIT_MALFORMED);
    }
    let _ = writeln!(out, "trace written to {}", path.display());
    Ok(())
}

fn print_verdict(out: &mut dyn Write, v: &SpecVerdict) {
    if v.holds {
        let _ = writeln!(out, "{}: holds", v.spec);
        return;
    }
    let _ = writeln!(out, "{}: VIOLATED", v.spec);
    for f in &v.failures {
        let _ = writeln!(out, "  {}: {}", f.conjunct, f.detail);
    }
    if let Some(r) = &v.rely_broken {
        let _ = writeln!(out, "  environment broke rely: {r}");
    }
}

/// Execute a scripted scenario.
pub fn cmd_run(path: &Path, opts: &Options, out: &mut dyn Write) -> i32 {
    let s = match load_scenario(path, opts) {
        Ok(s) => s,
        Err(e) => return malformed(out, &e),
    };
    if matches!(s.intruder, IntruderSpec::Search { .. }) {
        return malformed(
            out,
            &Error::parse(0, "intruder", "`run` needs a scripted intruder; use `explore`"),
        );
    }
    let r = match s.level {
        Level::Abstract => run_level::<GlobalState>(&s, out),
        Level::Concrete => run_level::<WireState>(&s, out),
    };
    match r {
        Ok((trace, verdicts)) => {
            if let Err(code) = write_trace(out, &trace, opts) {
                return code;
            }
            if verdicts.iter().all(|v| v.holds) {
                EXIT_OK
            } else {
                EXIT_VIOLATION
            }
        }
        Err(e) => malformed(out, &e),
    }
}

fn run_level<M: Medium>(s: &Scenario, out: &mut dyn Write) -> Result<(Trace, Vec<SpecVerdict>)> {
    let mut r = run::<M>(s, s.bounds.max_steps)?;
    let verdicts = r.check(&s.specs)?;
    let msgs = (0..r.world.medium.len())
        .filter(|&i| r.world.medium.is_message(i))
        .count();
    let _ = writeln!(
        out,
        "run {} ({}): {} steps, {} messages",
        s.name,
        s.level,
        r.records.len(),
        msgs
    );
    for v in &verdicts {
        print_verdict(out, v);
    }
    Ok((r.trace.clone(), verdicts))
}

pub fn explore_report(s: &Scenario, workers: usize) -> Result<ExploreReport> {
    let specs = if s.specs.is_empty() {
        vec![SpecId::PostNs]
    } else {
        s.specs.clone()
    };
    match s.level {
        Level::Abstract => explore::<GlobalState>(s, &specs, workers),
        Level::Concrete => explore::<WireState>(s, &specs, workers),
    }
}

/// Bounded search for a counterexample.
pub fn cmd_explore(path: &Path, opts: &Options, out: &mut dyn Write) -> i32 {
    let s = match load_scenario(path, opts) {
        Ok(s) => s,
        Err(e) => return malformed(out, &e),
    };
    if !matches!(s.intruder, IntruderSpec::Search { .. }) {
        return malformed(
            out,
            &Error::parse(0, "intruder", "`explore` needs `intruder search me=ID`"),
        );
    }
    let report = match explore_report(&s, opts.workers.max(1)) {
        Ok(r) => r,
        Err(e) => return malformed(out, &e),
    };
    let noun = if report.states == 1 { "state" } else { "states" };
    let _ = writeln!(out, "{} {noun} explored", report.states);
    if report.layering.checked > 0 {
        let _ = writeln!(
            out,
            "layering: {} completed pairs checked, {} violations",
            report.layering.checked, report.layering.violations
        );
    }
    match report.outcome {
        SearchOutcome::HoldsWithinBounds => {
            let _ = writeln!(out, "holds within bounds (max_steps={})", s.bounds.max_steps);
            EXIT_OK
        }
        SearchOutcome::Inconclusive => {
            let _ = writeln!(out, "inconclusive: state budget exhausted");
            EXIT_INCONCLUSIVE
        }
        SearchOutcome::Counterexample => {
            for v in &report.verdicts {
                print_verdict(out, v);
            }
            if let Some(t) = &report.trace {
                let _ = writeln!(out, "counterexample: {} steps", t.steps.len());
                for a in t.actions() {
                    let _ = writeln!(out, "  {a}");
                }
                if let Err(code) = write_trace(out, t, opts) {
                    return code;
                }
            }
            EXIT_VIOLATION
        }
    }
}

/// Re-execute a trace, verify every digest and check the lemma suite.
pub fn cmd_replay(path: &Path, out: &mut dyn Write) -> i32 {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return malformed(out, &Error::parse(0, "path", format!("{}: {e}", path.display()))),
    };
    let trace = match Trace::parse(&text) {
        Ok(t) => t,
        Err(e) => return malformed(out, &e),
    };
    let r = match trace.scenario.level {
        Level::Abstract => replay_level::<GlobalState>(&trace, out),
        Level::Concrete => replay_level::<WireState>(&trace, out),
    };
    match r {
        Ok(code) => code,
        Err(e) => malformed(out, &e),
    }
}

fn replay_level<M: Medium>(trace: &Trace, out: &mut dyn Write) -> Result<i32> {
    let replayed = match replay::<M>(trace)? {
        Ok(r) => r,
        Err(d) => {
            let _ = writeln!(out, "diverged at step {}: {}", d.step, d.reason);
            return Ok(EXIT_VIOLATION);
        }
    };
    let _ = writeln!(out, "replayed {} steps: all digests match", replayed.records.len());
    let suite = check_lemma_suite(&replayed.worlds, &replayed.records)?;
    let mut code = EXIT_OK;
    for r in &suite.obligations {
        let _ = writeln!(out, "obligation {r}");
        if !r.holds {
            code = EXIT_VIOLATION;
        }
    }
    for r in &suite.relies {
        let _ = writeln!(out, "rely {r}");
    }
    if trace.scenario.level == Level::Concrete {
        let v = check_refinement(&trace.scenario)?;
        print_verdict(out, &v);
        if !v.holds {
            code = EXIT_VIOLATION;
        }
    }
    Ok(code)
}
