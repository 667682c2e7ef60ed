//! Scripted runs under a fixed round-robin scheduler.
//!
//! Each round steps every role machine that can move, in index order, and
//! then the scripted intruder if it has something to forward. The run stops
//! after a round without progress or when `max_steps` events were applied.

use crate::error::Result;
use crate::explorer::is_environment;
use crate::medium::Medium;
use crate::model::GlobalState;
use crate::scenario::Scenario;
use crate::specs::{evaluate, SpecId, SpecVerdict};
use crate::trace::Trace;
use crate::world::{Event, StepRecord, World};

pub struct Run<M> {
    pub scenario: Scenario,
    /// `worlds[0]` is the initial world; `worlds[i]` follows `records[i-1]`.
    pub worlds: Vec<World<M>>,
    pub records: Vec<StepRecord>,
    pub world: World<M>,
    pub trace: Trace,
    environment: Vec<bool>,
}

impl<M: Medium> Run<M> {
    pub fn events(&self) -> Vec<Event> {
        self.records.iter().map(|r| r.event.clone()).collect()
    }

    pub fn states(&self) -> Result<Vec<GlobalState>> {
        self.worlds.iter().map(|w| w.medium.project()).collect()
    }

    pub fn final_state(&self) -> Result<GlobalState> {
        self.world.medium.project()
    }

    /// Evaluate specs over the run and store the verdicts in the trace.
    pub fn check(&mut self, specs: &[SpecId]) -> Result<Vec<SpecVerdict>> {
        let states = self.states()?;
        let verdicts: Vec<SpecVerdict> = specs.iter().map(|s| evaluate(*s, &states, &self.environment)).collect();
        self.trace.verdicts.clone_from(&verdicts);
        Ok(verdicts)
    }
}

/// Run the scenario at medium `M`.
pub fn run<M: Medium>(scenario: &Scenario, max_steps: usize) -> Result<Run<M>> {
    let mut w: World<M> = World::init(scenario)?;
    let init_digest = w.digest();
    let mut worlds = vec![w.clone()];
    let mut records = Vec::new();
    let mut environment = Vec::new();
    'rounds: loop {
        let mut progressed = false;
        for index in 0..w.machines.len() {
            if records.len() >= max_steps {
                break 'rounds;
            }
            // an open partner is bound to the first other user by name
            let Some(ev) = w
                .machine_events()
                .into_iter()
                .find(|e| matches!(e, Event::Machine { index: i, .. } if *i == index))
            else {
                continue;
            };
            environment.push(is_environment(&w, &ev));
            let (next, rec) = w.apply(&ev)?;
            records.push(rec);
            worlds.push(next.clone());
            w = next;
            progressed = true;
        }
        if w.script_enabled() && records.len() < max_steps {
            environment.push(true);
            let (next, rec) = w.apply(&Event::Script)?;
            records.push(rec);
            worlds.push(next.clone());
            w = next;
            progressed = true;
        }
        if !progressed {
            break;
        }
    }
    let trace = Trace {
        scenario: scenario.clone(),
        ghost: true,
        init_digest,
        steps: records.clone(),
        verdicts: Vec::new(),
    };
    Ok(Run {
        scenario: scenario.clone(),
        worlds,
        records,
        world: w,
        trace,
        environment,
    })
}

pub fn run_abstract(scenario: &Scenario, max_steps: usize) -> Result<Run<GlobalState>> {
    run(scenario, max_steps)
}

pub fn run_concrete(scenario: &Scenario, max_steps: usize) -> Result<Run<crate::crypto::WireState>> {
    run(scenario, max_steps)
}
