//! Record a run as a trace file, replay it, then tamper with one step and
//! watch the replay stop there.

use nslab::explorer::check_lemma_suite;
use nslab::model::GlobalState;
use nslab::run::run_abstract;
use nslab::trace::{replay, Trace};
use nslab::{Scenario, Uid, Variant};

fn main() -> nslab::Result<()> {
    let s = Scenario::honest_pair(&Uid::new("A"), &Uid::new("B"), Variant::Ns);
    let mut run = run_abstract(&s, s.bounds.max_steps)?;
    run.check(&s.specs)?;
    let text = run.trace.without_ghost().render();
    print!("{text}");

    let parsed = Trace::parse(&text)?;
    match replay::<GlobalState>(&parsed)? {
        Ok(r) => {
            let suite = check_lemma_suite(&r.worlds, &r.records)?;
            println!(
                "replayed {} steps, obligations hold: {}",
                r.records.len(),
                suite.obligations_hold()
            );
        }
        Err(d) => println!("diverged at {}: {}", d.step, d.reason),
    }

    let mut edited = parsed.clone();
    edited.steps.swap(2, 3);
    if let Err(d) = replay::<GlobalState>(&edited)? {
        println!("edited trace diverged at step {}: {}", d.step, d.reason);
    }
    Ok(())
}
