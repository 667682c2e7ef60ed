//! Evaluate each state predicate along the relay attack and show which
//! conjunct breaks, and who broke it.

use nslab::explorer::check_lemma_suite;
use nslab::invariants::{conforming_conjunct, inv_sigma, no_app_leaks, no_read_others, unique_nonces};
use nslab::model::u_hist;
use nslab::run::run_abstract;
use nslab::Scenario;

const SCENARIO: &str = "nslab-scenario 1
name lowe-on-ns
level abstract
user A conforming
user B conforming
user I rogue
role A sender peer=I variant=ns
role B receiver variant=ns
intruder lowe-script me=I a=A b=B
";

fn main() -> nslab::Result<()> {
    let s = Scenario::parse(SCENARIO)?;
    let run = run_abstract(&s, s.bounds.max_steps)?;
    let states = run.states()?;
    for (k, st) in states.iter().enumerate() {
        let by = k.checked_sub(1).map_or("init", |i| run.records[i].actor.as_str());
        println!(
            "{k:>2} {by:<14} unique={} read={} inv={}",
            unique_nonces(st.history()).holds,
            no_read_others(st).holds,
            inv_sigma(st)
        );
    }

    let fin = states.last().unwrap();
    for u in fin.users().keys() {
        println!(
            "{u}: {} / {}",
            conforming_conjunct(fin.history(), u),
            no_app_leaks(&u_hist(fin.history(), u))
        );
    }

    // Flipping I to conforming pulls its own slice into the invariant.
    let strict = fin.with_conforms(&nslab::Uid::new("I"), true)?;
    println!("with I conforming: {}", inv_sigma(&strict));

    let suite = check_lemma_suite(&run.worlds, &run.records)?;
    for r in suite.obligations.iter().chain(&suite.relies) {
        println!("{r}");
    }
    Ok(())
}
