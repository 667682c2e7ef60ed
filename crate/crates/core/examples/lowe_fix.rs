//! The same relay against the corrected protocol: B names itself in its
//! reply, so A notices the reply does not come from the partner it chose and
//! aborts.
//!
//! ```bash
//! cargo run -p nslab --example lowe_fix
//! ```

use nslab::run::run_abstract;
use nslab::Scenario;

const SCENARIO: &str = "nslab-scenario 1
name lowe-on-nsl
level abstract
user A conforming
user B conforming
user I rogue
role A sender peer=I variant=nsl
role B receiver variant=nsl
intruder lowe-script me=I a=A b=B
spec post-ns nsl-ft
";

fn main() -> nslab::Result<()> {
    let s = Scenario::parse(SCENARIO)?;
    let mut run = run_abstract(&s, s.bounds.max_steps)?;
    for r in &run.records {
        match &r.abort {
            Some(why) => println!("{:<14} {:<8} aborted: {why}", r.actor, r.stmt),
            None => println!("{:<14} {}", r.actor, r.stmt),
        }
    }
    for v in run.check(&s.specs)? {
        println!("{}: holds={}", v.spec, v.holds);
    }
    Ok(())
}
