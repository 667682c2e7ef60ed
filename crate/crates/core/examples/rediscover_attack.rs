//! Let the bounded search find the relay attack on its own, then confirm the
//! corrected protocol survives the same bounds.
//!
//! ```bash
//! cargo run --release -p nslab --example rediscover_attack -- 4
//! ```

use nslab::explorer::explore;
use nslab::model::GlobalState;
use nslab::{Scenario, SpecId};

fn scenario(variant: &str) -> nslab::Result<Scenario> {
    Scenario::parse(&format!(
        "nslab-scenario 1\nname {variant}-search\nlevel abstract\n\
         user A conforming\nuser B conforming\nuser I rogue\n\
         role A sender peer=any variant={variant}\nrole B receiver variant={variant}\n\
         intruder search me=I\n\
         bounds max_steps=14 max_content_len=2 max_intruder_invents=0\n"
    ))
}

fn main() -> nslab::Result<()> {
    let workers = std::env::args().nth(1).and_then(|w| w.parse().ok()).unwrap_or(1);
    for variant in ["ns", "nsl"] {
        let s = scenario(variant)?;
        let t = std::time::Instant::now();
        let r = explore::<GlobalState>(&s, &[SpecId::PostNs], workers)?;
        println!(
            "{variant}: {:?} after {} states ({:?})",
            r.outcome,
            r.states,
            t.elapsed()
        );
        if let Some(trace) = &r.trace {
            for a in trace.actions() {
                println!("  {a}");
            }
        }
        if r.layering.checked > 0 {
            println!(
                "  layering: {} pairs, {} violations",
                r.layering.checked, r.layering.violations
            );
        }
    }
    Ok(())
}
