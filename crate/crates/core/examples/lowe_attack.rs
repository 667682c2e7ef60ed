//! A opens a session with the rogue I, who relays A's nonce to B. B ends up
//! believing it talked to A while I holds both nonces.
//!
//! ```bash
//! cargo run -p nslab --example lowe_attack
//! ```

use nslab::run::run_abstract;
use nslab::scenario::{IntruderSpec, RoleKind, RoleSpec};
use nslab::{Scenario, SpecId, Uid, Variant};

fn main() -> nslab::Result<()> {
    let (a, b, i) = (Uid::new("A"), Uid::new("B"), Uid::new("I"));
    let mut s = Scenario::honest_pair(&a, &b, Variant::Ns);
    s.name = "lowe-on-ns".into();
    s.users.push((i.clone(), false));
    s.roles[0].kind = RoleKind::Sender { peer: Some(i.clone()) };
    s.intruder = IntruderSpec::LoweScript { me: i, a, b };
    debug_assert!(matches!(
        s.roles[1],
        RoleSpec {
            kind: RoleKind::Receiver,
            ..
        }
    ));

    let mut run = run_abstract(&s, s.bounds.max_steps)?;
    for line in run.trace.actions() {
        println!("{line}");
    }
    for v in run.check(&[SpecId::PostNs])? {
        println!("{}: holds={}", v.spec, v.holds);
        for f in &v.failures {
            println!("  {}: {}", f.conjunct, f.detail);
        }
    }
    Ok(())
}
