//! Replace recipient-only readability with symbolic public-key encryption
//! and check the concrete run projects back onto the abstract one.

use nslab::crypto::{check_dec_enc, check_refinement, dec, enc, KeyRegistry};
use nslab::model::{GlobalState, Item, Nonce, PKey, SKey};
use nslab::roles::Variant;
use nslab::{Scenario, Uid};

fn main() -> nslab::Result<()> {
    let users = ["A", "B", "C", "D"].map(|u| (Uid::new(u), true));
    let reg = KeyRegistry::of(&GlobalState::new(users.clone()));
    let payload = vec![Item::Uid(Uid::new("A")), Item::Nonce(Nonce::new(1))];
    let (report, opened, total) = check_dec_enc(&reg, &payload)?;
    println!("{report}: {opened} of {total} key pairs decrypt");

    let (a, b) = (Uid::new("A"), Uid::new("B"));
    let m = enc(payload, &PKey::of(&b))?;
    println!(
        "{m:?}: B reads {:?}, A reads {:?}",
        dec(&m, &SKey::of(&b), &reg),
        dec(&m, &SKey::of(&a), &reg).is_ok()
    );

    let mut s = Scenario::honest_pair(&a, &b, Variant::Nsl);
    println!("honest NSL refinement: {}", check_refinement(&s)?.holds);

    // C registered under B's key can read B's mail at the concrete level.
    s.users.push((Uid::new("C"), false));
    s.pkey_overrides.push((Uid::new("C"), b.clone()));
    s.intruder = nslab::scenario::IntruderSpec::LoweScript {
        me: Uid::new("C"),
        a,
        b,
    };
    let v = check_refinement(&s)?;
    println!("shared key refinement: {}", v.holds);
    for f in &v.failures {
        println!("  {}: {}", f.conjunct, f.detail);
    }
    Ok(())
}
