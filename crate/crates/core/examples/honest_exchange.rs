//! Two conforming users run the three-message exchange with nobody else on
//! the network.
//!
//! ```bash
//! cargo run -p nslab --example honest_exchange
//! ```

use nslab::roles::run_honest_pair;
use nslab::{Uid, Variant};

fn main() -> nslab::Result<()> {
    let (a, b) = (Uid::new("A"), Uid::new("B"));
    for variant in [Variant::Ns, Variant::Nsl] {
        let (state, _trace) = run_honest_pair(&a, &b, variant)?;
        println!("{variant}:");
        for act in state.history() {
            println!("  {act:?}");
        }
        for (u, rec) in state.users() {
            for s in rec.sessions() {
                println!(
                    "  {u} {s}: partner {:?}, complete {}, knows {:?}",
                    rec.partner(&s),
                    rec.is_complete(&s),
                    rec.knows_in(&s)
                );
            }
        }
    }
    Ok(())
}
