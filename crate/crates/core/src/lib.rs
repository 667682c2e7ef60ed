//! A laboratory for the Needham-Schroeder public-key exchange and Lowe's
//! correction.
//!
//! The abstract model keeps a global history of messages whose recipient
//! field stands in for encryption; a ghost sender field records who really
//! emitted each message. Role machines run the two protocol roles one
//! statement at a time, a Dolev-Yao intruder acts as a non-conforming
//! principal, and the explorer searches all interleavings within bounds.
//! [`crypto`] replaces recipient-only readability with symbolic public-key
//! encryption and checks that the two levels agree.

pub mod cli;
pub mod crypto;
pub mod error;
pub mod explorer;
pub mod intruder;
pub mod invariants;
pub mod medium;
pub mod model;
pub mod roles;
pub mod run;
pub mod scenario;
pub mod specs;
pub mod trace;
pub mod world;

pub use error::{Error, Result};
pub use model::{Action, GlobalState, Item, Msg, Nonce, Sid, Uid};
pub use roles::Variant;
pub use scenario::Scenario;
pub use specs::SpecId;
