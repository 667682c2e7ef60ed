#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nslab::model::{Action, Item, Nonce};
use nslab::{Scenario, Uid};

pub fn root() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

pub fn scn_path(name: &str) -> PathBuf {
    root().join("scenarios").join(format!("{name}.scn"))
}

pub fn golden_path(name: &str) -> PathBuf {
    root().join("tests/golden").join(format!("{name}.trace"))
}

pub fn scenario(name: &str) -> Scenario {
    Scenario::parse(&std::fs::read_to_string(scn_path(name)).unwrap()).unwrap()
}

pub fn uid(s: &str) -> Uid {
    Uid::new(s)
}

/// Call one of the `cmd_*` entry points, capturing its output.
pub fn capture(f: impl FnOnce(&mut Vec<u8>) -> i32) -> (i32, String) {
    let mut buf = Vec::new();
    let code = f(&mut buf);
    (code, String::from_utf8(buf).unwrap())
}

/// One message as (recipient, ghost sender, content) with content in
/// textual form, `N1`, `N2`, ... standing for nonces.
pub type Shape = (&'static str, &'static str, &'static [&'static str]);

/// A1 -> I, I -> B, B -> A, A -> I, I -> B with two nonces.
pub const LOWE_SHAPE: [Shape; 5] = [
    ("I", "A", &["A", "N1"]),
    ("B", "I", &["A", "N1"]),
    ("A", "B", &["N1", "N2"]),
    ("I", "A", &["N2"]),
    ("B", "I", &["N2"]),
];

/// Whether the messages of `history` match `shape` under a bijective
/// renaming of nonces.
pub fn isomorphic(history: &[Action], shape: &[Shape]) -> bool {
    let msgs: Vec<_> = history.iter().filter_map(Action::as_msg).collect();
    if msgs.len() != shape.len() {
        return false;
    }
    let mut fwd: BTreeMap<Nonce, &str> = BTreeMap::new();
    let mut back: BTreeMap<&str, Nonce> = BTreeMap::new();
    for (m, (rec, sender, content)) in msgs.iter().zip(shape) {
        if m.rec().as_str() != *rec || m.ghost_sender().as_str() != *sender || m.content().len() != content.len() {
            return false;
        }
        for (item, want) in m.content().iter().zip(content.iter()) {
            match item {
                Item::Uid(u) => {
                    if u.as_str() != *want {
                        return false;
                    }
                }
                Item::Nonce(n) => {
                    if !want.starts_with('N') {
                        return false;
                    }
                    if *fwd.entry(*n).or_insert(*want) != *want || *back.entry(*want).or_insert(*n) != *n {
                        return false;
                    }
                }
            }
        }
    }
    true
}
