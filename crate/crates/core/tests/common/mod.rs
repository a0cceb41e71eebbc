#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

pub type Record = HashMap<String, Vec<u8>>;

/// Reads `tests/vectors/<name>`: `name=hex` lines, records separated by
/// blank lines, `#` starts a comment line.
pub fn vectors(name: &str) -> Vec<Record> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/vectors").join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let mut out = Vec::new();
    let mut cur = Record::new();
    for line in text.lines().map(str::trim) {
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            continue;
        }
        let (k, v) = line.split_once('=').unwrap_or_else(|| panic!("bad line {line:?}"));
        cur.insert(k.to_string(), hex::decode(v).unwrap_or_else(|e| panic!("{k}: {e}")));
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

pub fn arr<const N: usize>(r: &Record, k: &str) -> [u8; N] {
    r[k].clone().try_into().unwrap_or_else(|_| panic!("{k} must be {N} bytes"))
}
