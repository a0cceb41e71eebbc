//! Bristol Fashion text format.
//!
//! ```text
//! <gates> <wires>
//! <inputs> <width>...
//! <outputs> <width>...
//!
//! 2 1 <a> <b> <out> XOR|AND
//! 1 1 <a> <out> INV|EQW
//! ```
//!
//! Input wires come first in declaration order and outputs are the last
//! wires. Party assignment and names are not part of the format.

use std::fmt::Write;

use super::{BoolCircuit, Gate, InputSpec, OutputSpec, Party, WireId};
use crate::error::{Error, Result};

/// Renumbers wires so that inputs are `0..` and outputs are copied with
/// EQW gates onto the last wires.
pub fn export(c: &BoolCircuit) -> String {
    let mut map = vec![WireId::MAX; c.num_wires() as usize];
    let mut next: WireId = 0;
    for i in c.input_specs() {
        for &w in &i.wires {
            map[w as usize] = next;
            next += 1;
        }
    }
    let mut lines = Vec::with_capacity(c.gates().len() + c.output_width());
    for g in c.gates() {
        let out = next;
        next += 1;
        lines.push(match *g {
            Gate::Xor { a, b, .. } => format!("2 1 {} {} {out} XOR", map[a as usize], map[b as usize]),
            Gate::And { a, b, .. } => format!("2 1 {} {} {out} AND", map[a as usize], map[b as usize]),
            Gate::Inv { a, .. } => format!("1 1 {} {out} INV", map[a as usize]),
        });
        map[g.out() as usize] = out;
    }
    for o in c.output_specs() {
        for &w in &o.wires {
            lines.push(format!("1 1 {} {next} EQW", map[w as usize]));
            next += 1;
        }
    }
    let mut s = format!("{} {}\n", lines.len(), next);
    let widths = |v: Vec<usize>| -> String {
        let mut t = v.len().to_string();
        for w in v {
            let _ = write!(t, " {w}");
        }
        t
    };
    s += &widths(c.input_specs().iter().map(|i| i.wires.len()).collect());
    s.push('\n');
    s += &widths(c.output_specs().iter().map(|o| o.wires.len()).collect());
    s.push_str("\n\n");
    for l in lines {
        s += &l;
        s.push('\n');
    }
    s
}

/// Parses Bristol Fashion text. `parties` gives the owner of each input;
/// inputs are named `in0`, `in1`, ... and outputs `out0`, `out1`, ...
/// EQW gates become aliases rather than gates.
pub fn import(text: &str, parties: &[Party]) -> Result<BoolCircuit> {
    let bad = |line: usize, msg: &str| Error::invalid(format!("bristol line {line}: {msg}"));
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let mut nums = |what: &str| -> Result<(usize, Vec<usize>)> {
        let (n, l) = lines.next().ok_or_else(|| Error::invalid(format!("bristol: missing {what}")))?;
        let v = l
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| bad(n, "expected integers")))
            .collect::<Result<Vec<_>>>()?;
        Ok((n, v))
    };
    let (n, head) = nums("header")?;
    let [num_gates, num_wires] = head[..] else { return Err(bad(n, "header needs gate and wire counts")) };
    let (n, ins) = nums("input line")?;
    if ins.is_empty() || ins[0] != ins.len() - 1 {
        return Err(bad(n, "input count does not match the widths"));
    }
    let (n, outs) = nums("output line")?;
    if outs.is_empty() || outs[0] != outs.len() - 1 {
        return Err(bad(n, "output count does not match the widths"));
    }
    let (in_w, out_w) = (&ins[1..], &outs[1..]);
    if parties.len() != in_w.len() {
        return Err(Error::invalid(format!("{} inputs but {} parties given", in_w.len(), parties.len())));
    }
    let total_in: usize = in_w.iter().sum();
    let total_out: usize = out_w.iter().sum();
    if total_in + total_out > num_wires || num_wires > WireId::MAX as usize {
        return Err(Error::invalid("bristol: wire count too small for the inputs and outputs"));
    }

    let mut alias: Vec<WireId> = (0..num_wires as WireId).collect();
    let mut gates = Vec::with_capacity(num_gates);
    let mut count = 0;
    for (n, l) in lines {
        count += 1;
        let t: Vec<&str> = l.split_whitespace().collect();
        let wire = |s: &str| -> Result<WireId> {
            let w: usize = s.parse().map_err(|_| bad(n, "bad wire id"))?;
            if w >= num_wires {
                return Err(bad(n, "wire id out of range"));
            }
            Ok(w as WireId)
        };
        match t[..] {
            ["2", "1", a, b, out, op @ ("XOR" | "AND")] => {
                let (a, b, out) = (alias[wire(a)? as usize], alias[wire(b)? as usize], wire(out)?);
                gates.push(if op == "XOR" { Gate::Xor { a, b, out } } else { Gate::And { a, b, out } });
            }
            ["1", "1", a, out, "INV"] => {
                gates.push(Gate::Inv { a: alias[wire(a)? as usize], out: wire(out)? });
            }
            ["1", "1", a, out, "EQW"] => {
                let src = alias[wire(a)? as usize];
                alias[wire(out)? as usize] = src;
            }
            _ => return Err(bad(n, "unsupported gate")),
        }
    }
    if count != num_gates {
        return Err(Error::invalid(format!("bristol: header announces {num_gates} gates, found {count}")));
    }

    let mut at: WireId = 0;
    let inputs = in_w
        .iter()
        .zip(parties)
        .enumerate()
        .map(|(k, (&w, &party))| {
            let wires = (at..at + w as WireId).collect();
            at += w as WireId;
            InputSpec { party, name: format!("in{k}"), wires }
        })
        .collect();
    let mut at = (num_wires - total_out) as WireId;
    let outputs = out_w
        .iter()
        .enumerate()
        .map(|(k, &w)| {
            let wires = (at..at + w as WireId).map(|x| alias[x as usize]).collect();
            at += w as WireId;
            OutputSpec { name: format!("out{k}"), wires }
        })
        .collect();
    BoolCircuit::new(num_wires as u32, inputs, gates, outputs)
}
