use sha2::{Digest, Sha256};

use super::{Backend, Bit, Builder, CircuitDef, InputDecl, OutputDecl, Party, Word};
use crate::error::{Error, Result};

pub type WireId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Gate {
    Xor { a: WireId, b: WireId, out: WireId },
    And { a: WireId, b: WireId, out: WireId },
    Inv { a: WireId, out: WireId },
}

impl Gate {
    pub fn out(&self) -> WireId {
        match *self {
            Gate::Xor { out, .. } | Gate::And { out, .. } | Gate::Inv { out, .. } => out,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputSpec {
    pub party: Party,
    pub name: String,
    pub wires: Vec<WireId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputSpec {
    pub name: String,
    pub wires: Vec<WireId>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CircuitStats {
    pub and_count: u64,
    pub xor_count: u64,
    pub inv_count: u64,
    /// Longest input-to-output path counted in gates.
    pub depth: u32,
    /// Longest path counted in AND gates only.
    pub and_depth: u32,
}

/// An explicit gate list in topological order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoolCircuit {
    num_wires: u32,
    inputs: Vec<InputSpec>,
    gates: Vec<Gate>,
    outputs: Vec<OutputSpec>,
}

impl BoolCircuit {
    pub(crate) fn from_parts(
        num_wires: u32,
        inputs: Vec<InputSpec>,
        gates: Vec<Gate>,
        outputs: Vec<OutputSpec>,
    ) -> Self {
        BoolCircuit { num_wires, inputs, gates, outputs }
    }

    /// Builds and validates a circuit from raw parts.
    pub fn new(
        num_wires: u32,
        inputs: Vec<InputSpec>,
        gates: Vec<Gate>,
        outputs: Vec<OutputSpec>,
    ) -> Result<Self> {
        let c = BoolCircuit { num_wires, inputs, gates, outputs };
        c.validate()?;
        Ok(c)
    }

    pub fn num_wires(&self) -> u32 {
        self.num_wires
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn input_specs(&self) -> &[InputSpec] {
        &self.inputs
    }

    pub fn output_specs(&self) -> &[OutputSpec] {
        &self.outputs
    }

    /// Input bit count supplied by `party`.
    pub fn input_width(&self, party: Party) -> usize {
        self.inputs.iter().filter(|i| i.party == party).map(|i| i.wires.len()).sum()
    }

    pub fn output_width(&self) -> usize {
        self.outputs.iter().map(|o| o.wires.len()).sum()
    }

    /// Checks topological order, single assignment and wire bounds.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_wires as usize;
        let mut written = vec![false; n];
        let set = |w: WireId, written: &mut Vec<bool>| -> Result<()> {
            let slot = written
                .get_mut(w as usize)
                .ok_or_else(|| Error::invalid(format!("wire {w} out of range")))?;
            if *slot {
                return Err(Error::invalid(format!("wire {w} written twice")));
            }
            *slot = true;
            Ok(())
        };
        for i in &self.inputs {
            for &w in &i.wires {
                set(w, &mut written)?;
            }
        }
        let ready = |w: WireId, written: &Vec<bool>| -> Result<()> {
            if written.get(w as usize).copied().unwrap_or(false) {
                Ok(())
            } else {
                Err(Error::invalid(format!("wire {w} read before it is written")))
            }
        };
        for g in &self.gates {
            match *g {
                Gate::Xor { a, b, .. } | Gate::And { a, b, .. } => {
                    ready(a, &written)?;
                    ready(b, &written)?;
                }
                Gate::Inv { a, .. } => ready(a, &written)?,
            }
            set(g.out(), &mut written)?;
        }
        for o in &self.outputs {
            for &w in &o.wires {
                ready(w, &written)?;
            }
        }
        Ok(())
    }

    pub fn stats(&self) -> CircuitStats {
        let mut depth = vec![(0u32, 0u32); self.num_wires as usize];
        let mut s = CircuitStats::default();
        for g in &self.gates {
            let d = match *g {
                Gate::Xor { a, b, .. } => {
                    s.xor_count += 1;
                    let (x, y) = (depth[a as usize], depth[b as usize]);
                    (x.0.max(y.0) + 1, x.1.max(y.1))
                }
                Gate::And { a, b, .. } => {
                    s.and_count += 1;
                    let (x, y) = (depth[a as usize], depth[b as usize]);
                    (x.0.max(y.0) + 1, x.1.max(y.1) + 1)
                }
                Gate::Inv { a, .. } => {
                    s.inv_count += 1;
                    let x = depth[a as usize];
                    (x.0 + 1, x.1)
                }
            };
            depth[g.out() as usize] = d;
            s.depth = s.depth.max(d.0);
            s.and_depth = s.and_depth.max(d.1);
        }
        s
    }

    /// SHA-256 over a canonical binary encoding of the whole circuit.
    pub fn hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"boolcirc-v1");
        h.update(self.num_wires.to_be_bytes());
        h.update((self.inputs.len() as u32).to_be_bytes());
        for i in &self.inputs {
            h.update([i.party.tag()]);
            h.update((i.name.len() as u32).to_be_bytes());
            h.update(i.name.as_bytes());
            h.update((i.wires.len() as u32).to_be_bytes());
            for w in &i.wires {
                h.update(w.to_be_bytes());
            }
        }
        h.update((self.gates.len() as u64).to_be_bytes());
        for g in &self.gates {
            match *g {
                Gate::Xor { a, b, out } => {
                    h.update([0]);
                    h.update(a.to_be_bytes());
                    h.update(b.to_be_bytes());
                    h.update(out.to_be_bytes());
                }
                Gate::And { a, b, out } => {
                    h.update([1]);
                    h.update(a.to_be_bytes());
                    h.update(b.to_be_bytes());
                    h.update(out.to_be_bytes());
                }
                Gate::Inv { a, out } => {
                    h.update([2]);
                    h.update(a.to_be_bytes());
                    h.update(out.to_be_bytes());
                }
            }
        }
        h.update((self.outputs.len() as u32).to_be_bytes());
        for o in &self.outputs {
            h.update((o.name.len() as u32).to_be_bytes());
            h.update(o.name.as_bytes());
            h.update((o.wires.len() as u32).to_be_bytes());
            for w in &o.wires {
                h.update(w.to_be_bytes());
            }
        }
        h.finalize().into()
    }

    /// Evaluates in the clear; `values` follows the input order.
    pub fn eval(&self, values: &[Vec<bool>]) -> Result<Vec<Vec<bool>>> {
        super::eval_plain(self, values)
    }
}

impl CircuitDef for BoolCircuit {
    fn inputs(&self) -> Vec<InputDecl> {
        self.inputs
            .iter()
            .map(|i| InputDecl { party: i.party, name: i.name.clone(), width: i.wires.len() })
            .collect()
    }

    fn outputs(&self) -> Vec<OutputDecl> {
        self.outputs.iter().map(|o| OutputDecl { name: o.name.clone(), width: o.wires.len() }).collect()
    }

    fn build<B: Backend>(&self, b: &mut Builder<B>, inputs: &[Word<B::Wire>]) -> Vec<Word<B::Wire>> {
        let mut vals: Vec<Option<Bit<B::Wire>>> = vec![None; self.num_wires as usize];
        for (spec, word) in self.inputs.iter().zip(inputs) {
            for (&w, &bit) in spec.wires.iter().zip(word) {
                vals[w as usize] = Some(bit);
            }
        }
        let get = |vals: &Vec<Option<Bit<B::Wire>>>, w: WireId| vals[w as usize].expect("validated circuit");
        for g in &self.gates {
            let v = match *g {
                Gate::Xor { a, b: y, .. } => {
                    let (x, y) = (get(&vals, a), get(&vals, y));
                    b.xor(x, y)
                }
                Gate::And { a, b: y, .. } => {
                    let (x, y) = (get(&vals, a), get(&vals, y));
                    b.and(x, y)
                }
                Gate::Inv { a, .. } => {
                    let x = get(&vals, a);
                    b.not(x)
                }
            };
            vals[g.out() as usize] = Some(v);
        }
        self.outputs.iter().map(|o| o.wires.iter().map(|&w| get(&vals, w)).collect()).collect()
    }

    fn circuit_id(&self) -> [u8; 32] {
        self.hash()
    }
}
