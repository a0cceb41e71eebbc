//! Boolean circuits: the gate-level IR, a backend-generic builder with
//! constant folding, arithmetic gadgets and the algorithm circuits.
//!
//! Every circuit is written once against [`Builder`] and can then be
//! recorded into a [`BoolCircuit`], evaluated in the clear, counted, or
//! garbled/evaluated gate by gate without ever materializing the gate list.

pub mod aes;
pub mod bristol;
mod circuit;
pub mod comparison;
pub(crate) mod gadgets;
pub mod multimatch;
pub mod scanmatch;
pub mod sha256;
pub mod subsmatch;

pub use circuit::{BoolCircuit, CircuitStats, Gate, InputSpec, OutputSpec, WireId};

use crate::error::{Error, Result};

/// Gate-level operations a circuit can be evaluated with.
pub trait Backend {
    type Wire: Copy;
    fn xor(&mut self, a: Self::Wire, b: Self::Wire) -> Self::Wire;
    fn and(&mut self, a: Self::Wire, b: Self::Wire) -> Self::Wire;
    fn inv(&mut self, a: Self::Wire) -> Self::Wire;
}

/// A wire value as seen by the builder: either a public constant or a backend wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bit<W> {
    Const(bool),
    Wire(W),
}

impl<W: Copy> Bit<W> {
    pub fn wire(self) -> Option<W> {
        match self {
            Bit::Wire(w) => Some(w),
            Bit::Const(_) => None,
        }
    }
}

/// A little-endian (LSB first) vector of bits.
pub type Word<W> = Vec<Bit<W>>;

/// Who supplies an input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Party {
    Garbler,
    Evaluator,
    /// Known to both parties; encoded by the garbler.
    Public,
}

impl Party {
    pub fn tag(self) -> u8 {
        match self {
            Party::Garbler => 0,
            Party::Evaluator => 1,
            Party::Public => 2,
        }
    }

    pub fn from_tag(t: u8) -> Option<Party> {
        match t {
            0 => Some(Party::Garbler),
            1 => Some(Party::Evaluator),
            2 => Some(Party::Public),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputDecl {
    pub party: Party,
    pub name: String,
    pub width: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputDecl {
    pub name: String,
    pub width: usize,
}

impl InputDecl {
    pub fn new(party: Party, name: &str, width: usize) -> Self {
        InputDecl { party, name: name.to_string(), width }
    }
}

impl OutputDecl {
    pub fn new(name: &str, width: usize) -> Self {
        OutputDecl { name: name.to_string(), width }
    }
}

/// A circuit described by code: declared inputs/outputs plus a generic body.
pub trait CircuitDef {
    fn inputs(&self) -> Vec<InputDecl>;
    fn outputs(&self) -> Vec<OutputDecl>;
    /// Emits the gates. `inputs` follows the order of [`CircuitDef::inputs`].
    fn build<B: Backend>(&self, b: &mut Builder<B>, inputs: &[Word<B::Wire>]) -> Vec<Word<B::Wire>>;
    /// Deterministic identity of the gate structure.
    fn circuit_id(&self) -> [u8; 32];
}

/// Wraps a backend and folds constants before they reach it.
pub struct Builder<B: Backend> {
    backend: B,
}

impl<B: Backend> Builder<B> {
    pub fn new(backend: B) -> Self {
        Builder { backend }
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn backend_mut(&mut self) -> &mut B {
        &mut self.backend
    }

    pub fn into_backend(self) -> B {
        self.backend
    }

    pub fn xor(&mut self, a: Bit<B::Wire>, b: Bit<B::Wire>) -> Bit<B::Wire> {
        match (a, b) {
            (Bit::Const(x), Bit::Const(y)) => Bit::Const(x ^ y),
            (Bit::Const(false), w) | (w, Bit::Const(false)) => w,
            (Bit::Const(true), w) | (w, Bit::Const(true)) => self.not(w),
            (Bit::Wire(x), Bit::Wire(y)) => Bit::Wire(self.backend.xor(x, y)),
        }
    }

    pub fn and(&mut self, a: Bit<B::Wire>, b: Bit<B::Wire>) -> Bit<B::Wire> {
        match (a, b) {
            (Bit::Const(x), Bit::Const(y)) => Bit::Const(x & y),
            (Bit::Const(false), _) | (_, Bit::Const(false)) => Bit::Const(false),
            (Bit::Const(true), w) | (w, Bit::Const(true)) => w,
            (Bit::Wire(x), Bit::Wire(y)) => Bit::Wire(self.backend.and(x, y)),
        }
    }

    pub fn not(&mut self, a: Bit<B::Wire>) -> Bit<B::Wire> {
        match a {
            Bit::Const(x) => Bit::Const(!x),
            Bit::Wire(w) => Bit::Wire(self.backend.inv(w)),
        }
    }
}

/// Records gates into a [`BoolCircuit`].
pub struct Recorder {
    next: WireId,
    gates: Vec<Gate>,
}

impl Backend for Recorder {
    type Wire = WireId;
    fn xor(&mut self, a: WireId, b: WireId) -> WireId {
        let out = self.fresh();
        self.gates.push(Gate::Xor { a, b, out });
        out
    }
    fn and(&mut self, a: WireId, b: WireId) -> WireId {
        let out = self.fresh();
        self.gates.push(Gate::And { a, b, out });
        out
    }
    fn inv(&mut self, a: WireId) -> WireId {
        let out = self.fresh();
        self.gates.push(Gate::Inv { a, out });
        out
    }
}

impl Recorder {
    fn fresh(&mut self) -> WireId {
        let w = self.next;
        self.next += 1;
        w
    }
}

/// Records `def` into an explicit gate list.
pub fn record<D: CircuitDef>(def: &D) -> Result<BoolCircuit> {
    let decls = def.inputs();
    let mut rec = Recorder { next: 0, gates: Vec::new() };
    let mut inputs = Vec::with_capacity(decls.len());
    let mut words = Vec::with_capacity(decls.len());
    for d in &decls {
        let wires: Vec<WireId> = (0..d.width).map(|_| rec.fresh()).collect();
        words.push(wires.iter().map(|&w| Bit::Wire(w)).collect::<Vec<_>>());
        inputs.push(InputSpec { party: d.party, name: d.name.clone(), wires });
    }
    let mut b = Builder::new(rec);
    let outs = def.build(&mut b, &words);
    let mut rec = b.into_backend();
    let out_decls = def.outputs();
    check_outputs(&out_decls, &outs)?;
    let any_wire = inputs.iter().flat_map(|i| i.wires.iter().copied()).next();
    let mut outputs = Vec::with_capacity(outs.len());
    let mut zero = None;
    for (d, word) in out_decls.iter().zip(outs) {
        let mut wires = Vec::with_capacity(word.len());
        for bit in word {
            let w = match bit {
                Bit::Wire(w) => w,
                Bit::Const(v) => {
                    let z = match zero {
                        Some(z) => z,
                        None => {
                            let src = any_wire
                                .ok_or_else(|| Error::invalid("constant output in a circuit without inputs"))?;
                            let z = rec.xor(src, src);
                            zero = Some(z);
                            z
                        }
                    };
                    if v {
                        rec.inv(z)
                    } else {
                        z
                    }
                }
            };
            wires.push(w);
        }
        outputs.push(OutputSpec { name: d.name.clone(), wires });
    }
    let c = BoolCircuit::from_parts(rec.next, inputs, rec.gates, outputs);
    debug_assert!(c.validate().is_ok());
    Ok(c)
}

pub(crate) fn check_outputs<W>(decls: &[OutputDecl], outs: &[Word<W>]) -> Result<()> {
    if decls.len() != outs.len() || decls.iter().zip(outs).any(|(d, o)| d.width != o.len()) {
        return Err(Error::invalid("circuit outputs do not match their declaration"));
    }
    Ok(())
}

/// Evaluates in the clear.
pub struct PlainEval;

impl Backend for PlainEval {
    type Wire = bool;
    fn xor(&mut self, a: bool, b: bool) -> bool {
        a ^ b
    }
    fn and(&mut self, a: bool, b: bool) -> bool {
        a & b
    }
    fn inv(&mut self, a: bool) -> bool {
        !a
    }
}

/// Evaluates `def` in the clear. `values` follows the input declaration order.
pub fn eval_plain<D: CircuitDef>(def: &D, values: &[Vec<bool>]) -> Result<Vec<Vec<bool>>> {
    let decls = def.inputs();
    if decls.len() != values.len() || decls.iter().zip(values).any(|(d, v)| d.width != v.len()) {
        return Err(Error::invalid("input values do not match the circuit inputs"));
    }
    let words: Vec<Word<bool>> =
        values.iter().map(|v| v.iter().map(|&x| Bit::Wire(x)).collect()).collect();
    let mut b = Builder::new(PlainEval);
    let outs = def.build(&mut b, &words);
    check_outputs(&def.outputs(), &outs)?;
    Ok(outs
        .into_iter()
        .map(|w| w.into_iter().map(|bit| matches!(bit, Bit::Const(true) | Bit::Wire(true))).collect())
        .collect())
}

/// Counts gates and depth without storing anything.
#[derive(Default)]
pub struct Counter {
    pub stats: CircuitStats,
}

impl Backend for Counter {
    /// (depth, and-depth) of the wire.
    type Wire = (u32, u32);
    fn xor(&mut self, a: (u32, u32), b: (u32, u32)) -> (u32, u32) {
        self.stats.xor_count += 1;
        self.bump((a.0.max(b.0) + 1, a.1.max(b.1)))
    }
    fn and(&mut self, a: (u32, u32), b: (u32, u32)) -> (u32, u32) {
        self.stats.and_count += 1;
        self.bump((a.0.max(b.0) + 1, a.1.max(b.1) + 1))
    }
    fn inv(&mut self, a: (u32, u32)) -> (u32, u32) {
        self.stats.inv_count += 1;
        self.bump((a.0 + 1, a.1))
    }
}

impl Counter {
    fn bump(&mut self, d: (u32, u32)) -> (u32, u32) {
        self.stats.depth = self.stats.depth.max(d.0);
        self.stats.and_depth = self.stats.and_depth.max(d.1);
        d
    }
}

/// Gate statistics of `def` computed by streaming through a counter.
pub fn count<D: CircuitDef>(def: &D) -> CircuitStats {
    let words: Vec<Word<(u32, u32)>> =
        def.inputs().iter().map(|d| vec![Bit::Wire((0, 0)); d.width]).collect();
    let mut b = Builder::new(Counter::default());
    def.build(&mut b, &words);
    b.into_backend().stats
}

/// Bytes to LSB-first bits.
pub fn bytes_to_bits(bytes: &[u8]) -> Vec<bool> {
    bytes.iter().flat_map(|&x| (0..8).map(move |i| (x >> i) & 1 == 1)).collect()
}

/// LSB-first bits back to bytes; the bit count must be a multiple of 8.
pub fn bits_to_bytes(bits: &[bool]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | ((b as u8) << i)))
        .collect()
}

/// Converts decoded builder bits to plain booleans.
pub fn word_to_bools<W>(w: &[Bit<W>], value: impl Fn(&W) -> bool) -> Vec<bool> {
    w.iter()
        .map(|b| match b {
            Bit::Const(v) => *v,
            Bit::Wire(x) => value(x),
        })
        .collect()
}
