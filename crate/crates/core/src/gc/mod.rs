//! Half-gates garbling with free XOR and point-and-permute.
//!
//! Labels are 128-bit blocks. The garbler keeps only the 0-label of each
//! wire; the 1-label is `label0 ^ delta` with `lsb(delta) = 1`. AND gates
//! produce two ciphertexts (32 bytes), XOR and INV gates none.
//!
//! Garbling and evaluation run as [`Backend`]s, so any [`CircuitDef`] is
//! garbled gate by gate while tables are streamed out, without ever
//! materializing the gate list. A [`BoolCircuit`] goes through the same code
//! by replaying its gates.

pub mod ot;

use aes::cipher::generic_array::GenericArray;
use aes::cipher::{BlockEncrypt, KeyInit};
use aes::Aes128;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::boolcirc::{Backend, Bit, BoolCircuit, Builder, CircuitDef, Gate, InputDecl, Party, Word};
use crate::error::{Error, Result};

pub const TABLE_BYTES: usize = 32;

#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Block(pub u128);

impl Block {
    pub const ZERO: Block = Block(0);

    pub fn lsb(self) -> bool {
        self.0 & 1 == 1
    }

    pub fn to_bytes(self) -> [u8; 16] {
        self.0.to_le_bytes()
    }

    pub fn from_bytes(b: [u8; 16]) -> Block {
        Block(u128::from_le_bytes(b))
    }

    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Block {
        Block(rng.gen())
    }

    /// `self` if `bit`, else zero.
    fn select(self, bit: bool) -> Block {
        Block(self.0 & (bit as u128).wrapping_neg())
    }
}

impl std::ops::BitXor for Block {
    type Output = Block;
    fn bitxor(self, rhs: Block) -> Block {
        Block(self.0 ^ rhs.0)
    }
}

impl std::ops::BitXorAssign for Block {
    fn bitxor_assign(&mut self, rhs: Block) {
        self.0 ^= rhs.0;
    }
}

impl std::fmt::Debug for Block {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Block({:032x})", self.0)
    }
}

/// Fixed-key AES key of the gate hash; public by design.
const FIXED_KEY: [u8; 16] = *b"scanpath-gc-tccr";

/// Tweakable circular correlation-robust hash
/// `H(x, t) = AES_k(sigma(x) ^ t) ^ sigma(x)` with the linear orthomorphism
/// `sigma(hi || lo) = (hi ^ lo) || hi`.
#[derive(Clone)]
pub struct Tccr {
    aes: Aes128,
}

impl Default for Tccr {
    fn default() -> Self {
        Tccr { aes: Aes128::new(&FIXED_KEY.into()) }
    }
}

impl Tccr {
    fn sigma(x: Block) -> Block {
        let hi = (x.0 >> 64) as u64;
        let lo = x.0 as u64;
        Block((((hi ^ lo) as u128) << 64) | hi as u128)
    }

    pub fn hash(&self, x: Block, tweak: u64) -> Block {
        self.hash_n([x], [tweak])[0]
    }

    /// `N` hashes with a single batched AES call.
    pub fn hash_n<const N: usize>(&self, xs: [Block; N], tweaks: [u64; N]) -> [Block; N] {
        let sig: [Block; N] = std::array::from_fn(|i| Self::sigma(xs[i]));
        let mut blocks: [aes::Block; N] =
            std::array::from_fn(|i| GenericArray::from((sig[i] ^ Block(tweaks[i] as u128)).to_bytes()));
        self.aes.encrypt_blocks(&mut blocks);
        std::array::from_fn(|i| Block::from_bytes(blocks[i].into()) ^ sig[i])
    }
}

/// Garbler state shared across the circuits of one session.
pub struct GarbleCore {
    delta: Block,
    hash: Tccr,
    next_gate: u64,
}

impl GarbleCore {
    /// `delta` gets its lowest bit forced to 1.
    pub fn new(delta: Block) -> Self {
        GarbleCore { delta: Block(delta.0 | 1), hash: Tccr::default(), next_gate: 0 }
    }

    pub fn delta(&self) -> Block {
        self.delta
    }

    pub fn and_gates(&self) -> u64 {
        self.next_gate
    }

    /// Garbles one AND gate over 0-labels; returns the output 0-label and the table.
    pub fn and(&mut self, a: Block, b: Block) -> (Block, [u8; TABLE_BYTES]) {
        let j = self.next_gate;
        self.next_gate += 1;
        let d = self.delta;
        let (pa, pb) = (a.lsb(), b.lsb());
        let [ha0, ha1, hb0, hb1] = self.hash.hash_n([a, a ^ d, b, b ^ d], [2 * j, 2 * j, 2 * j + 1, 2 * j + 1]);
        let tg = ha0 ^ ha1 ^ d.select(pb);
        let wg = ha0 ^ tg.select(pa);
        let te = hb0 ^ hb1 ^ a;
        let we = hb0 ^ (te ^ a).select(pb);
        let mut table = [0u8; TABLE_BYTES];
        table[..16].copy_from_slice(&tg.to_bytes());
        table[16..].copy_from_slice(&te.to_bytes());
        (wg ^ we, table)
    }
}

/// Evaluator state shared across the circuits of one session.
#[derive(Default)]
pub struct EvalCore {
    hash: Tccr,
    next_gate: u64,
}

impl EvalCore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn and_gates(&self) -> u64 {
        self.next_gate
    }

    pub fn and(&mut self, a: Block, b: Block, table: &[u8; TABLE_BYTES]) -> Block {
        let j = self.next_gate;
        self.next_gate += 1;
        let tg = Block::from_bytes(table[..16].try_into().unwrap());
        let te = Block::from_bytes(table[16..].try_into().unwrap());
        let [ha, hb] = self.hash.hash_n([a, b], [2 * j, 2 * j + 1]);
        let wg = ha ^ tg.select(a.lsb());
        let we = hb ^ (te ^ a).select(b.lsb());
        wg ^ we
    }
}

/// Where the garbler puts AND tables, in gate order.
pub trait TableSink {
    fn put(&mut self, table: &[u8; TABLE_BYTES]);
}

impl TableSink for Vec<u8> {
    fn put(&mut self, table: &[u8; TABLE_BYTES]) {
        self.extend_from_slice(table);
    }
}

/// Where the evaluator gets AND tables from. `None` means the stream ended.
pub trait TableSource {
    fn take(&mut self) -> Option<[u8; TABLE_BYTES]>;
}

pub struct SliceSource<'a> {
    data: &'a [u8],
}

impl<'a> SliceSource<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        SliceSource { data }
    }

    pub fn remaining(&self) -> usize {
        self.data.len()
    }
}

impl TableSource for SliceSource<'_> {
    fn take(&mut self) -> Option<[u8; TABLE_BYTES]> {
        if self.data.len() < TABLE_BYTES {
            return None;
        }
        let (t, rest) = self.data.split_at(TABLE_BYTES);
        self.data = rest;
        Some(t.try_into().unwrap())
    }
}

pub struct GarbleBackend<'a, S: TableSink> {
    core: &'a mut GarbleCore,
    sink: S,
}

impl<'a, S: TableSink> GarbleBackend<'a, S> {
    pub fn new(core: &'a mut GarbleCore, sink: S) -> Self {
        GarbleBackend { core, sink }
    }

    pub fn into_sink(self) -> S {
        self.sink
    }
}

impl<S: TableSink> Backend for GarbleBackend<'_, S> {
    type Wire = Block;
    fn xor(&mut self, a: Block, b: Block) -> Block {
        a ^ b
    }
    fn and(&mut self, a: Block, b: Block) -> Block {
        let (c, table) = self.core.and(a, b);
        self.sink.put(&table);
        c
    }
    fn inv(&mut self, a: Block) -> Block {
        a ^ self.core.delta
    }
}

pub struct EvalBackend<'a, T: TableSource> {
    core: &'a mut EvalCore,
    source: T,
    exhausted: bool,
}

impl<'a, T: TableSource> EvalBackend<'a, T> {
    pub fn new(core: &'a mut EvalCore, source: T) -> Self {
        EvalBackend { core, source, exhausted: false }
    }

    /// True if the source ran dry before the circuit was done.
    pub fn exhausted(&self) -> bool {
        self.exhausted
    }

    pub fn into_source(self) -> T {
        self.source
    }
}

impl<T: TableSource> Backend for EvalBackend<'_, T> {
    type Wire = Block;
    fn xor(&mut self, a: Block, b: Block) -> Block {
        a ^ b
    }
    fn and(&mut self, a: Block, b: Block) -> Block {
        match self.source.take() {
            Some(t) => self.core.and(a, b, &t),
            None => {
                self.exhausted = true;
                self.core.next_gate += 1;
                Block::ZERO
            }
        }
    }
    fn inv(&mut self, a: Block) -> Block {
        a
    }
}

/// 0-labels of every input wire, per input declaration.
#[derive(Clone, Debug)]
pub struct InputEncoding {
    pub delta: Block,
    pub decls: Vec<InputDecl>,
    pub zero: Vec<Vec<Block>>,
}

impl InputEncoding {
    pub fn random<R: RngCore + ?Sized>(decls: Vec<InputDecl>, delta: Block, rng: &mut R) -> Self {
        let zero = decls.iter().map(|d| (0..d.width).map(|_| Block::random(rng)).collect()).collect();
        InputEncoding { delta: Block(delta.0 | 1), decls, zero }
    }

    /// Active labels of input `idx` for the given bits.
    pub fn encode(&self, idx: usize, bits: &[bool]) -> Result<Vec<Block>> {
        let zero = &self.zero[idx];
        if bits.len() != zero.len() {
            return Err(Error::protocol(format!(
                "input {:?} expects {} bits, got {}",
                self.decls[idx].name,
                zero.len(),
                bits.len()
            )));
        }
        Ok(zero.iter().zip(bits).map(|(&z, &v)| z ^ self.delta.select(v)).collect())
    }

    /// `(label0, label1)` pairs of input `idx`, as offered through OT.
    pub fn pairs(&self, idx: usize) -> Vec<(Block, Block)> {
        self.zero[idx].iter().map(|&z| (z, z ^ self.delta)).collect()
    }

    /// Indices of inputs supplied by `party`.
    pub fn indices(&self, party: Party) -> Vec<usize> {
        (0..self.decls.len()).filter(|&i| self.decls[i].party == party).collect()
    }
}

/// Garbles `def` on the given input 0-labels, streaming tables into `sink`.
/// Returns the output words over 0-labels.
pub fn garble_with<D: CircuitDef, S: TableSink>(
    def: &D,
    core: &mut GarbleCore,
    input_zero: &[Vec<Block>],
    sink: S,
) -> (Vec<Word<Block>>, S) {
    let words: Vec<Word<Block>> = input_zero.iter().map(|w| w.iter().map(|&l| Bit::Wire(l)).collect()).collect();
    let mut b = Builder::new(GarbleBackend::new(core, sink));
    let outs = def.build(&mut b, &words);
    (outs, b.into_backend().into_sink())
}

/// Evaluates `def` on active input labels, pulling tables from `source`.
pub fn evaluate_with<D: CircuitDef, T: TableSource>(
    def: &D,
    core: &mut EvalCore,
    input_labels: &[Vec<Block>],
    source: T,
) -> Result<(Vec<Word<Block>>, T)> {
    let decls = def.inputs();
    if decls.len() != input_labels.len() || decls.iter().zip(input_labels).any(|(d, l)| d.width != l.len()) {
        return Err(Error::protocol("input labels do not match the circuit inputs"));
    }
    let words: Vec<Word<Block>> =
        input_labels.iter().map(|w| w.iter().map(|&l| Bit::Wire(l)).collect()).collect();
    let mut b = Builder::new(EvalBackend::new(core, source));
    let outs = def.build(&mut b, &words);
    let backend = b.into_backend();
    if backend.exhausted() {
        return Err(Error::protocol("garbled table stream ended early"));
    }
    Ok((outs, backend.into_source()))
}

/// Permute bits of the output 0-labels. Constant output bits get `false`;
/// the evaluator knows them structurally.
pub fn decode_map(outputs: &[Word<Block>]) -> Vec<Vec<bool>> {
    outputs
        .iter()
        .map(|w| {
            w.iter()
                .map(|b| match b {
                    Bit::Wire(l) => l.lsb(),
                    Bit::Const(_) => false,
                })
                .collect()
        })
        .collect()
}

/// Output bits from active output labels and the decode map.
pub fn decode(outputs: &[Word<Block>], map: &[Vec<bool>]) -> Result<Vec<Vec<bool>>> {
    if outputs.len() != map.len() || outputs.iter().zip(map).any(|(o, m)| o.len() != m.len()) {
        return Err(Error::protocol("decode map does not match the outputs"));
    }
    Ok(outputs
        .iter()
        .zip(map)
        .map(|(w, m)| {
            w.iter()
                .zip(m)
                .map(|(b, &d)| match b {
                    Bit::Wire(l) => l.lsb() ^ d,
                    Bit::Const(v) => *v,
                })
                .collect()
        })
        .collect())
}

/// A fully materialized garbled circuit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GarbledCircuit {
    pub session_id: [u8; 16],
    pub circuit_hash: [u8; 32],
    /// One 32-byte table per AND gate, in gate order.
    pub tables: Vec<u8>,
    pub decode: Vec<Vec<bool>>,
}

impl GarbledCircuit {
    pub fn table_bytes(&self) -> usize {
        self.tables.len()
    }
}

/// Everything the garbler holds after [`garble`].
#[derive(Clone, Debug)]
pub struct Garbling {
    pub gc: GarbledCircuit,
    pub encoding: InputEncoding,
    /// Active labels of the garbler's own inputs, in declaration order.
    pub garbler_labels: Vec<Block>,
    /// Label pairs of the evaluator's inputs, in declaration order.
    pub evaluator_pairs: Vec<(Block, Block)>,
}

/// Session id and labels are drawn from the seed, so equal seeds give
/// byte-identical output. `garbler_inputs` concatenates the garbler's
/// inputs in declaration order; circuits with public inputs take those
/// through [`InputEncoding::encode`] on the returned encoding.
pub fn garble<D: CircuitDef>(def: &D, garbler_inputs: &[bool], seed: [u8; 32]) -> Result<Garbling> {
    let mut rng = ChaCha20Rng::from_seed(seed);
    let mut session_id = [0u8; 16];
    rng.fill_bytes(&mut session_id);
    let delta = Block::random(&mut rng);
    let encoding = InputEncoding::random(def.inputs(), delta, &mut rng);
    let g_idx = encoding.indices(Party::Garbler);
    let expected: usize = g_idx.iter().map(|&i| encoding.decls[i].width).sum();
    if garbler_inputs.len() != expected {
        return Err(Error::protocol(format!(
            "garbler supplies {} input bits, circuit declares {expected}",
            garbler_inputs.len()
        )));
    }
    let mut garbler_labels = Vec::with_capacity(expected);
    let mut at = 0;
    for &i in &g_idx {
        let w = encoding.decls[i].width;
        garbler_labels.extend(encoding.encode(i, &garbler_inputs[at..at + w])?);
        at += w;
    }
    let evaluator_pairs = encoding.indices(Party::Evaluator).iter().flat_map(|&i| encoding.pairs(i)).collect();
    let mut core = GarbleCore::new(encoding.delta);
    let (outs, tables) = garble_with(def, &mut core, &encoding.zero, Vec::new());
    let gc = GarbledCircuit { session_id, circuit_hash: def.circuit_id(), tables, decode: decode_map(&outs) };
    Ok(Garbling { gc, encoding, garbler_labels, evaluator_pairs })
}

/// Evaluates a materialized garbled circuit. `input_labels` holds one
/// active label per input wire in declaration order.
pub fn evaluate<D: CircuitDef>(gc: &GarbledCircuit, def: &D, input_labels: &[Block]) -> Result<Vec<Word<Block>>> {
    if gc.circuit_hash != def.circuit_id() {
        return Err(Error::protocol("garbled circuit is bound to a different circuit"));
    }
    if gc.tables.len() % TABLE_BYTES != 0 {
        return Err(Error::protocol("garbled table size is not a whole number of tables"));
    }
    let labels = split_labels(&def.inputs(), input_labels)?;
    let mut core = EvalCore::new();
    let (outs, rest) = evaluate_with(def, &mut core, &labels, SliceSource::new(&gc.tables))?;
    if rest.remaining() != 0 {
        return Err(Error::protocol("garbled circuit carries extra tables"));
    }
    Ok(outs)
}

fn split_labels(decls: &[InputDecl], flat: &[Block]) -> Result<Vec<Vec<Block>>> {
    let total: usize = decls.iter().map(|d| d.width).sum();
    if flat.len() != total {
        return Err(Error::protocol(format!("expected {total} input labels, got {}", flat.len())));
    }
    let mut at = 0;
    Ok(decls
        .iter()
        .map(|d| {
            let v = flat[at..at + d.width].to_vec();
            at += d.width;
            v
        })
        .collect())
}

/// Gate-by-gate evaluation of a recorded circuit that also reports how many
/// labels were assigned to every wire. Returns the label of every wire.
pub fn evaluate_instrumented(gc: &GarbledCircuit, c: &BoolCircuit, input_labels: &[Block]) -> Result<(Vec<Block>, Vec<u32>)> {
    if gc.circuit_hash != c.hash() {
        return Err(Error::protocol("garbled circuit is bound to a different circuit"));
    }
    let n = c.num_wires() as usize;
    let mut labels = vec![Block::ZERO; n];
    let mut assigned = vec![0u32; n];
    let mut at = 0;
    for spec in c.input_specs() {
        for &w in &spec.wires {
            let l = *input_labels.get(at).ok_or_else(|| Error::protocol("too few input labels"))?;
            labels[w as usize] = l;
            assigned[w as usize] += 1;
            at += 1;
        }
    }
    let mut core = EvalCore::new();
    let mut src = SliceSource::new(&gc.tables);
    for g in c.gates() {
        let (out, v) = match *g {
            Gate::Xor { a, b, out } => (out, labels[a as usize] ^ labels[b as usize]),
            Gate::Inv { a, out } => (out, labels[a as usize]),
            Gate::And { a, b, out } => {
                let t = src.take().ok_or_else(|| Error::protocol("garbled table stream ended early"))?;
                (out, core.and(labels[a as usize], labels[b as usize], &t))
            }
        };
        labels[out as usize] = v;
        assigned[out as usize] += 1;
    }
    Ok((labels, assigned))
}

/// 0-label of every wire of a recorded circuit, computed by the garbler.
/// Also re-derives each AND table and checks that all four input label
/// combinations decrypt to the label of the right output value, i.e. that
/// `label1 = label0 ^ delta` holds on every wire as seen by an evaluator.
pub fn debug_check_labels(c: &BoolCircuit, g: &Garbling) -> Result<Vec<Block>> {
    let delta = g.encoding.delta;
    let n = c.num_wires() as usize;
    let mut zero = vec![Block::ZERO; n];
    for (spec, labels) in c.input_specs().iter().zip(&g.encoding.zero) {
        for (&w, &l) in spec.wires.iter().zip(labels) {
            zero[w as usize] = l;
        }
    }
    let mut core = GarbleCore::new(delta);
    let mut eval = EvalCore::new();
    for g2 in c.gates() {
        match *g2 {
            Gate::Xor { a, b, out } => zero[out as usize] = zero[a as usize] ^ zero[b as usize],
            Gate::Inv { a, out } => zero[out as usize] = zero[a as usize] ^ delta,
            Gate::And { a, b, out } => {
                let j = core.and_gates();
                let (c0, table) = core.and(zero[a as usize], zero[b as usize]);
                let start = j as usize * TABLE_BYTES;
                if g.gc.tables.get(start..start + TABLE_BYTES) != Some(&table[..]) {
                    return Err(Error::protocol(format!("table {j} differs from its re-garbling")));
                }
                for (va, vb) in [(false, false), (false, true), (true, false), (true, true)] {
                    let la = zero[a as usize] ^ delta.select(va);
                    let lb = zero[b as usize] ^ delta.select(vb);
                    eval.next_gate = j;
                    let got = eval.and(la, lb, &table);
                    if got != c0 ^ delta.select(va && vb) {
                        return Err(Error::protocol(format!("AND gate {j} decrypts wrongly on ({va}, {vb})")));
                    }
                }
                zero[out as usize] = c0;
            }
        }
    }
    Ok(zero)
}

/// Seed for per-session randomness derived from a master seed and a label.
pub fn derive_seed(master: &[u8], label: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"scanpath-gc-seed");
    h.update((label.len() as u32).to_be_bytes());
    h.update(label.as_bytes());
    h.update(master);
    h.finalize().into()
}

/// Result of [`run_local`].
#[derive(Clone, Debug)]
pub struct LocalRun {
    pub outputs: Vec<Vec<bool>>,
    pub table_bytes: usize,
    pub ot_bytes: usize,
}

/// Garble, OT and evaluate in one process, for testing and benchmarks.
/// Circuits with public inputs are not supported here.
pub fn run_local<D: CircuitDef>(
    def: &D,
    garbler_bits: &[bool],
    evaluator_bits: &[bool],
    seed: [u8; 32],
) -> Result<LocalRun> {
    let g = garble(def, garbler_bits, seed)?;
    if !g.encoding.indices(Party::Public).is_empty() {
        return Err(Error::protocol("run_local does not take public inputs"));
    }
    let mut s_rng = ChaCha20Rng::from_seed(derive_seed(&seed, "ot-sender"));
    let mut r_rng = ChaCha20Rng::from_seed(derive_seed(&seed, "ot-receiver"));
    let ot = ot::ot_transfer(&g.evaluator_pairs, evaluator_bits, &mut s_rng, &mut r_rng)?;
    let mut labels = Vec::new();
    let (mut gi, mut ei) = (g.garbler_labels.iter(), ot.received.iter());
    for d in &g.encoding.decls {
        let src = if d.party == Party::Garbler { &mut gi } else { &mut ei };
        labels.extend(src.by_ref().take(d.width).copied());
    }
    let outs = evaluate(&g.gc, def, &labels)?;
    Ok(LocalRun {
        outputs: decode(&outs, &g.gc.decode)?,
        table_bytes: g.gc.tables.len(),
        ot_bytes: ot.sender_bytes() + ot.receiver_bytes(),
    })
}
