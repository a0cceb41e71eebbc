//! Garbler and evaluator state machines over a [`Channel`], and the direct
//! two-party comparison session built on them.
//!
//! Message flow after the HELLO exchange:
//! 1. OT_MSG sender point, OT_MSG receiver points, OT_MSG masked label pairs.
//! 2. GC_STREAM header: session id, circuit hash, active labels of every
//!    input not supplied by the evaluator.
//! 3. GC_STREAM table chunks in gate order while the garbler is still garbling.
//! 4. OUTPUT decode map (permute bits of the output wires only).

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::boolcirc::comparison::{ComparisonCircuit, Similarity, TwoPartyCircuit};
use crate::boolcirc::{bits_to_bytes, bytes_to_bits, CircuitDef, Party};
use crate::error::{Error, Result};
use crate::gc::ot::{OtReceiver, OtSender, ReceiverChoices, SenderHello, SenderPayload};
use crate::gc::{self, Block, EvalCore, GarbleCore, InputEncoding, TableSink, TableSource, TABLE_BYTES};
use crate::payload::{Algorithm, AlgorithmParams};
use crate::transport::{Channel, MsgType, SessionMetrics};

pub const PROTOCOL_VERSION: u8 = 1;
/// Garbled tables per GC_STREAM frame.
pub const TABLES_PER_FRAME: usize = 2048;

struct ChannelSink<'a> {
    ch: &'a mut Channel,
    buf: Vec<u8>,
    error: Option<Error>,
    bytes: u64,
}

impl<'a> ChannelSink<'a> {
    fn new(ch: &'a mut Channel) -> Self {
        ChannelSink { ch, buf: Vec::with_capacity(TABLES_PER_FRAME * TABLE_BYTES), error: None, bytes: 0 }
    }

    fn flush(&mut self) {
        if self.buf.is_empty() || self.error.is_some() {
            return;
        }
        if let Err(e) = self.ch.send(MsgType::GcStream, &self.buf) {
            self.error = Some(e);
        }
        self.bytes += self.buf.len() as u64;
        self.buf.clear();
    }

    fn finish(mut self) -> Result<u64> {
        self.flush();
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.bytes),
        }
    }
}

impl TableSink for ChannelSink<'_> {
    fn put(&mut self, table: &[u8; TABLE_BYTES]) {
        self.buf.extend_from_slice(table);
        if self.buf.len() >= TABLES_PER_FRAME * TABLE_BYTES {
            self.flush();
        }
    }
}

struct ChannelSource<'a> {
    ch: &'a mut Channel,
    buf: Vec<u8>,
    pos: usize,
    error: Option<Error>,
}

impl TableSource for ChannelSource<'_> {
    fn take(&mut self) -> Option<[u8; TABLE_BYTES]> {
        if self.pos == self.buf.len() {
            if self.error.is_some() {
                return None;
            }
            match self.ch.expect(MsgType::GcStream) {
                Ok(p) if !p.is_empty() && p.len() % TABLE_BYTES == 0 => {
                    self.buf = p;
                    self.pos = 0;
                }
                Ok(_) => {
                    self.error = Some(Error::protocol("garbled table frame is not a whole number of tables"));
                    return None;
                }
                Err(e) => {
                    self.error = Some(e);
                    return None;
                }
            }
        }
        let t = self.buf[self.pos..self.pos + TABLE_BYTES].try_into().unwrap();
        self.pos += TABLE_BYTES;
        Some(t)
    }
}

/// What the garbler learns from running a circuit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GarbleStats {
    pub and_gates: u64,
    pub table_bytes: u64,
    pub ot_transfers: u64,
}

/// Garbler side. `known[i]` holds the bits of input `i` unless the
/// evaluator supplies it.
pub fn garbler_run<D: CircuitDef, R: RngCore + rand::CryptoRng>(
    ch: &mut Channel,
    def: &D,
    known: &[Option<Vec<bool>>],
    rng: &mut R,
) -> Result<GarbleStats> {
    let decls = def.inputs();
    if known.len() != decls.len() {
        return Err(Error::protocol("garbler inputs do not match the circuit"));
    }
    let mut session_id = [0u8; 16];
    rng.fill_bytes(&mut session_id);
    let delta = Block::random(rng);
    let enc = InputEncoding::random(decls.clone(), delta, rng);

    let pairs: Vec<(Block, Block)> = enc.indices(Party::Evaluator).iter().flat_map(|&i| enc.pairs(i)).collect();
    let (sender, hello) = OtSender::new(rng);
    ch.send(MsgType::OtMsg, &hello.to_bytes())?;
    let choices = ReceiverChoices::from_bytes(&ch.expect(MsgType::OtMsg)?)?;
    let payload = sender.respond(&choices, &pairs)?;
    ch.send(MsgType::OtMsg, &payload.to_bytes())?;

    let mut head = Vec::new();
    head.extend_from_slice(&session_id);
    head.extend_from_slice(&def.circuit_id());
    for (i, d) in decls.iter().enumerate() {
        if d.party == Party::Evaluator {
            continue;
        }
        let bits = known[i].as_ref().ok_or_else(|| Error::protocol(format!("no value for input {:?}", d.name)))?;
        for l in enc.encode(i, bits)? {
            head.extend_from_slice(&l.to_bytes());
        }
    }
    ch.send(MsgType::GcStream, &head)?;

    let mut core = GarbleCore::new(enc.delta);
    let (outs, sink) = gc::garble_with(def, &mut core, &enc.zero, ChannelSink::new(ch));
    let table_bytes = sink.finish()?;
    let map: Vec<bool> = gc::decode_map(&outs).concat();
    ch.send(MsgType::Output, &bits_to_bytes(&map))?;
    Ok(GarbleStats { and_gates: core.and_gates(), table_bytes, ot_transfers: pairs.len() as u64 })
}

/// Decoded outputs and gate count seen by the evaluator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalResult {
    pub outputs: Vec<Vec<bool>>,
    pub and_gates: u64,
}

/// Evaluator side. `own[i]` holds the bits of input `i` when the evaluator
/// supplies it.
pub fn evaluator_run<D: CircuitDef, R: RngCore + rand::CryptoRng>(
    ch: &mut Channel,
    def: &D,
    own: &[Option<Vec<bool>>],
    rng: &mut R,
) -> Result<EvalResult> {
    let decls = def.inputs();
    if own.len() != decls.len() {
        return Err(Error::protocol("evaluator inputs do not match the circuit"));
    }
    let mut choices = Vec::new();
    for (d, v) in decls.iter().zip(own) {
        if d.party == Party::Evaluator {
            let bits = v.as_ref().ok_or_else(|| Error::protocol(format!("no value for input {:?}", d.name)))?;
            if bits.len() != d.width {
                return Err(Error::protocol(format!("input {:?} needs {} bits", d.name, d.width)));
            }
            choices.extend_from_slice(bits);
        }
    }
    let hello = SenderHello::from_bytes(&ch.expect(MsgType::OtMsg)?)?;
    let (receiver, msg) = OtReceiver::choose(&hello, &choices, rng)?;
    ch.send(MsgType::OtMsg, &msg.to_bytes())?;
    let received = receiver.finish(&SenderPayload::from_bytes(&ch.expect(MsgType::OtMsg)?)?)?;

    let head = ch.expect(MsgType::GcStream)?;
    let other: usize = decls.iter().filter(|d| d.party != Party::Evaluator).map(|d| d.width).sum();
    if head.len() != 48 + 16 * other {
        return Err(Error::protocol("garbled circuit header has the wrong size"));
    }
    if head[16..48] != def.circuit_id() {
        return Err(Error::protocol("garbled circuit is bound to a different circuit"));
    }
    let mut theirs = head[48..].chunks(16).map(|c| Block::from_bytes(c.try_into().unwrap()));
    let mut mine = received.into_iter();
    let labels: Vec<Vec<Block>> = decls
        .iter()
        .map(|d| {
            if d.party == Party::Evaluator {
                mine.by_ref().take(d.width).collect()
            } else {
                theirs.by_ref().take(d.width).collect()
            }
        })
        .collect();

    let mut core = EvalCore::new();
    let source = ChannelSource { ch, buf: Vec::new(), pos: 0, error: None };
    let result = gc::evaluate_with(def, &mut core, &labels, source);
    let (outs, source) = match result {
        Ok(v) => v,
        Err(e) => return Err(e),
    };
    if let Some(e) = source.error {
        return Err(e);
    }
    if source.pos != source.buf.len() {
        return Err(Error::protocol("garbled circuit carries extra tables"));
    }
    let widths: Vec<usize> = def.outputs().iter().map(|o| o.width).collect();
    let total: usize = widths.iter().sum();
    let packed = ch.expect(MsgType::Output)?;
    if packed.len() != total.div_ceil(8) {
        return Err(Error::protocol("decode map has the wrong size"));
    }
    let flat = bytes_to_bits(&packed);
    let mut at = 0;
    let map: Vec<Vec<bool>> = widths
        .iter()
        .map(|&w| {
            let v = flat[at..at + w].to_vec();
            at += w;
            v
        })
        .collect();
    Ok(EvalResult { outputs: gc::decode(&outs, &map)?, and_gates: core.and_gates() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Garbler,
    Evaluator,
    /// Client of the server-assisted protocol.
    Client,
    /// Storage server of the server-assisted protocol.
    Server,
}

impl Role {
    pub fn tag(self) -> u8 {
        match self {
            Role::Garbler => 0,
            Role::Evaluator => 1,
            Role::Client => 2,
            Role::Server => 3,
        }
    }

    pub fn from_tag(t: u8) -> Option<Self> {
        Some(match t {
            0 => Role::Garbler,
            1 => Role::Evaluator,
            2 => Role::Client,
            3 => Role::Server,
            _ => return None,
        })
    }
}

impl std::str::FromStr for Role {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "garbler" => Ok(Role::Garbler),
            "evaluator" => Ok(Role::Evaluator),
            "client" => Ok(Role::Client),
            "server" => Ok(Role::Server),
            _ => Err(Error::invalid(format!("unknown role {s:?}"))),
        }
    }
}

/// HELLO of the direct session: version, role, algorithm tag, parameter
/// digest, payload length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hello {
    pub role: Role,
    pub algorithm: Algorithm,
    pub params_digest: [u8; 32],
    pub payload_len: u32,
}

impl Hello {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut v = vec![PROTOCOL_VERSION, self.role.tag(), self.algorithm.tag()];
        v.extend_from_slice(&self.params_digest);
        v.extend_from_slice(&self.payload_len.to_be_bytes());
        v
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        if b.len() != 39 {
            return Err(Error::protocol("HELLO has the wrong size"));
        }
        if b[0] != PROTOCOL_VERSION {
            return Err(Error::protocol(format!("unsupported protocol version {}", b[0])));
        }
        Ok(Hello {
            role: Role::from_tag(b[1]).ok_or_else(|| Error::protocol("unknown role in HELLO"))?,
            algorithm: Algorithm::from_tag(b[2]).ok_or_else(|| Error::protocol("unknown algorithm in HELLO"))?,
            params_digest: b[3..35].try_into().unwrap(),
            payload_len: u32::from_be_bytes(b[35..39].try_into().unwrap()),
        })
    }
}

#[derive(Clone, Debug)]
pub struct SessionReport {
    pub similarity: Similarity,
    pub metrics: SessionMetrics,
    pub and_gates: u64,
    pub table_bytes: u64,
    pub seed: u64,
}

pub fn session_rng(seed: u64, label: &str) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(gc::derive_seed(&seed.to_le_bytes(), label))
}

/// Runs `f`, telling the peer about any failure other than a dead link.
pub fn with_abort<T>(ch: &mut Channel, f: impl FnOnce(&mut Channel) -> Result<T>) -> Result<T> {
    let r = f(ch);
    if let Err(e) = &r {
        if !matches!(e, Error::Transport(_)) && !e.to_string().starts_with("peer aborted") {
            ch.abort(e);
        }
    }
    r
}

fn exchange_hello(ch: &mut Channel, mine: &Hello, peer_role: Role) -> Result<Hello> {
    ch.send(MsgType::Hello, &mine.to_bytes())?;
    let theirs = Hello::from_bytes(&ch.expect(MsgType::Hello)?)?;
    if theirs.role != peer_role {
        return Err(Error::protocol(format!("peer announced role {:?}, expected {peer_role:?}", theirs.role)));
    }
    if theirs.params_digest != mine.params_digest || theirs.algorithm != mine.algorithm {
        return Err(Error::ParamsMismatch("peer runs with different algorithm parameters".into()));
    }
    Ok(theirs)
}

/// Direct two-party comparison, garbler side (party A). Both parties learn
/// the result.
pub fn compare_as_garbler(ch: &mut Channel, params: &AlgorithmParams, payload: &[u8], seed: u64) -> Result<SessionReport> {
    params.check_payload(payload)?;
    ch.reset_clock();
    with_abort(ch, |ch| {
        let hello = Hello {
            role: Role::Garbler,
            algorithm: params.algorithm(),
            params_digest: params.digest(),
            payload_len: payload.len() as u32,
        };
        let peer = exchange_hello(ch, &hello, Role::Evaluator)?;
        let cmp = ComparisonCircuit::for_params(params, payload.len(), peer.payload_len as usize)?;
        let circuit = TwoPartyCircuit(cmp);
        let mut rng = session_rng(seed, "garbler");
        let stats = garbler_run(ch, &circuit, &[Some(bytes_to_bits(payload)), None], &mut rng)?;
        let out = ch.expect(MsgType::Output)?;
        let widths: usize = circuit.outputs().iter().map(|o| o.width).sum();
        let bits = bytes_to_bits(&out);
        if bits.len() != widths.div_ceil(8) * 8 {
            return Err(Error::protocol("result frame has the wrong size"));
        }
        let similarity = circuit.0.decode(&split_outputs(&circuit, &bits[..widths]))?;
        ch.finish()?;
        Ok(SessionReport { similarity, metrics: ch.metrics(), and_gates: stats.and_gates, table_bytes: stats.table_bytes, seed })
    })
}

/// Direct two-party comparison, evaluator side (party B).
pub fn compare_as_evaluator(ch: &mut Channel, params: &AlgorithmParams, payload: &[u8], seed: u64) -> Result<SessionReport> {
    params.check_payload(payload)?;
    ch.reset_clock();
    with_abort(ch, |ch| {
        let hello = Hello {
            role: Role::Evaluator,
            algorithm: params.algorithm(),
            params_digest: params.digest(),
            payload_len: payload.len() as u32,
        };
        let peer = exchange_hello(ch, &hello, Role::Garbler)?;
        let cmp = ComparisonCircuit::for_params(params, peer.payload_len as usize, payload.len())?;
        let circuit = TwoPartyCircuit(cmp);
        let mut rng = session_rng(seed, "evaluator");
        let r = evaluator_run(ch, &circuit, &[None, Some(bytes_to_bits(payload))], &mut rng)?;
        ch.send(MsgType::Output, &bits_to_bytes(&r.outputs.concat()))?;
        let similarity = circuit.0.decode(&r.outputs)?;
        ch.finish()?;
        Ok(SessionReport {
            similarity,
            metrics: ch.metrics(),
            and_gates: r.and_gates,
            table_bytes: r.and_gates * TABLE_BYTES as u64,
            seed,
        })
    })
}

pub(crate) fn split_outputs<D: CircuitDef>(def: &D, flat: &[bool]) -> Vec<Vec<bool>> {
    let mut at = 0;
    def.outputs()
        .iter()
        .map(|o| {
            let v = flat[at..at + o.width].to_vec();
            at += o.width;
            v
        })
        .collect()
}

/// Both parties of a direct session in one process over an in-memory link.
/// Returns the garbler's and the evaluator's reports.
pub fn compare_in_process(
    params: &AlgorithmParams,
    payload_a: &[u8],
    payload_b: &[u8],
    seed: u64,
    profile: &crate::transport::NetProfile,
) -> Result<(SessionReport, SessionReport)> {
    let (mut ca, mut cb) = crate::transport::memory_pair(profile);
    std::thread::scope(|s| {
        let g = s.spawn(|| compare_as_garbler(&mut ca, params, payload_a, seed));
        let e = compare_as_evaluator(&mut cb, params, payload_b, seed);
        let g = g.join().map_err(|_| Error::protocol("garbler thread panicked"))?;
        Ok((g?, e?))
    })
}
