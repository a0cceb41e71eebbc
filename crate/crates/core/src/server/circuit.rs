//! The composed circuit of a server-assisted session: bytewise
//! `CT_S = CT_B`, `K = M ^ R`, `K_mac = SHA256(K || "MAC" || IV)`,
//! `HMAC(K_mac, HEADER || d') = T`, AES-CTR decryption of `CT_S`, then the
//! comparison. Every score bit is ANDed with the check result and a final
//! `fail` bit is set when a check failed.

use sha2::{Digest, Sha256};

use super::record::{HEADER_BYTES, IV_RANGE};
use crate::boolcirc::aes::{encrypt_block, key_schedule, to_bytes};
use crate::boolcirc::comparison::{Comparison, ComparisonCircuit, Similarity};
use crate::boolcirc::sha256::sha256_bytes;
use crate::boolcirc::{Backend, Bit, Builder, CircuitDef, InputDecl, OutputDecl, Party, Word};
use crate::crypto::MAC_LABEL;
use crate::error::{Error, Result};
use crate::payload::AlgorithmParams;

pub const KMAC_COMPRESSIONS: usize = 1;
/// Inner hash over ipad block, HEADER and d' (64 + 58 + 32 bytes, padded to
/// three blocks); outer hash over opad block and the inner digest (two blocks).
pub const HMAC_COMPRESSIONS: usize = 5;

/// Input order of [`ServerCircuit`].
pub const INPUT_NAMES: [&str; 8] = ["ct_s", "header", "tag", "r", "ct_b", "d_prime", "m", "x_b"];

#[derive(Clone, Debug)]
pub struct ServerCircuit {
    params: AlgorithmParams,
    ct_len: usize,
    client_len: usize,
    cmp: ComparisonCircuit,
}

/// Result of the in-circuit integrity checks.
pub struct IntegrityCheck<W> {
    pub ok: Bit<W>,
    pub key: Vec<Word<W>>,
    pub compressions: usize,
}

/// `ct_s`, `ct_b`, `header`, `tag`, `d_prime` are byte words; `m`, `r` are
/// the 16 key bytes.
#[allow(clippy::too_many_arguments)]
pub fn verify_integrity<B: Backend>(
    b: &mut Builder<B>,
    ct_s: &[Word<B::Wire>],
    ct_b: &[Word<B::Wire>],
    header: &[Word<B::Wire>],
    tag: &[Word<B::Wire>],
    d_prime: &[Word<B::Wire>],
    m: &[Word<B::Wire>],
    r: &[Word<B::Wire>],
) -> IntegrityCheck<B::Wire> {
    let ct_ok = b.eq(&ct_s.concat(), &ct_b.concat());
    let key: Vec<Word<B::Wire>> = m.iter().zip(r).map(|(x, y)| b.xor_words(x, y)).collect();

    let mut kmac_msg = key.clone();
    kmac_msg.extend(MAC_LABEL.iter().map(|&c| b.constant(c as u64, 8)));
    kmac_msg.extend_from_slice(&header[IV_RANGE]);
    let (kmac, n1) = sha256_bytes(b, &kmac_msg);

    let pad = |b: &mut Builder<B>, byte: u8| -> Vec<Word<B::Wire>> {
        let c = b.constant(byte as u64, 8);
        let mut block: Vec<Word<B::Wire>> = kmac.iter().map(|k| b.xor_words(k, &c)).collect();
        block.resize(64, c);
        block
    };
    let mut inner = pad(b, 0x36);
    inner.extend_from_slice(header);
    inner.extend_from_slice(d_prime);
    let (inner_digest, n2) = sha256_bytes(b, &inner);
    let mut outer = pad(b, 0x5c);
    outer.extend(inner_digest);
    let (mac, n3) = sha256_bytes(b, &outer);
    let tag_ok = b.eq(&mac.concat(), &tag.concat());
    let ok = b.and(ct_ok, tag_ok);
    IntegrityCheck { ok, key, compressions: n1 + n2 + n3 }
}

/// `CT ^ AES_K(IV + i)` with the counter added in-circuit, big-endian over
/// all 128 bits.
pub fn aes_ctr_decrypt<B: Backend>(
    b: &mut Builder<B>,
    key: &[Word<B::Wire>],
    iv: &[Word<B::Wire>],
    ct: &[Word<B::Wire>],
) -> Vec<Word<B::Wire>> {
    if ct.is_empty() {
        return Vec::new();
    }
    let rk = key_schedule(b, key);
    // LSB-first 128-bit integer from big-endian bytes.
    let iv_int: Word<B::Wire> = iv.iter().rev().flatten().copied().collect();
    let mut out = Vec::with_capacity(ct.len());
    for (i, chunk) in ct.chunks(16).enumerate() {
        let ctr = if i == 0 {
            iv_int.clone()
        } else {
            let c = b.constant(i as u64, 128);
            b.add(&iv_int, &c)
        };
        let ctr_bytes: Vec<Word<B::Wire>> = to_bytes(&ctr).into_iter().rev().collect();
        let ks = encrypt_block(b, &rk, &ctr_bytes);
        for (c, k) in chunk.iter().zip(&ks) {
            out.push(b.xor_words(c, k));
        }
    }
    out
}

impl ServerCircuit {
    pub fn new(params: &AlgorithmParams, ct_len: usize, client_len: usize) -> Result<Self> {
        let cmp = ComparisonCircuit::for_params(params, ct_len, client_len)?;
        Ok(ServerCircuit { params: params.clone(), ct_len, client_len, cmp })
    }

    pub fn comparison(&self) -> &ComparisonCircuit {
        &self.cmp
    }

    pub fn ct_len(&self) -> usize {
        self.ct_len
    }

    /// Splits decoded outputs into the scores and the failure flag.
    /// `None` is the failure value.
    pub fn decode(&self, outputs: &[Vec<bool>]) -> Result<Option<Similarity>> {
        let (fail, scores) = outputs.split_last().ok_or_else(|| Error::protocol("missing outputs"))?;
        if fail.len() != 1 {
            return Err(Error::protocol("failure flag must be one bit"));
        }
        if fail[0] {
            if scores.iter().flatten().any(|&x| x) {
                return Err(Error::protocol("failure value carries nonzero score bits"));
            }
            return Ok(None);
        }
        self.cmp.decode(scores).map(Some)
    }
}

impl CircuitDef for ServerCircuit {
    fn inputs(&self) -> Vec<InputDecl> {
        let l = 8 * self.ct_len;
        vec![
            InputDecl::new(Party::Garbler, INPUT_NAMES[0], l),
            InputDecl::new(Party::Garbler, INPUT_NAMES[1], 8 * HEADER_BYTES),
            InputDecl::new(Party::Garbler, INPUT_NAMES[2], 256),
            InputDecl::new(Party::Garbler, INPUT_NAMES[3], 128),
            InputDecl::new(Party::Public, INPUT_NAMES[4], l),
            InputDecl::new(Party::Public, INPUT_NAMES[5], 256),
            InputDecl::new(Party::Evaluator, INPUT_NAMES[6], 128),
            InputDecl::new(Party::Evaluator, INPUT_NAMES[7], 8 * self.client_len),
        ]
    }

    fn outputs(&self) -> Vec<OutputDecl> {
        let mut o = self.cmp.result_outputs();
        o.push(OutputDecl::new("fail", 1));
        o
    }

    fn build<B: Backend>(&self, b: &mut Builder<B>, inputs: &[Word<B::Wire>]) -> Vec<Word<B::Wire>> {
        let bytes: Vec<Vec<Word<B::Wire>>> = inputs[..7].iter().map(|w| to_bytes(w)).collect();
        let [ct_s, header, tag, r, ct_b, d_prime, m] = &bytes[..] else { unreachable!() };
        let check = verify_integrity(b, ct_s, ct_b, header, tag, d_prime, m, r);
        let plain = aes_ctr_decrypt(b, &check.key, &header[IV_RANGE], ct_s);
        let scores = self.cmp.compare(b, &plain.concat(), &inputs[7]);
        let mut out: Vec<Word<B::Wire>> = scores.iter().map(|w| b.mask(check.ok, w)).collect();
        out.push(vec![b.not(check.ok)]);
        out
    }

    fn circuit_id(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"server-v1;");
        h.update(self.params.canonical().as_bytes());
        h.update((self.ct_len as u64).to_be_bytes());
        h.update((self.client_len as u64).to_be_bytes());
        h.update(self.cmp.describe().as_bytes());
        h.finalize().into()
    }
}
