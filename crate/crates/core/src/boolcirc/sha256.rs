//! SHA-256 compression function as a circuit.
//!
//! 32-bit words are LSB first; byte strings map to words big-endian as in
//! the standard.

use sha2::{Digest, Sha256};

use super::{Backend, Bit, Builder, CircuitDef, InputDecl, OutputDecl, Party, Word};

pub const IV: [u32; 8] = [
    0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a, 0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19,
];

const K: [u32; 64] = [
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5,
    0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174,
    0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967,
    0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
    0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
    0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2,
];

fn rotr<W: Copy>(x: &[Bit<W>], n: usize) -> Word<W> {
    (0..32).map(|i| x[(i + n) % 32]).collect()
}

fn shr<W: Copy>(x: &[Bit<W>], n: usize) -> Word<W> {
    (0..32).map(|i| if i + n < 32 { x[i + n] } else { Bit::Const(false) }).collect()
}

fn xor3<B: Backend>(b: &mut Builder<B>, x: &[Bit<B::Wire>], y: &[Bit<B::Wire>], z: &[Bit<B::Wire>]) -> Word<B::Wire> {
    let t = b.xor_words(x, y);
    b.xor_words(&t, z)
}

/// Word from four big-endian bytes.
pub fn word_from_be<W: Copy>(bytes: &[Word<W>]) -> Word<W> {
    bytes.iter().rev().flat_map(|x| x.iter().copied()).collect()
}

/// Four big-endian bytes from a word.
pub fn word_to_be<W: Copy>(w: &[Bit<W>]) -> Vec<Word<W>> {
    (0..4).rev().map(|k| w[8 * k..8 * k + 8].to_vec()).collect()
}

/// One compression: `state` is 8 words, `block` 16 words.
pub fn compress<B: Backend>(b: &mut Builder<B>, state: &[Word<B::Wire>], block: &[Word<B::Wire>]) -> Vec<Word<B::Wire>> {
    assert_eq!(state.len(), 8);
    assert_eq!(block.len(), 16);
    let mut w: Vec<Word<B::Wire>> = block.to_vec();
    for t in 16..64 {
        let s0 = {
            let x = &w[t - 15];
            xor3(b, &rotr(x, 7), &rotr(x, 18), &shr(x, 3))
        };
        let s1 = {
            let x = &w[t - 2];
            xor3(b, &rotr(x, 17), &rotr(x, 19), &shr(x, 10))
        };
        let a1 = b.add(&w[t - 16], &s0);
        let a2 = b.add(&a1, &w[t - 7]);
        let next = b.add(&a2, &s1);
        w.push(next);
    }
    let mut v: Vec<Word<B::Wire>> = state.to_vec();
    for t in 0..64 {
        let (a, bb, c, d, e, f, g, h) =
            (&v[0], &v[1], &v[2], &v[3], &v[4], &v[5], &v[6], &v[7]);
        let big_s1 = xor3(b, &rotr(e, 6), &rotr(e, 11), &rotr(e, 25));
        let fg = b.xor_words(f, g);
        let efg = b.mask_words(e, &fg);
        let ch = b.xor_words(g, &efg);
        let k = b.constant(K[t] as u64, 32);
        let t1 = b.add(h, &big_s1);
        let t1 = b.add(&t1, &ch);
        let t1 = b.add(&t1, &k);
        let t1 = b.add(&t1, &w[t]);
        let big_s0 = xor3(b, &rotr(a, 2), &rotr(a, 13), &rotr(a, 22));
        let ab = b.xor_words(a, bb);
        let bc = b.xor_words(bb, c);
        let abc = b.mask_words(&ab, &bc);
        let maj = b.xor_words(bb, &abc);
        let t2 = b.add(&big_s0, &maj);
        let new_e = b.add(d, &t1);
        let new_a = b.add(&t1, &t2);
        v = vec![new_a, a.clone(), bb.clone(), c.clone(), new_e, e.clone(), f.clone(), g.clone()];
    }
    state.iter().zip(&v).map(|(s, x)| b.add(s, x)).collect()
}

/// Hashes a byte string whose length is public. Returns the 32 digest
/// bytes and the number of compressions spent.
pub fn sha256_bytes<B: Backend>(b: &mut Builder<B>, msg: &[Word<B::Wire>]) -> (Vec<Word<B::Wire>>, usize) {
    let mut bytes = msg.to_vec();
    let bitlen = (msg.len() as u64) * 8;
    bytes.push(b.constant(0x80, 8));
    while bytes.len() % 64 != 56 {
        bytes.push(b.constant(0, 8));
    }
    for k in (0..8).rev() {
        bytes.push(b.constant((bitlen >> (8 * k)) & 0xff, 8));
    }
    let mut state: Vec<Word<B::Wire>> = IV.iter().map(|&x| b.constant(x as u64, 32)).collect();
    let blocks = bytes.len() / 64;
    for blk in bytes.chunks(64) {
        let words: Vec<Word<B::Wire>> = blk.chunks(4).map(word_from_be).collect();
        state = compress(b, &state, &words);
    }
    (state.iter().flat_map(|w| word_to_be(w)).collect(), blocks)
}

impl<B: Backend> Builder<B> {
    /// Bitwise AND of two words.
    pub fn mask_words(&mut self, a: &[Bit<B::Wire>], c: &[Bit<B::Wire>]) -> Word<B::Wire> {
        a.iter().zip(c).map(|(&x, &y)| self.and(x, y)).collect()
    }
}

/// Single compression with a garbler-held chaining value and an
/// evaluator-held block. Inputs and output are big-endian byte strings
/// (32, 64 and 32 bytes) as LSB-first bits per byte.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sha256CompressCircuit;

impl CircuitDef for Sha256CompressCircuit {
    fn inputs(&self) -> Vec<InputDecl> {
        vec![InputDecl::new(Party::Garbler, "chaining", 256), InputDecl::new(Party::Evaluator, "block", 512)]
    }

    fn outputs(&self) -> Vec<OutputDecl> {
        vec![OutputDecl::new("state", 256)]
    }

    fn build<B: Backend>(&self, b: &mut Builder<B>, inputs: &[Word<B::Wire>]) -> Vec<Word<B::Wire>> {
        let words = |bits: &[Bit<B::Wire>]| -> Vec<Word<B::Wire>> {
            super::aes::to_bytes(bits).chunks(4).map(word_from_be).collect()
        };
        let state = words(&inputs[0]);
        let block = words(&inputs[1]);
        let out = compress(b, &state, &block);
        vec![out.iter().flat_map(|w| word_to_be(w)).flatten().collect()]
    }

    fn circuit_id(&self) -> [u8; 32] {
        Sha256::digest(b"sha256-compress-v1").into()
    }
}

pub fn build_sha256_compression_circuit() -> super::BoolCircuit {
    super::record(&Sha256CompressCircuit).expect("fixed circuit")
}
