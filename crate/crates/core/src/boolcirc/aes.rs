//! AES-128 forward cipher as a circuit.
//!
//! Bytes are 8-bit words (LSB first) and blocks are 16 bytes in the usual
//! column-major byte order. The S-box is the 34-AND straight-line program
//! of Boyar and Peralta, so a full encryption costs 6800 AND gates with the
//! key schedule included.

use sha2::{Digest, Sha256};

use super::{bytes_to_bits, Backend, Bit, Builder, CircuitDef, InputDecl, OutputDecl, Party, Word};

#[derive(Clone, Copy)]
enum Op {
    X,
    A,
    N,
}
use Op::*;

// Inputs 0..8 are U0..U7 (U0 = most significant bit); the last eight
// entries are S0..S7 (S0 = most significant bit).
const SBOX_PROGRAM: [(Op, u8, u8); 128] = [
    (X, 0, 3), (X, 0, 5), (X, 0, 6), (X, 3, 5), (X, 4, 6), (X, 8, 12), (X, 1, 2), (X, 7, 13),
    (X, 7, 14), (X, 13, 14), (X, 1, 5), (X, 2, 5), (X, 10, 11), (X, 13, 18), (X, 12, 18), (X, 12, 19),
    (X, 16, 23), (X, 3, 7), (X, 14, 25), (X, 8, 26), (X, 6, 7), (X, 14, 28), (X, 9, 29), (X, 9, 17),
    (X, 27, 24), (X, 10, 23), (X, 8, 19), (A, 20, 13), (A, 30, 15), (X, 21, 35), (A, 26, 7), (X, 38, 35),
    (A, 10, 23), (A, 29, 16), (X, 33, 40), (A, 27, 24), (X, 43, 40), (A, 8, 22), (A, 11, 34), (X, 46, 45),
    (A, 9, 17), (X, 48, 45), (X, 37, 36), (X, 39, 31), (X, 42, 41), (X, 44, 49), (X, 50, 47), (X, 51, 49),
    (X, 52, 47), (X, 53, 32), (X, 56, 57), (A, 56, 54), (X, 55, 59), (X, 54, 55), (X, 57, 59), (A, 62, 61),
    (A, 60, 58), (A, 54, 57), (A, 61, 65), (X, 61, 59), (A, 55, 56), (A, 58, 68), (X, 58, 59), (X, 55, 63),
    (X, 66, 67), (X, 57, 64), (X, 69, 70), (X, 72, 74), (X, 71, 73), (X, 71, 72), (X, 73, 74), (X, 76, 75),
    (A, 78, 13), (A, 74, 15), (A, 73, 7), (A, 77, 23), (A, 72, 16), (A, 71, 24), (A, 76, 22), (A, 79, 34),
    (A, 75, 17), (A, 78, 20), (A, 74, 30), (A, 73, 26), (A, 77, 10), (A, 72, 29), (A, 71, 27), (A, 76, 8),
    (A, 79, 11), (A, 75, 9), (X, 95, 96), (X, 84, 90), (X, 80, 82), (X, 81, 89), (X, 88, 92), (X, 83, 95),
    (X, 96, 103), (X, 80, 101), (X, 85, 93), (X, 86, 87), (X, 87, 102), (X, 94, 100), (X, 82, 85), (X, 84, 98),
    (X, 86, 95), (X, 89, 99), (X, 90, 98), (X, 91, 99), (X, 92, 106), (X, 97, 102), (X, 98, 99), (X, 99, 105),
    (X, 101, 110), (X, 116, 100), (X, 113, 107), (X, 104, 108), (X, 105, 107), (X, 106, 108), (X, 109, 112), (X, 109, 115),
    (X, 104, 122), (N, 114, 124), (N, 117, 126), (X, 104, 119), (X, 118, 120), (X, 123, 127), (N, 111, 125), (N, 104, 121),
];

pub const SBOX_AND_GATES: usize = 34;

/// Substitutes one byte.
pub fn sbox<B: Backend>(b: &mut Builder<B>, byte: &[Bit<B::Wire>]) -> Word<B::Wire> {
    let mut v: Vec<Bit<B::Wire>> = Vec::with_capacity(8 + SBOX_PROGRAM.len());
    v.extend((0..8).map(|i| byte[7 - i]));
    for &(op, x, y) in SBOX_PROGRAM.iter() {
        let (x, y) = (v[x as usize], v[y as usize]);
        let r = match op {
            X => b.xor(x, y),
            A => b.and(x, y),
            N => {
                let t = b.xor(x, y);
                b.not(t)
            }
        };
        v.push(r);
    }
    let n = v.len();
    (0..8).map(|i| v[n - 1 - i]).collect()
}

fn xtime<B: Backend>(b: &mut Builder<B>, a: &[Bit<B::Wire>]) -> Word<B::Wire> {
    let hi = a[7];
    vec![
        hi,
        b.xor(a[0], hi),
        a[1],
        b.xor(a[2], hi),
        b.xor(a[3], hi),
        a[4],
        a[5],
        a[6],
    ]
}

fn xor_bytes<B: Backend>(b: &mut Builder<B>, x: &[Word<B::Wire>], y: &[Word<B::Wire>]) -> Vec<Word<B::Wire>> {
    x.iter().zip(y).map(|(p, q)| b.xor_words(p, q)).collect()
}

const RCON: [u8; 10] = [0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80, 0x1b, 0x36];

/// Expands a 16-byte key into 11 round keys of 16 bytes each.
pub fn key_schedule<B: Backend>(b: &mut Builder<B>, key: &[Word<B::Wire>]) -> Vec<Vec<Word<B::Wire>>> {
    assert_eq!(key.len(), 16);
    let mut w: Vec<Vec<Word<B::Wire>>> = key.chunks(4).map(|c| c.to_vec()).collect();
    for i in 4..44 {
        let prev = w[i - 1].clone();
        let t = if i % 4 == 0 {
            let rot = [prev[1].clone(), prev[2].clone(), prev[3].clone(), prev[0].clone()];
            let mut sub: Vec<Word<B::Wire>> = rot.iter().map(|x| sbox(b, x)).collect();
            let rc = b.constant(RCON[i / 4 - 1] as u64, 8);
            sub[0] = b.xor_words(&sub[0], &rc);
            sub
        } else {
            prev
        };
        let next = xor_bytes(b, &w[i - 4], &t);
        w.push(next);
    }
    w.chunks(4).map(|c| c.concat()).collect()
}

/// Encrypts one 16-byte block under expanded round keys.
pub fn encrypt_block<B: Backend>(
    b: &mut Builder<B>,
    round_keys: &[Vec<Word<B::Wire>>],
    block: &[Word<B::Wire>],
) -> Vec<Word<B::Wire>> {
    assert_eq!(block.len(), 16);
    let mut s = xor_bytes(b, block, &round_keys[0]);
    for (round, rk) in round_keys.iter().enumerate().skip(1) {
        let sub: Vec<Word<B::Wire>> = s.iter().map(|x| sbox(b, x)).collect();
        let shifted: Vec<Word<B::Wire>> =
            (0..16).map(|i| sub[i % 4 + 4 * ((i / 4 + i % 4) % 4)].clone()).collect();
        let mixed = if round < 10 {
            let mut out = Vec::with_capacity(16);
            for c in 0..4 {
                let col = &shifted[4 * c..4 * c + 4];
                let dbl: Vec<Word<B::Wire>> = col.iter().map(|x| xtime(b, x)).collect();
                for r in 0..4 {
                    // 2*a_r ^ 3*a_{r+1} ^ a_{r+2} ^ a_{r+3}
                    let t1 = b.xor_words(&dbl[r], &dbl[(r + 1) % 4]);
                    let t2 = b.xor_words(&t1, &col[(r + 1) % 4]);
                    let t3 = b.xor_words(&t2, &col[(r + 2) % 4]);
                    out.push(b.xor_words(&t3, &col[(r + 3) % 4]));
                }
            }
            out
        } else {
            shifted
        };
        s = xor_bytes(b, &mixed, rk);
    }
    s
}

/// Splits a flat LSB-first bit vector into bytes.
pub fn to_bytes<W: Copy>(bits: &[Bit<W>]) -> Vec<Word<W>> {
    bits.chunks(8).map(|c| c.to_vec()).collect()
}

/// AES-128 with a garbler-held key and an evaluator-held plaintext block.
#[derive(Clone, Copy, Debug, Default)]
pub struct Aes128Circuit;

impl CircuitDef for Aes128Circuit {
    fn inputs(&self) -> Vec<InputDecl> {
        vec![InputDecl::new(Party::Garbler, "key", 128), InputDecl::new(Party::Evaluator, "plaintext", 128)]
    }

    fn outputs(&self) -> Vec<OutputDecl> {
        vec![OutputDecl::new("ciphertext", 128)]
    }

    fn build<B: Backend>(&self, b: &mut Builder<B>, inputs: &[Word<B::Wire>]) -> Vec<Word<B::Wire>> {
        let rk = key_schedule(b, &to_bytes(&inputs[0]));
        let ct = encrypt_block(b, &rk, &to_bytes(&inputs[1]));
        vec![ct.concat()]
    }

    fn circuit_id(&self) -> [u8; 32] {
        Sha256::digest(b"aes128-v1").into()
    }
}

pub fn build_aes128_circuit() -> super::BoolCircuit {
    super::record(&Aes128Circuit).expect("fixed circuit")
}

/// Input bits for [`Aes128Circuit`].
pub fn aes_inputs(key: &[u8; 16], block: &[u8; 16]) -> Vec<Vec<bool>> {
    vec![bytes_to_bits(key), bytes_to_bits(block)]
}
