//! Needleman-Wunsch score over two private symbol sequences.
//!
//! For every symbol `b_j` the circuit derives the matrix column
//! `M[., b_j]` with XOR gates only (one-hot decode of `b_j` against the
//! public matrix), then each cell picks `M[a_i, b_j]` out of that column
//! with a multiplexer tree indexed by `a_i`.

use sha2::{Digest, Sha256};

use super::comparison::{Comparison, Similarity, TwoPartyCircuit};
use super::{record, Backend, Bit, BoolCircuit, Builder, OutputDecl, Word};
use crate::error::{Error, Result};
use crate::fixedpoint::{bit_length, bits_to_int, min_bitwidth_for_row};
use crate::plaintext::{normalize_scanmatch, SubstitutionMatrix};

#[derive(Clone, Debug)]
pub struct ScanMatchCircuit {
    len_a: usize,
    len_b: usize,
    matrix: SubstitutionMatrix,
}

impl ScanMatchCircuit {
    pub fn new(len_a: usize, len_b: usize, matrix: SubstitutionMatrix) -> Result<Self> {
        if len_a == 0 || len_b == 0 {
            return Err(Error::invalid("ScanMatch sequences must be nonempty"));
        }
        if matrix.size() > 256 {
            return Err(Error::invalid("ScanMatch symbols must fit one byte"));
        }
        Ok(ScanMatchCircuit { len_a, len_b, matrix })
    }

    pub fn lengths(&self) -> (usize, usize) {
        (self.len_a, self.len_b)
    }

    pub fn matrix(&self) -> &SubstitutionMatrix {
        &self.matrix
    }

    fn index_bits(&self) -> usize {
        bit_length(self.matrix.size() as u64 - 1) as usize
    }

    fn score_bits(&self) -> usize {
        (bit_length(self.matrix.max_score() as u64) as usize).max(1)
    }

    /// Signed width of DP row `i`.
    pub fn row_width(&self, i: usize) -> usize {
        let m = &self.matrix;
        let max = m.max_score() as u64;
        if m.gap_del == 0 && m.gap_ins == 0 {
            min_bitwidth_for_row(i, max, 0, 0) as usize
        } else {
            // Gap runs can push a cell down to -(i + j) * gap.
            min_bitwidth_for_row(i + self.len_b, max, m.gap_del as u64, m.gap_ins as u64) as usize
        }
    }

    pub fn decode(&self, outputs: &[Vec<bool>]) -> Similarity {
        let raw = bits_to_int(&outputs[0], true);
        let score = normalize_scanmatch(raw, self.matrix.max_score(), self.len_a, self.len_b);
        Similarity::ScanMatch { raw, score }
    }
}

impl Comparison for ScanMatchCircuit {
    fn payload_len_a(&self) -> usize {
        self.len_a
    }

    fn payload_len_b(&self) -> usize {
        self.len_b
    }

    fn result_outputs(&self) -> Vec<OutputDecl> {
        vec![OutputDecl::new("raw_score", self.row_width(self.len_a))]
    }

    fn compare<B: Backend>(
        &self,
        b: &mut Builder<B>,
        a_bits: &[Bit<B::Wire>],
        b_bits: &[Bit<B::Wire>],
    ) -> Vec<Word<B::Wire>> {
        let m = &self.matrix;
        let (k, sw, size) = (self.index_bits(), self.score_bits(), m.size());
        let sym = |bits: &[Bit<B::Wire>], i: usize| bits[8 * i..8 * i + k].to_vec();

        let mut cols = Vec::with_capacity(self.len_b);
        for j in 0..self.len_b {
            let onehot = b.decode_onehot(&sym(b_bits, j), size);
            let col: Vec<Word<B::Wire>> = (0..size)
                .map(|s| {
                    (0..sw)
                        .map(|bit| {
                            let mut acc = Bit::Const(false);
                            for (t, &h) in onehot.iter().enumerate() {
                                if (m.get(s, t) >> bit) & 1 == 1 {
                                    acc = b.xor(acc, h);
                                }
                            }
                            acc
                        })
                        .collect()
                })
                .collect();
            cols.push(col);
        }

        let (gd, gi) = (m.gap_del, m.gap_ins);
        let w0 = self.row_width(0);
        let mut prev: Vec<Word<B::Wire>> =
            (0..=self.len_b).map(|j| b.constant_signed(-(j as i64) * gi, w0)).collect();
        for i in 1..=self.len_a {
            let w = self.row_width(i);
            let prev_ext: Vec<Word<B::Wire>> = prev.iter().map(|p| b.sext(p, w)).collect();
            let mut cur = vec![b.constant_signed(-(i as i64) * gd, w)];
            let ai = sym(a_bits, i - 1);
            for j in 1..=self.len_b {
                let sub = b.select(&cols[j - 1], &ai);
                let sub = b.zext(&sub, w);
                let diag = b.add(&prev_ext[j - 1], &sub);
                let up = if gd == 0 {
                    prev_ext[j].clone()
                } else {
                    let g = b.constant(gd as u64, w);
                    b.sub(&prev_ext[j], &g)
                };
                let left = if gi == 0 {
                    cur[j - 1].clone()
                } else {
                    let g = b.constant(gi as u64, w);
                    b.sub(&cur[j - 1], &g)
                };
                let best = b.max_signed(&diag, &up);
                let best = b.max_signed(&best, &left);
                cur.push(best);
            }
            prev = cur;
        }
        vec![prev.pop().unwrap()]
    }

    fn describe(&self) -> String {
        let m = &self.matrix;
        let mut h = Sha256::new();
        for s in 0..m.size() {
            for t in 0..m.size() {
                h.update((m.get(s, t) as u32).to_be_bytes());
            }
        }
        format!(
            "scanmatch;la={};lb={};size={};gap_del={};gap_ins={};matrix={}",
            self.len_a,
            self.len_b,
            m.size(),
            m.gap_del,
            m.gap_ins,
            hex(&h.finalize())
        )
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Recorded ScanMatch circuit: garbler input `a` (one byte per symbol),
/// evaluator input `b`, output the signed raw alignment score.
pub fn build_scanmatch_circuit(len_a: usize, len_b: usize, m: &SubstitutionMatrix) -> Result<BoolCircuit> {
    record(&TwoPartyCircuit(ScanMatchCircuit::new(len_a, len_b, m.clone())?))
}
