//! SubsMatch: `S = 1 - sum |p_k - q_k| / 2` over Q0.14 frequency vectors.
//!
//! Each element costs one subtraction and a conditional complement; the
//! `+1` completing the magnitude of a negative difference enters the adder
//! tree as a carry-in. All tree adders share one width, so the AND count
//! is affine in the dimension.

use super::comparison::{be16, Comparison, TwoPartyCircuit};
use super::gadgets::bit_length_u128;
use super::{record, Backend, Bit, BoolCircuit, Builder, OutputDecl, Word};
use crate::error::{Error, Result};
use crate::fixedpoint::{bits_to_int, FixedFormat};

/// 1.0 with 14 fractional bits.
const ONE: u64 = 1 << 14;
/// Output width, Q1.14.
pub const RESULT_WIDTH: usize = 15;
/// Adder width for dimensions up to 2^16.
const MIN_ACC_WIDTH: usize = 32;

#[derive(Clone, Debug)]
pub struct SubsMatchCircuit {
    dim: usize,
}

impl SubsMatchCircuit {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("SubsMatch dimension must be at least 1"));
        }
        Ok(SubsMatchCircuit { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn acc_width(&self) -> usize {
        bit_length_u128(self.dim as u128 * u16::MAX as u128).max(MIN_ACC_WIDTH)
    }

    pub fn decode(&self, outputs: &[Vec<bool>]) -> f64 {
        FixedFormat::Q1_14.decode_raw(bits_to_int(&outputs[0], false))
    }
}

impl Comparison for SubsMatchCircuit {
    fn payload_len_a(&self) -> usize {
        2 * self.dim
    }

    fn payload_len_b(&self) -> usize {
        2 * self.dim
    }

    fn result_outputs(&self) -> Vec<OutputDecl> {
        vec![OutputDecl::new("similarity", RESULT_WIDTH)]
    }

    fn compare<B: Backend>(
        &self,
        b: &mut Builder<B>,
        a_bits: &[Bit<B::Wire>],
        b_bits: &[Bit<B::Wire>],
    ) -> Vec<Word<B::Wire>> {
        let w = self.acc_width();
        // (|d| - s, s) with s the sign of d, so that |d| = word + s.
        // Every node carries one sign bit that is still to be added; an adder
        // absorbs one of its children's as carry-in and passes the other up.
        let mut level: Vec<(Word<B::Wire>, Bit<B::Wire>)> = (0..self.dim)
            .map(|k| {
                let p = be16(a_bits, k);
                let q = be16(b_bits, k);
                let (p, q) = (b.zext(&p, 17), b.zext(&q, 17));
                let d = b.sub(&p, &q);
                let s = d[16];
                let ones: Word<B::Wire> = d[..16].iter().map(|&x| b.xor(x, s)).collect();
                (b.zext(&ones, w), s)
            })
            .collect();
        while level.len() > 1 {
            let mut next = Vec::with_capacity(level.len().div_ceil(2));
            let mut it = level.into_iter();
            while let Some((x, sx)) = it.next() {
                match it.next() {
                    Some((y, sy)) => next.push((b.add_carry(&x, &y, sx).0, sy)),
                    None => next.push((x, sx)),
                }
            }
            level = next;
        }
        let (sum, s) = level.pop().unwrap();
        let sum = b.add_bit(&sum, s);
        let half = b.zext(&sum[1..], w);
        let one = b.constant(ONE, w);
        let (diff, ok) = b.sub_carry(&one, &half);
        vec![b.mask(ok, &diff[..RESULT_WIDTH])]
    }

    fn describe(&self) -> String {
        format!("subsmatch;d={};value=q0.14", self.dim)
    }
}

/// Recorded SubsMatch circuit over `d`-dimensional frequency vectors.
pub fn build_subsmatch_circuit(d: usize) -> Result<BoolCircuit> {
    record(&TwoPartyCircuit(SubsMatchCircuit::new(d)?))
}
