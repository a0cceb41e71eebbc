//! Fixed-point encodings used inside circuits.
//!
//! Raw values are two's complement integers (when signed) of
//! `int_bits + frac_bits + signed` bits. Bit vectors are LSB first.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FixedFormat {
    pub int_bits: u32,
    pub frac_bits: u32,
    pub signed: bool,
}

impl FixedFormat {
    /// Signed, 16 integer bits, 12 fractional bits (MultiMatch).
    pub const Q16_12: FixedFormat = FixedFormat { int_bits: 16, frac_bits: 12, signed: true };
    /// Unsigned, purely fractional, 14 bits.
    pub const Q0_14: FixedFormat = FixedFormat { int_bits: 0, frac_bits: 14, signed: false };
    /// Unsigned with one integer bit so that 1.0 is representable (SubsMatch values).
    pub const Q1_14: FixedFormat = FixedFormat { int_bits: 1, frac_bits: 14, signed: false };
    /// Signed 16-bit container with 12 fractional bits (MultiMatch payload fields).
    pub const Q3_12: FixedFormat = FixedFormat { int_bits: 3, frac_bits: 12, signed: true };

    pub const fn new(int_bits: u32, frac_bits: u32, signed: bool) -> Self {
        FixedFormat { int_bits, frac_bits, signed }
    }

    pub const fn width(&self) -> u32 {
        self.int_bits + self.frac_bits + self.signed as u32
    }

    pub fn scale(&self) -> f64 {
        (self.frac_bits as f64).exp2()
    }

    fn check(&self) -> Result<()> {
        if self.width() == 0 || self.width() > 64 {
            return Err(Error::invalid(format!("fixed-point width {} not in 1..=64", self.width())));
        }
        Ok(())
    }

    /// Encodes `x` as `round(x * 2^frac_bits)`, ties away from zero.
    pub fn encode_raw(&self, x: f64) -> Result<i64> {
        self.check()?;
        let limit = (self.int_bits as f64).exp2();
        let ok = if self.signed { x.abs() < limit } else { x >= 0.0 && x < limit };
        if !x.is_finite() || !ok {
            return Err(Error::Range(format!("{x} does not fit {self:?}")));
        }
        let raw = (x * self.scale()).round();
        // Rounding can push a value just below the limit onto it.
        let max_raw = (1i128 << (self.int_bits + self.frac_bits)) - 1;
        let raw = (raw as i128).clamp(if self.signed { -max_raw } else { 0 }, max_raw);
        Ok(raw as i64)
    }

    pub fn decode_raw(&self, raw: i64) -> f64 {
        raw as f64 / self.scale()
    }

    /// Two's complement bits of `raw` in this width, LSB first.
    pub fn raw_to_bits(&self, raw: i64) -> Vec<bool> {
        (0..self.width()).map(|i| (raw >> i.min(63)) & 1 == 1).collect()
    }

    pub fn bits_to_raw(&self, bits: &[bool]) -> i64 {
        bits_to_int(bits, self.signed)
    }
}

/// Encodes a real into the bit-vector of `fmt` (LSB first).
pub fn encode(x: f64, fmt: FixedFormat) -> Result<Vec<bool>> {
    Ok(fmt.raw_to_bits(fmt.encode_raw(x)?))
}

pub fn decode(bits: &[bool], fmt: FixedFormat) -> f64 {
    fmt.decode_raw(fmt.bits_to_raw(bits))
}

/// Interprets LSB-first bits as an integer, sign-extending when `signed`.
pub fn bits_to_int(bits: &[bool], signed: bool) -> i64 {
    let mut v: i64 = 0;
    for (i, &b) in bits.iter().enumerate().take(64) {
        if b {
            v |= 1 << i;
        }
    }
    let n = bits.len();
    if signed && n > 0 && n < 64 && bits[n - 1] {
        v -= 1 << n;
    }
    v
}

/// LSB-first bits of the low `width` bits of `v`.
pub fn int_to_bits(v: i64, width: usize) -> Vec<bool> {
    (0..width).map(|i| (v >> i.min(63)) & 1 == 1).collect()
}

/// Number of bits needed to write `v` in binary (0 for 0).
pub fn bit_length(v: u64) -> u32 {
    64 - v.leading_zeros()
}

/// Smallest signed width holding every DP value reachable in rows `0..=row`.
pub fn min_bitwidth_for_row(row: usize, max_sub_score: u64, gap_del: u64, gap_ins: u64) -> u32 {
    let step = max_sub_score.max(gap_del).max(gap_ins);
    let bound = (row as u64).saturating_mul(step);
    bit_length(bound) + 1
}
