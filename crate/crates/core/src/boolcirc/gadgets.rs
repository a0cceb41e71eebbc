//! Arithmetic gadgets on LSB-first words.
//!
//! Unless stated otherwise, two-operand word gadgets require equal widths.

use super::{Backend, Bit, Builder, Word};
use crate::fixedpoint::bit_length;

impl<B: Backend> Builder<B> {
    pub fn or(&mut self, a: Bit<B::Wire>, b: Bit<B::Wire>) -> Bit<B::Wire> {
        let x = self.xor(a, b);
        let y = self.and(a, b);
        self.xor(x, y)
    }

    /// `s ? b : a`
    pub fn mux(&mut self, s: Bit<B::Wire>, a: Bit<B::Wire>, b: Bit<B::Wire>) -> Bit<B::Wire> {
        let d = self.xor(a, b);
        let t = self.and(s, d);
        self.xor(a, t)
    }

    pub fn constant(&self, v: u64, width: usize) -> Word<B::Wire> {
        (0..width).map(|i| Bit::Const(i < 64 && (v >> i) & 1 == 1)).collect()
    }

    pub fn constant_signed(&self, v: i64, width: usize) -> Word<B::Wire> {
        (0..width).map(|i| Bit::Const((v >> i.min(63)) & 1 == 1)).collect()
    }

    pub fn xor_words(&mut self, a: &[Bit<B::Wire>], b: &[Bit<B::Wire>]) -> Word<B::Wire> {
        a.iter().zip(b).map(|(&x, &y)| self.xor(x, y)).collect()
    }

    pub fn not_word(&mut self, a: &[Bit<B::Wire>]) -> Word<B::Wire> {
        a.iter().map(|&x| self.not(x)).collect()
    }

    /// Bitwise AND of every bit of `a` with `s`.
    pub fn mask(&mut self, s: Bit<B::Wire>, a: &[Bit<B::Wire>]) -> Word<B::Wire> {
        a.iter().map(|&x| self.and(s, x)).collect()
    }

    /// `s ? b : a`, word-wise.
    pub fn mux_word(&mut self, s: Bit<B::Wire>, a: &[Bit<B::Wire>], b: &[Bit<B::Wire>]) -> Word<B::Wire> {
        assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(&x, &y)| self.mux(s, x, y)).collect()
    }

    pub fn zext(&self, a: &[Bit<B::Wire>], width: usize) -> Word<B::Wire> {
        let mut w: Word<B::Wire> = a.iter().take(width).copied().collect();
        w.resize(width, Bit::Const(false));
        w
    }

    pub fn sext(&self, a: &[Bit<B::Wire>], width: usize) -> Word<B::Wire> {
        let top = *a.last().expect("sign extension of an empty word");
        let mut w: Word<B::Wire> = a.iter().take(width).copied().collect();
        w.resize(width, top);
        w
    }

    /// Sum and carry-out of `a + b + cin`.
    pub fn add_carry(
        &mut self,
        a: &[Bit<B::Wire>],
        b: &[Bit<B::Wire>],
        cin: Bit<B::Wire>,
    ) -> (Word<B::Wire>, Bit<B::Wire>) {
        assert_eq!(a.len(), b.len(), "adder operands differ in width");
        let mut c = cin;
        let mut out = Vec::with_capacity(a.len());
        for (&x, &y) in a.iter().zip(b) {
            let xc = self.xor(x, c);
            let yc = self.xor(y, c);
            let s = self.xor(xc, y);
            out.push(s);
            let t = self.and(xc, yc);
            c = self.xor(c, t);
        }
        (out, c)
    }

    /// `a + b` modulo 2^width.
    pub fn add(&mut self, a: &[Bit<B::Wire>], b: &[Bit<B::Wire>]) -> Word<B::Wire> {
        self.add_carry(a, b, Bit::Const(false)).0
    }

    /// `a - b` modulo 2^width and the carry-out, which is 1 iff `a >= b` unsigned.
    pub fn sub_carry(&mut self, a: &[Bit<B::Wire>], b: &[Bit<B::Wire>]) -> (Word<B::Wire>, Bit<B::Wire>) {
        let nb = self.not_word(b);
        self.add_carry(a, &nb, Bit::Const(true))
    }

    pub fn sub(&mut self, a: &[Bit<B::Wire>], b: &[Bit<B::Wire>]) -> Word<B::Wire> {
        self.sub_carry(a, b).0
    }

    /// `a + 1` modulo 2^width, for a single-bit increment.
    pub fn add_bit(&mut self, a: &[Bit<B::Wire>], bit: Bit<B::Wire>) -> Word<B::Wire> {
        let mut c = bit;
        let mut out = Vec::with_capacity(a.len());
        for &x in a {
            out.push(self.xor(x, c));
            c = self.and(x, c);
        }
        out
    }

    /// `s ? -a : a`
    pub fn cond_neg(&mut self, s: Bit<B::Wire>, a: &[Bit<B::Wire>]) -> Word<B::Wire> {
        let flipped: Word<B::Wire> = a.iter().map(|&x| self.xor(x, s)).collect();
        self.add_bit(&flipped, s)
    }

    pub fn neg(&mut self, a: &[Bit<B::Wire>]) -> Word<B::Wire> {
        self.cond_neg(Bit::Const(true), a)
    }

    /// Magnitude of a signed word, read as unsigned of the same width.
    pub fn abs(&mut self, a: &[Bit<B::Wire>]) -> Word<B::Wire> {
        let s = *a.last().expect("abs of an empty word");
        self.cond_neg(s, a)
    }

    /// Carry-out of `a - b`: 1 iff `a >= b` unsigned. One AND per bit.
    pub fn ge_unsigned(&mut self, a: &[Bit<B::Wire>], b: &[Bit<B::Wire>]) -> Bit<B::Wire> {
        assert_eq!(a.len(), b.len());
        let mut c = Bit::Const(true);
        for (&x, &y) in a.iter().zip(b) {
            let ny = self.not(y);
            let xc = self.xor(x, c);
            let yc = self.xor(ny, c);
            let t = self.and(xc, yc);
            c = self.xor(c, t);
        }
        c
    }

    pub fn lt_unsigned(&mut self, a: &[Bit<B::Wire>], b: &[Bit<B::Wire>]) -> Bit<B::Wire> {
        let ge = self.ge_unsigned(a, b);
        self.not(ge)
    }

    fn flip_msb(&mut self, a: &[Bit<B::Wire>]) -> Word<B::Wire> {
        let mut w = a.to_vec();
        let n = w.len();
        w[n - 1] = self.not(w[n - 1]);
        w
    }

    pub fn lt_signed(&mut self, a: &[Bit<B::Wire>], b: &[Bit<B::Wire>]) -> Bit<B::Wire> {
        let (fa, fb) = (self.flip_msb(a), self.flip_msb(b));
        self.lt_unsigned(&fa, &fb)
    }

    pub fn max_signed(&mut self, a: &[Bit<B::Wire>], b: &[Bit<B::Wire>]) -> Word<B::Wire> {
        let lt = self.lt_signed(a, b);
        self.mux_word(lt, a, b)
    }

    pub fn min_unsigned(&mut self, a: &[Bit<B::Wire>], b: &[Bit<B::Wire>]) -> Word<B::Wire> {
        let lt = self.lt_unsigned(b, a);
        self.mux_word(lt, a, b)
    }

    pub fn max_unsigned(&mut self, a: &[Bit<B::Wire>], b: &[Bit<B::Wire>]) -> Word<B::Wire> {
        let lt = self.lt_unsigned(a, b);
        self.mux_word(lt, a, b)
    }

    pub fn or_reduce(&mut self, a: &[Bit<B::Wire>]) -> Bit<B::Wire> {
        let mut level = a.to_vec();
        if level.is_empty() {
            return Bit::Const(false);
        }
        while level.len() > 1 {
            let mut next = Vec::with_capacity(level.len().div_ceil(2));
            for pair in level.chunks(2) {
                next.push(if pair.len() == 2 { self.or(pair[0], pair[1]) } else { pair[0] });
            }
            level = next;
        }
        level[0]
    }

    pub fn and_reduce(&mut self, a: &[Bit<B::Wire>]) -> Bit<B::Wire> {
        let na = self.not_word(a);
        let any = self.or_reduce(&na);
        self.not(any)
    }

    pub fn eq(&mut self, a: &[Bit<B::Wire>], b: &[Bit<B::Wire>]) -> Bit<B::Wire> {
        assert_eq!(a.len(), b.len());
        let d = self.xor_words(a, b);
        let any = self.or_reduce(&d);
        self.not(any)
    }

    pub fn is_nonzero(&mut self, a: &[Bit<B::Wire>]) -> Bit<B::Wire> {
        self.or_reduce(a)
    }

    /// Adds `word` (at most `word_max`) into `acc` at bit `offset`, growing
    /// `acc` just enough for the new bound `acc_max`.
    pub fn accumulate(
        &mut self,
        acc: &mut Word<B::Wire>,
        acc_max: &mut u128,
        word: &[Bit<B::Wire>],
        word_max: u128,
        offset: usize,
    ) {
        let new_max = *acc_max + (word_max << offset);
        let width = bit_length_u128(new_max);
        if acc.len() < width {
            acc.resize(width, Bit::Const(false));
        }
        if width > offset {
            let span = width - offset;
            let hi = acc[offset..width].to_vec();
            let w = self.zext(word, span);
            let sum = self.add(&hi, &w);
            acc[offset..width].copy_from_slice(&sum);
        }
        *acc_max = new_max;
    }

    /// Unsigned product, `a.len() + b.len()` bits wide.
    pub fn umul(&mut self, a: &[Bit<B::Wire>], b: &[Bit<B::Wire>]) -> Word<B::Wire> {
        let a_max = max_of_width(a.len());
        let mut acc = Vec::new();
        let mut acc_max = 0u128;
        for (k, &bk) in b.iter().enumerate() {
            let pp = self.mask(bk, a);
            self.accumulate(&mut acc, &mut acc_max, &pp, a_max, k);
        }
        self.zext(&acc, a.len() + b.len())
    }

    /// Unsigned square, `2 * a.len()` bits wide, using the symmetry of the
    /// partial products.
    pub fn square(&mut self, a: &[Bit<B::Wire>]) -> Word<B::Wire> {
        let n = a.len();
        let mut acc = Vec::new();
        let mut acc_max = 0u128;
        for i in 0..n {
            // a_i * (2^(2i) + sum_{j>i} a_j 2^(i+j+1)), placed at offset 2i.
            let mut row: Word<B::Wire> = vec![a[i], Bit::Const(false)];
            for &aj in &a[i + 1..] {
                row.push(self.and(a[i], aj));
            }
            let row_max = max_of_width(row.len()) - 2;
            self.accumulate(&mut acc, &mut acc_max, &row, row_max, 2 * i);
        }
        self.zext(&acc, 2 * n)
    }

    /// Product with a public constant.
    pub fn mul_const(&mut self, a: &[Bit<B::Wire>], c: u64) -> Word<B::Wire> {
        let a_max = max_of_width(a.len());
        let mut acc = Vec::new();
        let mut acc_max = 0u128;
        for k in 0..64 {
            if (c >> k) & 1 == 1 {
                self.accumulate(&mut acc, &mut acc_max, a, a_max, k);
            }
        }
        let width = a.len() + bit_length(c) as usize;
        self.zext(&acc, width.max(1))
    }

    /// Restoring division of unsigned `n` by unsigned `d`, producing `qbits`
    /// quotient bits. The caller guarantees `n < d * 2^qbits`. Returns the
    /// quotient; a zero divisor yields an all-ones quotient.
    pub fn udiv(&mut self, n: &[Bit<B::Wire>], d: &[Bit<B::Wire>], qbits: usize) -> Word<B::Wire> {
        let dw = d.len();
        let qbits = qbits.min(n.len());
        // Top bits of n are already below d.
        let mut r = self.zext(&n[qbits..], dw);
        let dz = self.zext(d, dw + 1);
        let mut q = vec![Bit::Const(false); qbits];
        for k in (0..qbits).rev() {
            let mut shifted = Vec::with_capacity(dw + 1);
            shifted.push(n[k]);
            shifted.extend_from_slice(&r);
            let (diff, ge) = self.sub_carry(&shifted, &dz);
            let next = self.mux_word(ge, &shifted, &diff);
            r = next[..dw].to_vec();
            q[k] = ge;
        }
        q
    }

    /// Floor square root of unsigned `v`, `ceil(len/2)` bits wide.
    pub fn isqrt(&mut self, v: &[Bit<B::Wire>]) -> Word<B::Wire> {
        let mut v = v.to_vec();
        if v.len() % 2 == 1 {
            v.push(Bit::Const(false));
        }
        let steps = v.len() / 2;
        let mut root: Word<B::Wire> = Vec::new();
        let mut rem: Word<B::Wire> = Vec::new();
        for i in (0..steps).rev() {
            // rem = rem * 4 + next two bits; trial = root * 4 + 1.
            let mut r = vec![v[2 * i], v[2 * i + 1]];
            r.extend_from_slice(&rem);
            let mut trial = vec![Bit::Const(true), Bit::Const(false)];
            trial.extend_from_slice(&root);
            let width = root.len() + 3;
            let r = self.zext(&r, width);
            let trial = self.zext(&trial, width);
            let (diff, ge) = self.sub_carry(&r, &trial);
            let next = self.mux_word(ge, &r, &diff);
            // The remainder never exceeds 2 * root, which fits root.len() + 2 bits.
            rem = next[..root.len() + 2].to_vec();
            root.insert(0, ge);
        }
        root
    }

    /// Multiplexer tree over `table`, index LSB first. Entries past the end
    /// of the table are never selected by valid indices.
    pub fn select(&mut self, table: &[Word<B::Wire>], index: &[Bit<B::Wire>]) -> Word<B::Wire> {
        assert!(!table.is_empty(), "select from an empty table");
        assert!(
            index.len() >= 64 || table.len() <= 1usize << index.len(),
            "table longer than the index range"
        );
        let mut level = table.to_vec();
        for &bit in index {
            if level.len() == 1 {
                break;
            }
            let mut next = Vec::with_capacity(level.len().div_ceil(2));
            for pair in level.chunks(2) {
                next.push(if pair.len() == 2 { self.mux_word(bit, &pair[0], &pair[1]) } else { pair[0].clone() });
            }
            level = next;
        }
        level.swap_remove(0)
    }

    /// One-hot decoding of an LSB-first index into `n` outputs.
    pub fn decode_onehot(&mut self, index: &[Bit<B::Wire>], n: usize) -> Vec<Bit<B::Wire>> {
        let mut out = vec![Bit::Const(true)];
        for &bit in index {
            if out.len() >= n {
                break;
            }
            let half = out.len();
            let mut next = vec![Bit::Const(false); 2 * half];
            for (v, &o) in out.iter().enumerate() {
                let hi = self.and(o, bit);
                next[v + half] = hi;
                next[v] = self.xor(o, hi);
            }
            out = next;
        }
        // Index bits above the table size must be zero for a hit.
        let used = bit_length((n.max(1) - 1) as u64) as usize;
        if index.len() > used {
            let hi = self.or_reduce(&index[used..]);
            let ok = self.not(hi);
            out = out.iter().map(|&o| self.and(o, ok)).collect();
        }
        out.truncate(n);
        out.resize(n, Bit::Const(false));
        out
    }

    /// Balanced adder tree over unsigned words with known bounds.
    pub fn sum_tree(&mut self, items: Vec<(Word<B::Wire>, u128)>) -> (Word<B::Wire>, u128) {
        if items.is_empty() {
            return (Vec::new(), 0);
        }
        let mut level = items;
        while level.len() > 1 {
            let mut next = Vec::with_capacity(level.len().div_ceil(2));
            let mut it = level.into_iter();
            while let Some((a, am)) = it.next() {
                match it.next() {
                    Some((b, bm)) => {
                        let m = am + bm;
                        let w = bit_length_u128(m).max(1);
                        let (x, y) = (self.zext(&a, w), self.zext(&b, w));
                        next.push((self.add(&x, &y), m));
                    }
                    None => next.push((a, am)),
                }
            }
            level = next;
        }
        level.pop().unwrap()
    }
}

pub(crate) fn bit_length_u128(v: u128) -> usize {
    (128 - v.leading_zeros()) as usize
}

pub(crate) fn max_of_width(w: usize) -> u128 {
    if w >= 128 {
        u128::MAX
    } else {
        (1u128 << w) - 1
    }
}
