//! MultiMatch over private saccade sequences.
//!
//! Payload fields are 16-bit with 12 fractional bits and are clamped to
//! their valid ranges on entry. The circuit fills the DTW matrix on the
//! exact squared displacement distance (24 fractional bits), stores a
//! 2-bit move code per cell, then walks `m + n - 1` fixed backtracking
//! steps. The current cell is kept as a one-hot row vector and a one-hot
//! column vector; steps after reaching (1,1) are masked out. Component
//! means are computed with restoring division so that only the five
//! scores and their mean are revealed.

use super::comparison::{be16, Comparison, TwoPartyCircuit};
use super::gadgets::{bit_length_u128, max_of_width};
use super::{record, Backend, Bit, BoolCircuit, Builder, OutputDecl, Word};
use crate::error::{Error, Result};
use crate::fixedpoint::{bits_to_int, FixedFormat};
use crate::payload::{MULTIMATCH_FIELDS, MULTIMATCH_SACCADE_BYTES};
use crate::plaintext::{MultiMatchScores, COMPONENT_NAMES};

/// 1.0, pi, 2 pi and sqrt 2 with 12 fractional bits.
const ONE: i64 = 4096;
const PI: i64 = 12868;
const TWO_PI: i64 = 25736;
const SQRT2: i64 = 5793;
/// Reciprocal normalizers are applied as `x * c >> NORM_SHIFT`.
const NORM_SHIFT: usize = 20;
/// Output width: Q16.12.
pub const SCORE_WIDTH: usize = 29;

// Widths of the clamped per-saccade features.
const W_DXY: usize = 14; // signed, [-1, 1]
const W_AMP: usize = 13; // [0, sqrt 2]
const W_ANGLE: usize = 15; // signed, [-pi, pi]
const W_POS: usize = 13; // [0, 1]
const W_DUR: usize = 15; // [0, 8) seconds
/// Upper bound of the DTW cell cost: 2 * (2 * 4096)^2.
const COST_MAX: u128 = 1 << 27;

/// Feature slots carried through backtracking, in order.
const SEL_WIDTHS: [usize; 8] = [W_ANGLE, W_AMP, W_ANGLE, W_POS, W_POS, W_POS, W_POS, W_DUR];

struct Features<W> {
    dx: Word<W>,
    dy: Word<W>,
    /// turn, amp, theta, s0x, s0y, s1x, s1y, duration
    sel: Word<W>,
}

#[derive(Clone, Debug)]
pub struct MultiMatchCircuit {
    len_a: usize,
    len_b: usize,
}

impl MultiMatchCircuit {
    pub fn new(len_a: usize, len_b: usize) -> Result<Self> {
        if len_a == 0 || len_b == 0 {
            return Err(Error::invalid("MultiMatch sequences must be nonempty"));
        }
        Ok(MultiMatchCircuit { len_a, len_b })
    }

    pub fn lengths(&self) -> (usize, usize) {
        (self.len_a, self.len_b)
    }

    pub fn decode(&self, outputs: &[Vec<bool>]) -> MultiMatchScores {
        let v: Vec<f64> = outputs.iter().map(|o| FixedFormat::Q16_12.decode_raw(bits_to_int(o, true))).collect();
        MultiMatchScores { shape: v[0], length: v[1], direction: v[2], position: v[3], duration: v[4], overall: v[5] }
    }
}

impl<B: Backend> Builder<B> {
    /// Clamps a signed word to `[lo, hi]` and narrows it to `width` bits.
    fn clamp_signed(&mut self, v: &[Bit<B::Wire>], lo: i64, hi: i64, width: usize) -> Word<B::Wire> {
        let n = v.len();
        let mut out = v[..width].to_vec();
        if lo == 0 {
            let neg = v[n - 1];
            let keep = self.not(neg);
            out = self.mask(keep, &out);
        } else {
            let c = self.constant_signed(lo, n);
            let below = self.lt_signed(v, &c);
            let lo_w = self.constant_signed(lo, width);
            out = self.mux_word(below, &out, &lo_w);
        }
        if hi < (1 << (n - 1)) - 1 {
            let c = self.constant_signed(hi, n);
            let above = self.lt_signed(&c, v);
            let hi_w = self.constant_signed(hi, width);
            out = self.mux_word(above, &out, &hi_w);
        }
        out
    }

    /// `|wrap(a - b)|` for angles in [-pi, pi], 14 bits.
    fn angle_deviation(&mut self, a: &[Bit<B::Wire>], b: &[Bit<B::Wire>]) -> Word<B::Wire> {
        let (a, b) = (self.sext(a, 16), self.sext(b, 16));
        let d = self.sub(&a, &b);
        let pi = self.constant_signed(PI, 16);
        let above = self.lt_signed(&pi, &d);
        let two_pi = self.constant_signed(TWO_PI, 16);
        let down = self.sub(&d, &two_pi);
        let d = self.mux_word(above, &d, &down);
        let neg_pi = self.constant_signed(-PI, 16);
        let below = self.lt_signed(&d, &neg_pi);
        let up = self.add(&d, &two_pi);
        let d = self.mux_word(below, &d, &up);
        let m = self.abs(&d);
        m[..14].to_vec()
    }

    /// `|a - b|` of unsigned words of equal width.
    fn abs_diff(&mut self, a: &[Bit<B::Wire>], b: &[Bit<B::Wire>]) -> Word<B::Wire> {
        let w = a.len();
        let (x, y) = (self.zext(a, w + 1), self.zext(b, w + 1));
        let d = self.sub(&x, &y);
        let m = self.abs(&d);
        m[..w].to_vec()
    }

    /// Euclidean distance of two points in [0, 1]^2, 14 bits.
    fn distance(&mut self, p: (&[Bit<B::Wire>], &[Bit<B::Wire>]), q: (&[Bit<B::Wire>], &[Bit<B::Wire>])) -> Word<B::Wire> {
        let dx = self.abs_diff(p.0, q.0);
        let dy = self.abs_diff(p.1, q.1);
        let sx = self.square(&dx);
        let sy = self.square(&dy);
        let (sx, sy) = (self.zext(&sx, 27), self.zext(&sy, 27));
        let s = self.add(&sx, &sy);
        self.isqrt(&s)
    }

    /// Squared displacement distance, 28 bits with 24 fractional bits.
    fn dtw_cost(&mut self, a: &Features<B::Wire>, b: &Features<B::Wire>) -> Word<B::Wire> {
        let mut parts = Vec::with_capacity(2);
        for (x, y) in [(&a.dx, &b.dx), (&a.dy, &b.dy)] {
            let (x, y) = (self.sext(x, W_DXY + 1), self.sext(y, W_DXY + 1));
            let d = self.sub(&x, &y);
            let m = self.abs(&d);
            parts.push(self.square(&m[..W_DXY]));
        }
        self.add(&parts[0], &parts[1])
    }

    /// OR of `sel[i] AND rows[i]` over a one-hot selector.
    fn onehot_select(&mut self, sel: &[Bit<B::Wire>], rows: &[Word<B::Wire>]) -> Word<B::Wire> {
        let width = rows[0].len();
        let mut acc = vec![Bit::Const(false); width];
        for (&s, row) in sel.iter().zip(rows) {
            if matches!(s, Bit::Const(false)) {
                continue;
            }
            let t = self.mask(s, row);
            acc = self.xor_words(&acc, &t);
        }
        acc
    }

    fn saccade_features(&mut self, bits: &[Bit<B::Wire>], k: usize) -> Features<B::Wire> {
        let f = |i: usize| be16(bits, MULTIMATCH_FIELDS * k + i);
        let dx = self.clamp_signed(&f(0), -ONE, ONE, W_DXY);
        let dy = self.clamp_signed(&f(1), -ONE, ONE, W_DXY);
        let amp = self.clamp_signed(&f(2), 0, SQRT2, W_AMP);
        let theta = self.clamp_signed(&f(3), -PI, PI, W_ANGLE);
        let turn = self.clamp_signed(&f(4), -PI, PI, W_ANGLE);
        let s0x = self.clamp_signed(&f(5), 0, ONE, W_POS);
        let s0y = self.clamp_signed(&f(6), 0, ONE, W_POS);
        let dur = self.clamp_signed(&f(7), 0, i16::MAX as i64, W_DUR);
        let mut end = |s0: &Word<B::Wire>, d: &Word<B::Wire>| {
            let s0 = self.zext(s0, 16);
            let d = self.sext(d, 16);
            let s1 = self.add(&s0, &d);
            self.clamp_signed(&s1, 0, ONE, W_POS)
        };
        let s1x = end(&s0x, &dx);
        let s1y = end(&s0y, &dy);
        let sel = [turn, amp, theta, s0x, s0y, s1x, s1y, dur].concat();
        Features { dx, dy, sel }
    }

    /// The five per-pair deviations and their bit widths.
    fn deviations(&mut self, a: &[Bit<B::Wire>], b: &[Bit<B::Wire>]) -> [Word<B::Wire>; 5] {
        let mut fa = Vec::with_capacity(8);
        let mut fb = Vec::with_capacity(8);
        let mut at = 0;
        for w in SEL_WIDTHS {
            fa.push(&a[at..at + w]);
            fb.push(&b[at..at + w]);
            at += w;
        }
        let shape = self.angle_deviation(fa[0], fb[0]);
        let length = self.abs_diff(fa[1], fb[1]);
        let direction = self.angle_deviation(fa[2], fb[2]);
        let d0 = self.distance((fa[3], fa[4]), (fb[3], fb[4]));
        let d1 = self.distance((fa[5], fa[6]), (fb[5], fb[6]));
        // Sum of the two distances; halved by the normalizer.
        let position = self.add(&d0, &d1);
        let duration = {
            let (x, y) = (fa[7], fb[7]);
            let lt = self.lt_unsigned(x, y);
            let mx = self.mux_word(lt, x, y);
            let xy = self.xor_words(x, y);
            let mn = self.xor_words(&mx, &xy);
            let diff = self.sub(&mx, &mn);
            let mut num = vec![Bit::Const(false); 12];
            num.extend_from_slice(&diff);
            let q = self.udiv(&num, &mx, 13);
            let nz = self.is_nonzero(&mx);
            self.mask(nz, &q)
        };
        [shape, length, direction, position, duration]
    }
}

/// `round(2^NORM_SHIFT / norm)` per component; `None` means already normalized.
fn reciprocals() -> [Option<u64>; 5] {
    let r = |n: f64| Some(((1u64 << NORM_SHIFT) as f64 / n).round() as u64);
    let pi = std::f64::consts::PI;
    let sqrt2 = std::f64::consts::SQRT_2;
    [r(pi), r(sqrt2), r(pi), r(2.0 * sqrt2), None]
}

impl Comparison for MultiMatchCircuit {
    fn payload_len_a(&self) -> usize {
        self.len_a * MULTIMATCH_SACCADE_BYTES
    }

    fn payload_len_b(&self) -> usize {
        self.len_b * MULTIMATCH_SACCADE_BYTES
    }

    fn result_outputs(&self) -> Vec<OutputDecl> {
        COMPONENT_NAMES.iter().chain(&["overall"]).map(|n| OutputDecl::new(n, SCORE_WIDTH)).collect()
    }

    fn compare<B: Backend>(
        &self,
        b: &mut Builder<B>,
        a_bits: &[Bit<B::Wire>],
        b_bits: &[Bit<B::Wire>],
    ) -> Vec<Word<B::Wire>> {
        let (m, n) = (self.len_a, self.len_b);
        let fa: Vec<Features<B::Wire>> = (0..m).map(|k| b.saccade_features(a_bits, k)).collect();
        let fb: Vec<Features<B::Wire>> = (0..n).map(|k| b.saccade_features(b_bits, k)).collect();

        // DTW. dist[i][j] for 0-based cells; codes are (up, left), (0,0) = diagonal.
        let width_for = |steps: usize| bit_length_u128(steps as u128 * COST_MAX).max(1);
        let mut dist: Vec<Vec<Word<B::Wire>>> = Vec::with_capacity(m);
        let mut codes: Vec<Vec<(Bit<B::Wire>, Bit<B::Wire>)>> = Vec::with_capacity(m);
        for i in 0..m {
            let mut drow: Vec<Word<B::Wire>> = Vec::with_capacity(n);
            let mut crow = Vec::with_capacity(n);
            for j in 0..n {
                let c = b.dtw_cost(&fa[i], &fb[j]);
                let w = width_for(i + j + 1);
                let c = b.zext(&c, w);
                let (best, code) = match (i, j) {
                    (0, 0) => (None, (Bit::Const(false), Bit::Const(false))),
                    (0, _) => (Some(drow[j - 1].clone()), (Bit::Const(false), Bit::Const(true))),
                    (_, 0) => (Some(dist[i - 1][0].clone()), (Bit::Const(true), Bit::Const(false))),
                    _ => {
                        let cw = width_for(i + j);
                        let diag = b.zext(&dist[i - 1][j - 1], cw);
                        let up = b.zext(&dist[i - 1][j], cw);
                        let left = b.zext(&drow[j - 1], cw);
                        let up_lt = b.lt_unsigned(&up, &diag);
                        let left_lt = b.lt_unsigned(&left, &diag);
                        let left_lt_up = b.lt_unsigned(&left, &up);
                        let not_diag = b.or(up_lt, left_lt);
                        let side = b.mux_word(left_lt_up, &up, &left);
                        let best = b.mux_word(not_diag, &diag, &side);
                        let is_left = b.and(not_diag, left_lt_up);
                        let is_up = b.xor(not_diag, is_left);
                        (Some(best), (is_up, is_left))
                    }
                };
                let d = match best {
                    None => c,
                    Some(prev) => {
                        let prev = b.zext(&prev, w);
                        b.add(&prev, &c)
                    }
                };
                drow.push(d);
                crow.push(code);
            }
            dist.push(drow);
            codes.push(crow);
        }
        drop(dist);

        // Backtracking from (m, n).
        let steps = m + n - 1;
        let mut rows = vec![Bit::Const(false); m];
        let mut cols = vec![Bit::Const(false); n];
        rows[m - 1] = Bit::Const(true);
        cols[n - 1] = Bit::Const(true);
        let mut active = Bit::Const(true);
        let sel_a: Vec<Word<B::Wire>> = fa.iter().map(|f| f.sel.clone()).collect();
        let sel_b: Vec<Word<B::Wire>> = fb.iter().map(|f| f.sel.clone()).collect();
        let mut sums: Vec<(Word<B::Wire>, u128)> = vec![(Vec::new(), 0); 5];
        let mut count: Word<B::Wire> = vec![Bit::Const(false); bit_length_u128(steps as u128)];
        let mut dev_widths = [0usize; 5];
        for step in 0..steps {
            let xa = b.onehot_select(&rows, &sel_a);
            let xb = b.onehot_select(&cols, &sel_b);
            let devs = b.deviations(&xa, &xb);
            for (k, dev) in devs.iter().enumerate() {
                dev_widths[k] = dev.len();
                let masked = b.mask(active, dev);
                let (acc, bound) = &mut sums[k];
                b.accumulate(acc, bound, &masked, max_of_width(dev.len()), 0);
            }
            count = b.add_bit(&count, active);
            if step + 1 == steps {
                break;
            }
            let at_start = b.and(rows[0], cols[0]);
            let not_start = b.not(at_start);
            active = b.and(active, not_start);
            let (mut up, mut left) = (Bit::Const(false), Bit::Const(false));
            for i in 0..m {
                if matches!(rows[i], Bit::Const(false)) {
                    continue;
                }
                let (mut ru, mut rl) = (Bit::Const(false), Bit::Const(false));
                for j in 0..n {
                    let t = b.and(cols[j], codes[i][j].0);
                    ru = b.xor(ru, t);
                    let t = b.and(cols[j], codes[i][j].1);
                    rl = b.xor(rl, t);
                }
                let t = b.and(rows[i], ru);
                up = b.xor(up, t);
                let t = b.and(rows[i], rl);
                left = b.xor(left, t);
            }
            // Diagonal and up leave the row; diagonal and left leave the column.
            let row_moves = b.not(left);
            let col_moves = b.not(up);
            let shifted_rows: Word<B::Wire> = rows[1..].iter().copied().chain([Bit::Const(false)]).collect();
            let shifted_cols: Word<B::Wire> = cols[1..].iter().copied().chain([Bit::Const(false)]).collect();
            rows = b.mux_word(row_moves, &rows, &shifted_rows);
            cols = b.mux_word(col_moves, &cols, &shifted_cols);
        }

        // Means, normalization and scores.
        let recips = reciprocals();
        let mut scores = Vec::with_capacity(6);
        for (k, (sum, _)) in sums.iter().enumerate() {
            let cnt = b.zext(&count, count.len());
            let mean = b.udiv(sum, &cnt, dev_widths[k]);
            let ratio = match recips[k] {
                Some(c) => {
                    let p = b.mul_const(&mean, c);
                    p[NORM_SHIFT.min(p.len())..].to_vec()
                }
                None => mean,
            };
            let rw = ratio.len().max(14);
            let ratio = b.zext(&ratio, rw);
            let one = b.constant(ONE as u64, rw);
            let (diff, ok) = b.sub_carry(&one, &ratio);
            let score = b.mask(ok, &diff[..13]);
            scores.push(score);
        }
        let items: Vec<(Word<B::Wire>, u128)> = scores.iter().map(|s| (s.clone(), ONE as u128)).collect();
        let (total, _) = b.sum_tree(items);
        // floor(x / 5) == (x * 52429) >> 18 for x < 2^18.
        let p = b.mul_const(&total, 52429);
        let overall = p[18..].to_vec();
        scores.push(overall);
        scores.iter().map(|s| b.zext(s, SCORE_WIDTH)).collect()
    }

    fn describe(&self) -> String {
        format!("multimatch;la={};lb={};fields=q3.12", self.len_a, self.len_b)
    }
}

/// Recorded MultiMatch circuit for `len_a` and `len_b` saccades: inputs are
/// the two payloads, outputs the five component scores and their mean in Q16.12.
pub fn build_multimatch_circuit(len_a: usize, len_b: usize) -> Result<BoolCircuit> {
    record(&TwoPartyCircuit(MultiMatchCircuit::new(len_a, len_b)?))
}
