//! Cleartext ScanMatch, MultiMatch and SubsMatch.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::scanpath::{alphabet_size, wrap_angle, FrequencyVector, SaccadeSequence, SymbolSequence};

pub const DEFAULT_MAX_SCORE: i64 = 100;
/// Largest substitution score accepted, so that scores fit 15 unsigned bits.
pub const MAX_SUB_SCORE_LIMIT: i64 = 32767;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubstitutionMatrix {
    size: usize,
    scores: Vec<i64>,
    pub gap_del: i64,
    pub gap_ins: i64,
}

impl SubstitutionMatrix {
    /// Validates a row-major `size x size` matrix.
    pub fn new(size: usize, scores: Vec<i64>, gap_del: i64, gap_ins: i64) -> Result<Self> {
        if size == 0 || scores.len() != size * size {
            return Err(Error::invalid("substitution matrix must be square and nonempty"));
        }
        if gap_del < 0 || gap_ins < 0 {
            return Err(Error::invalid("gap penalties must be nonnegative"));
        }
        if scores.iter().any(|&s| !(0..=MAX_SUB_SCORE_LIMIT).contains(&s)) {
            return Err(Error::invalid(format!("substitution scores must lie in 0..={MAX_SUB_SCORE_LIMIT}")));
        }
        let m = SubstitutionMatrix { size, scores, gap_del, gap_ins };
        let max = m.max_score();
        for i in 0..size {
            if m.get(i, i) != max {
                return Err(Error::invalid("substitution matrix diagonal must hold the maximum score"));
            }
            for j in 0..i {
                if m.get(i, j) != m.get(j, i) {
                    return Err(Error::invalid("substitution matrix must be symmetric"));
                }
            }
        }
        Ok(m)
    }

    /// Scores `round(max_score * (1 - d / d_max))` with `d` the distance
    /// between grid cell centers. Duration bins of the same cell score alike.
    pub fn spatial(grid: u32, bins: u32, max_score: i64) -> Result<Self> {
        let size = alphabet_size(grid, bins)? as usize;
        let g = grid as f64;
        let center = |sym: usize| {
            let cell = sym / bins as usize;
            let (row, col) = (cell / grid as usize, cell % grid as usize);
            ((col as f64 + 0.5) / g, (row as f64 + 0.5) / g)
        };
        let d_max = (g - 1.0) / g * SQRT_2;
        let mut scores = Vec::with_capacity(size * size);
        for s in 0..size {
            for t in 0..size {
                let (a, b) = (center(s), center(t));
                let d = (a.0 - b.0).hypot(a.1 - b.1);
                let frac = if d_max > 0.0 { 1.0 - d / d_max } else { 1.0 };
                scores.push((max_score as f64 * frac).round() as i64);
            }
        }
        SubstitutionMatrix::new(size, scores, 0, 0)
    }

    pub fn with_gaps(mut self, gap_del: i64, gap_ins: i64) -> Result<Self> {
        if gap_del < 0 || gap_ins < 0 {
            return Err(Error::invalid("gap penalties must be nonnegative"));
        }
        self.gap_del = gap_del;
        self.gap_ins = gap_ins;
        Ok(self)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, s: usize, t: usize) -> i64 {
        self.scores[s * self.size + t]
    }

    pub fn max_score(&self) -> i64 {
        self.scores.iter().copied().max().unwrap_or(0)
    }
}

fn check_symbols(seq: &SymbolSequence, m: &SubstitutionMatrix) -> Result<()> {
    if seq.symbols.is_empty() {
        return Err(Error::invalid("empty symbol sequence"));
    }
    match seq.symbols.iter().find(|&&s| s as usize >= m.size()) {
        Some(s) => Err(Error::invalid(format!("symbol {s} outside the substitution matrix"))),
        None => Ok(()),
    }
}

/// Needleman-Wunsch score `S(|a|, |b|)`.
pub fn scanmatch_raw(a: &SymbolSequence, b: &SymbolSequence, m: &SubstitutionMatrix) -> Result<i64> {
    check_symbols(a, m)?;
    check_symbols(b, m)?;
    let (la, lb) = (a.len(), b.len());
    let mut prev: Vec<i64> = (0..=lb as i64).map(|j| -j * m.gap_ins).collect();
    for i in 1..=la {
        let mut cur = vec![-(i as i64) * m.gap_del; lb + 1];
        for j in 1..=lb {
            let diag = prev[j - 1] + m.get(a.symbols[i - 1] as usize, b.symbols[j - 1] as usize);
            let up = prev[j] - m.gap_del;
            let left = cur[j - 1] - m.gap_ins;
            cur[j] = diag.max(up).max(left);
        }
        prev = cur;
    }
    Ok(prev[lb])
}

/// Raw score divided by `max_score * max(len_a, len_b)`, clamped to [0, 1].
pub fn normalize_scanmatch(raw: i64, max_score: i64, len_a: usize, len_b: usize) -> f64 {
    let denom = max_score as f64 * len_a.max(len_b) as f64;
    if denom <= 0.0 {
        return 0.0;
    }
    (raw as f64 / denom).clamp(0.0, 1.0)
}

pub fn scanmatch(a: &SymbolSequence, b: &SymbolSequence, m: &SubstitutionMatrix) -> Result<f64> {
    let raw = scanmatch_raw(a, b, m)?;
    Ok(normalize_scanmatch(raw, m.max_score(), a.len(), b.len()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultiMatchScores {
    pub shape: f64,
    pub length: f64,
    pub direction: f64,
    pub position: f64,
    pub duration: f64,
    pub overall: f64,
}

impl MultiMatchScores {
    pub fn from_components(shape: f64, length: f64, direction: f64, position: f64, duration: f64) -> Self {
        let overall = (shape + length + direction + position + duration) / 5.0;
        MultiMatchScores { shape, length, direction, position, duration, overall }
    }

    pub fn components(&self) -> [f64; 5] {
        [self.shape, self.length, self.direction, self.position, self.duration]
    }
}

pub const COMPONENT_NAMES: [&str; 5] = ["shape", "length", "direction", "position", "duration"];

/// Move taken into a DTW cell while backtracking.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Move {
    Diag,
    Up,
    Left,
}

/// Accumulated DTW costs (1-based, `d[i][j]` for `1 <= i <= m`, `1 <= j <= n`)
/// and the backtracked path from `(m, n)` to `(1, 1)`, returned in forward order.
pub fn dtw<F: Fn(usize, usize) -> f64>(m: usize, n: usize, cost: F) -> (Vec<Vec<f64>>, Vec<(usize, usize)>) {
    let mut d = vec![vec![0.0; n + 1]; m + 1];
    for i in 1..=m {
        for j in 1..=n {
            let c = cost(i, j);
            d[i][j] = match (i, j) {
                (1, 1) => c,
                (1, _) => d[1][j - 1] + c,
                (_, 1) => d[i - 1][1] + c,
                _ => d[i - 1][j - 1].min(d[i - 1][j]).min(d[i][j - 1]) + c,
            };
        }
    }
    let mut path = vec![(m, n)];
    let (mut i, mut j) = (m, n);
    while (i, j) != (1, 1) {
        let mv = if i == 1 {
            Move::Left
        } else if j == 1 {
            Move::Up
        } else {
            best_move(d[i - 1][j - 1], d[i - 1][j], d[i][j - 1])
        };
        match mv {
            Move::Diag => {
                i -= 1;
                j -= 1
            }
            Move::Up => i -= 1,
            Move::Left => j -= 1,
        }
        path.push((i, j));
    }
    path.reverse();
    (d, path)
}

/// Tie order: diagonal, then up, then left.
pub fn best_move<T: PartialOrd>(diag: T, up: T, left: T) -> Move {
    if diag <= up && diag <= left {
        Move::Diag
    } else if up <= left {
        Move::Up
    } else {
        Move::Left
    }
}

pub fn multimatch(a: &SaccadeSequence, b: &SaccadeSequence) -> Result<MultiMatchScores> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("empty saccade sequence"));
    }
    let (sa, sb) = (a.saccades(), b.saccades());
    let (_, path) = dtw(sa.len(), sb.len(), |i, j| {
        let (x, y) = (&sa[i - 1], &sb[j - 1]);
        (x.dx - y.dx).powi(2) + (x.dy - y.dy).powi(2)
    });
    let mut sums = [0.0f64; 5];
    for &(i, j) in &path {
        let (x, y) = (&sa[i - 1], &sb[j - 1]);
        sums[0] += wrap_angle(x.turn - y.turn).abs();
        sums[1] += (x.amp - y.amp).abs();
        sums[2] += wrap_angle(x.theta - y.theta).abs();
        let d0 = (x.s0.0 - y.s0.0).hypot(x.s0.1 - y.s0.1);
        let d1 = (x.s1.0 - y.s1.0).hypot(x.s1.1 - y.s1.1);
        sums[3] += (d0 + d1) / 2.0;
        let mx = x.duration_ms.max(y.duration_ms);
        sums[4] += if mx > 0.0 { (x.duration_ms - y.duration_ms).abs() / mx } else { 0.0 };
    }
    let k = path.len() as f64;
    let norms = [PI, SQRT_2, PI, SQRT_2, 1.0];
    let s: Vec<f64> = sums.iter().zip(norms).map(|(s, n)| 1.0 - s / k / n).collect();
    Ok(MultiMatchScores::from_components(s[0], s[1], s[2], s[3], s[4]))
}

/// `1 - 0.5 * sum |p_k - q_k|`.
pub fn subsmatch(p: &FrequencyVector, q: &FrequencyVector) -> Result<f64> {
    if p.alphabet != q.alphabet || p.ngram != q.ngram || p.dim() != q.dim() {
        return Err(Error::invalid("frequency vectors have different (A, n)"));
    }
    subsmatch_values(&p.entries, &q.entries)
}

pub fn subsmatch_values(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::invalid("frequency vectors differ in dimension"));
    }
    let d: f64 = p.iter().zip(q).map(|(x, y)| (x - y).abs()).sum::<f64>() / 2.0;
    Ok((1.0 - d).clamp(0.0, 1.0))
}
