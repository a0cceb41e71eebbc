//! Scanpath types and party-local preprocessing.

use std::f64::consts::PI;
use std::io::Read;

use crate::error::{Error, Result};

/// Upper edge of the duration range split into uniform bins; the last bin is open-ended.
pub const DEFAULT_DUR_MAX_MS: f64 = 1000.0;
pub const DEFAULT_AMP_THRESHOLD: f64 = 0.1;
pub const DEFAULT_DIR_THRESHOLD: f64 = PI / 4.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fixation {
    pub x: f64,
    pub y: f64,
    pub duration_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scanpath {
    fixations: Vec<Fixation>,
}

impl Scanpath {
    pub fn new(fixations: Vec<Fixation>) -> Result<Self> {
        if fixations.is_empty() {
            return Err(Error::invalid("empty scanpath"));
        }
        for (i, f) in fixations.iter().enumerate() {
            let in_unit = |v: f64| (0.0..=1.0).contains(&v);
            if !in_unit(f.x) || !in_unit(f.y) {
                return Err(Error::invalid(format!("fixation {i} lies outside [0,1]^2")));
            }
            if !(f.duration_ms >= 0.0) || !f.duration_ms.is_finite() {
                return Err(Error::invalid(format!("fixation {i} has a negative duration")));
            }
        }
        Ok(Scanpath { fixations })
    }

    pub fn fixations(&self) -> &[Fixation] {
        &self.fixations
    }

    pub fn len(&self) -> usize {
        self.fixations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixations.is_empty()
    }

    /// Parses CSV with header `t_ms,x,y,dur_ms`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::invalid(format!("csv header: {e}")))?.clone();
        let expected = ["t_ms", "x", "y", "dur_ms"];
        if headers.len() != 4 || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(Error::invalid("csv header must be t_ms,x,y,dur_ms"));
        }
        let mut fixations = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::invalid(format!("csv row {}: {e}", line + 2)))?;
            let num = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| Error::invalid(format!("csv row {}: bad number in column {}", line + 2, k + 1)))
            };
            num(0)?;
            fixations.push(Fixation { x: num(1)?, y: num(2)?, duration_ms: num(3)? });
        }
        Scanpath::new(fixations)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolSequence {
    pub symbols: Vec<u32>,
    pub grid: u32,
    pub bins: u32,
}

impl SymbolSequence {
    pub fn new(symbols: Vec<u32>, grid: u32, bins: u32) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::invalid("empty symbol sequence"));
        }
        let n = alphabet_size(grid, bins)?;
        if let Some(s) = symbols.iter().find(|&&s| s >= n) {
            return Err(Error::invalid(format!("symbol {s} outside alphabet of {n}")));
        }
        Ok(SymbolSequence { symbols, grid, bins })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// `G^2 * B`, the number of distinct symbols.
pub fn alphabet_size(grid: u32, bins: u32) -> Result<u32> {
    if grid == 0 || bins == 0 {
        return Err(Error::invalid("grid size and bin count must be at least 1"));
    }
    grid.checked_mul(grid)
        .and_then(|g| g.checked_mul(bins))
        .ok_or_else(|| Error::invalid("alphabet too large"))
}

pub fn grid_cell(v: f64, grid: u32) -> u32 {
    ((v * grid as f64).floor() as i64).clamp(0, grid as i64 - 1) as u32
}

pub fn duration_bin(duration_ms: f64, bins: u32, dur_max_ms: f64) -> u32 {
    if bins <= 1 {
        return 0;
    }
    let width = dur_max_ms / bins as f64;
    ((duration_ms / width).floor() as i64).clamp(0, bins as i64 - 1) as u32
}

/// Maps each fixation to `(row * G + col) * B + duration_bin`.
pub fn symbolize(sp: &Scanpath, grid: u32, bins: u32) -> Result<SymbolSequence> {
    symbolize_with(sp, grid, bins, DEFAULT_DUR_MAX_MS)
}

pub fn symbolize_with(sp: &Scanpath, grid: u32, bins: u32, dur_max_ms: f64) -> Result<SymbolSequence> {
    alphabet_size(grid, bins)?;
    if sp.is_empty() {
        return Err(Error::invalid("empty scanpath"));
    }
    let symbols = sp
        .fixations()
        .iter()
        .map(|f| {
            let cell = grid_cell(f.y, grid) * grid + grid_cell(f.x, grid);
            cell * bins + duration_bin(f.duration_ms, bins, dur_max_ms)
        })
        .collect();
    SymbolSequence::new(symbols, grid, bins)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Saccade {
    pub dx: f64,
    pub dy: f64,
    pub amp: f64,
    pub theta: f64,
    pub turn: f64,
    pub s0: (f64, f64),
    pub s1: (f64, f64),
    pub duration_ms: f64,
}

impl Saccade {
    /// Saccade between two points; `turn` is left at 0.
    pub fn between(s0: (f64, f64), s1: (f64, f64), duration_ms: f64) -> Self {
        let (dx, dy) = (s1.0 - s0.0, s1.1 - s0.1);
        Saccade { dx, dy, amp: dx.hypot(dy), theta: dy.atan2(dx), turn: 0.0, s0, s1, duration_ms }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaccadeSequence {
    saccades: Vec<Saccade>,
}

impl SaccadeSequence {
    /// Takes saccades as given and recomputes the turn angles.
    pub fn new(mut saccades: Vec<Saccade>) -> Result<Self> {
        if saccades.is_empty() {
            return Err(Error::invalid("empty saccade sequence"));
        }
        recompute_turns(&mut saccades);
        Ok(SaccadeSequence { saccades })
    }

    /// Takes saccades exactly as given, turn angles included.
    pub fn from_raw(saccades: Vec<Saccade>) -> Result<Self> {
        if saccades.is_empty() {
            return Err(Error::invalid("empty saccade sequence"));
        }
        Ok(SaccadeSequence { saccades })
    }

    pub fn saccades(&self) -> &[Saccade] {
        &self.saccades
    }

    pub fn len(&self) -> usize {
        self.saccades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.saccades.is_empty()
    }
}

/// Wraps an angle into [-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w < -PI {
        -PI
    } else {
        w
    }
}

fn recompute_turns(s: &mut [Saccade]) {
    for i in 0..s.len() {
        s[i].turn = if i == 0 { 0.0 } else { wrap_angle(s[i].theta - s[i - 1].theta) };
    }
}

pub fn extract_saccades(sp: &Scanpath) -> Result<SaccadeSequence> {
    let f = sp.fixations();
    if f.len() < 2 {
        return Err(Error::invalid("need at least two fixations for a saccade"));
    }
    let saccades = f
        .windows(2)
        .map(|w| Saccade::between((w[0].x, w[0].y), (w[1].x, w[1].y), w[1].duration_ms))
        .collect();
    SaccadeSequence::new(saccades)
}

/// Merges neighbouring saccades that are jointly short or nearly collinear
/// until no pair qualifies. The merged saccade runs from the start of the
/// first to the end of the second and keeps the second's duration.
pub fn simplify(ss: &SaccadeSequence, amp_threshold: f64, dir_threshold: f64) -> SaccadeSequence {
    let mut s = ss.saccades.clone();
    loop {
        let pos = s.windows(2).position(|w| {
            w[0].amp + w[1].amp < amp_threshold || wrap_angle(w[0].theta - w[1].theta).abs() < dir_threshold
        });
        let Some(i) = pos else { break };
        let merged = Saccade::between(s[i].s0, s[i + 1].s1, s[i + 1].duration_ms);
        s[i] = merged;
        s.remove(i + 1);
        recompute_turns(&mut s);
    }
    SaccadeSequence { saccades: s }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyVector {
    pub entries: Vec<f64>,
    pub alphabet: u32,
    pub ngram: u32,
}

impl FrequencyVector {
    pub fn dim(&self) -> usize {
        self.entries.len()
    }
}

/// `A^n`, the number of distinct n-grams.
pub fn ngram_dim(alphabet: u32, n: u32) -> Result<usize> {
    if alphabet == 0 || n == 0 {
        return Err(Error::invalid("alphabet size and n-gram length must be at least 1"));
    }
    (alphabet as usize)
        .checked_pow(n)
        .filter(|&d| d <= 1 << 24)
        .ok_or_else(|| Error::invalid("n-gram space too large"))
}

/// Relative frequencies of the n-grams of `seq` after reducing symbols mod `alphabet`.
/// The first symbol of a gram is its most significant digit.
pub fn ngram_frequencies(seq: &SymbolSequence, alphabet: u32, n: u32) -> Result<FrequencyVector> {
    let d = ngram_dim(alphabet, n)?;
    let n = n as usize;
    if seq.len() < n {
        return Err(Error::invalid(format!("sequence of {} symbols is shorter than n = {n}", seq.len())));
    }
    let reduced: Vec<usize> = seq.symbols.iter().map(|&s| (s % alphabet) as usize).collect();
    let mut counts = vec![0u64; d];
    for w in reduced.windows(n) {
        let idx = w.iter().fold(0usize, |acc, &s| acc * alphabet as usize + s);
        counts[idx] += 1;
    }
    let total = (reduced.len() - n + 1) as f64;
    Ok(FrequencyVector {
        entries: counts.iter().map(|&c| c as f64 / total).collect(),
        alphabet,
        ngram: n as u32,
    })
}
