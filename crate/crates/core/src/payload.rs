//! Algorithm parameters and the byte payloads each party feeds into a circuit.
//!
//! * ScanMatch: one byte per symbol.
//! * MultiMatch: per saccade eight big-endian `i16` values with 12 fractional
//!   bits: dx, dy, amp, theta, turn, s0x, s0y, duration in seconds.
//! * SubsMatch: `A^n` big-endian `u16` values with 14 fractional bits.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::plaintext::{SubstitutionMatrix, DEFAULT_MAX_SCORE};
use crate::scanpath::{alphabet_size, ngram_dim, FrequencyVector, Saccade, SaccadeSequence, SymbolSequence};

pub const MULTIMATCH_FIELDS: usize = 8;
pub const MULTIMATCH_SACCADE_BYTES: usize = 2 * MULTIMATCH_FIELDS;
pub const MULTIMATCH_FRAC_BITS: u32 = 12;
pub const SUBSMATCH_FRAC_BITS: u32 = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    ScanMatch,
    MultiMatch,
    SubsMatch,
}

impl Algorithm {
    pub fn tag(self) -> u8 {
        match self {
            Algorithm::ScanMatch => 1,
            Algorithm::MultiMatch => 2,
            Algorithm::SubsMatch => 3,
        }
    }

    pub fn from_tag(t: u8) -> Option<Self> {
        match t {
            1 => Some(Algorithm::ScanMatch),
            2 => Some(Algorithm::MultiMatch),
            3 => Some(Algorithm::SubsMatch),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::ScanMatch => "scanmatch",
            Algorithm::MultiMatch => "multimatch",
            Algorithm::SubsMatch => "subsmatch",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scanmatch" => Ok(Algorithm::ScanMatch),
            "multimatch" => Ok(Algorithm::MultiMatch),
            "subsmatch" => Ok(Algorithm::SubsMatch),
            _ => Err(Error::invalid(format!("unknown algorithm {s:?}"))),
        }
    }
}

/// Public parameters both parties must agree on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AlgorithmParams {
    ScanMatch { grid: u32, bins: u32, max_score: i64, gap_del: i64, gap_ins: i64 },
    MultiMatch,
    SubsMatch { alphabet: u32, ngram: u32 },
}

impl AlgorithmParams {
    pub fn scanmatch(grid: u32, bins: u32) -> Self {
        AlgorithmParams::ScanMatch { grid, bins, max_score: DEFAULT_MAX_SCORE, gap_del: 0, gap_ins: 0 }
    }

    pub fn subsmatch(alphabet: u32, ngram: u32) -> Self {
        AlgorithmParams::SubsMatch { alphabet, ngram }
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            AlgorithmParams::ScanMatch { .. } => Algorithm::ScanMatch,
            AlgorithmParams::MultiMatch => Algorithm::MultiMatch,
            AlgorithmParams::SubsMatch { .. } => Algorithm::SubsMatch,
        }
    }

    /// Canonical text form; its hash is the parameter digest.
    pub fn canonical(&self) -> String {
        match self {
            AlgorithmParams::ScanMatch { grid, bins, max_score, gap_del, gap_ins } => format!(
                "scanmatch;grid={grid};bins={bins};max_score={max_score};gap_del={gap_del};gap_ins={gap_ins};symbol=u8"
            ),
            AlgorithmParams::MultiMatch => "multimatch;fields=8;field=i16be;frac=12;arith=q16.12".to_string(),
            AlgorithmParams::SubsMatch { alphabet, ngram } => {
                format!("subsmatch;alphabet={alphabet};ngram={ngram};value=u16be;frac=14")
            }
        }
    }

    /// Inverse of [`AlgorithmParams::canonical`]; anything else is rejected.
    pub fn from_canonical(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("unrecognized parameter string {s:?}"));
        let mut parts = s.split(';');
        let algo: Algorithm = parts.next().ok_or_else(bad)?.parse()?;
        let fields: Vec<(&str, &str)> = parts.map(|p| p.split_once('=').ok_or_else(bad)).collect::<Result<_>>()?;
        let num = |k: &str| -> Result<i64> {
            fields.iter().find(|(n, _)| *n == k).and_then(|(_, v)| v.parse().ok()).ok_or_else(bad)
        };
        let parsed = match algo {
            Algorithm::ScanMatch => AlgorithmParams::ScanMatch {
                grid: u32::try_from(num("grid")?).map_err(|_| bad())?,
                bins: u32::try_from(num("bins")?).map_err(|_| bad())?,
                max_score: num("max_score")?,
                gap_del: num("gap_del")?,
                gap_ins: num("gap_ins")?,
            },
            Algorithm::MultiMatch => AlgorithmParams::MultiMatch,
            Algorithm::SubsMatch => AlgorithmParams::SubsMatch {
                alphabet: u32::try_from(num("alphabet")?).map_err(|_| bad())?,
                ngram: u32::try_from(num("ngram")?).map_err(|_| bad())?,
            },
        };
        if parsed.canonical() != s {
            return Err(bad());
        }
        Ok(parsed)
    }

    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.canonical().as_bytes()).into()
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AlgorithmParams::ScanMatch { grid, bins, .. } => {
                let n = alphabet_size(*grid, *bins)?;
                if n > 256 {
                    return Err(Error::invalid(format!("{n} symbols do not fit a one-byte payload")));
                }
                self.matrix().map(|_| ())
            }
            AlgorithmParams::MultiMatch => Ok(()),
            AlgorithmParams::SubsMatch { alphabet, ngram } => ngram_dim(*alphabet, *ngram).map(|_| ()),
        }
    }

    /// Substitution matrix of a ScanMatch parameter set.
    pub fn matrix(&self) -> Result<SubstitutionMatrix> {
        match self {
            AlgorithmParams::ScanMatch { grid, bins, max_score, gap_del, gap_ins } => {
                SubstitutionMatrix::spatial(*grid, *bins, *max_score)?.with_gaps(*gap_del, *gap_ins)
            }
            _ => Err(Error::invalid("only ScanMatch has a substitution matrix")),
        }
    }

    /// Number of sequence elements a payload of `len` bytes carries.
    pub fn elements(&self, len: usize) -> Result<usize> {
        match self {
            AlgorithmParams::ScanMatch { .. } => {
                if len == 0 {
                    return Err(Error::invalid("empty ScanMatch payload"));
                }
                Ok(len)
            }
            AlgorithmParams::MultiMatch => {
                if len == 0 || len % MULTIMATCH_SACCADE_BYTES != 0 {
                    return Err(Error::invalid(format!("MultiMatch payload of {len} bytes is not a whole number of saccades")));
                }
                Ok(len / MULTIMATCH_SACCADE_BYTES)
            }
            AlgorithmParams::SubsMatch { alphabet, ngram } => {
                let d = ngram_dim(*alphabet, *ngram)?;
                if len != 2 * d {
                    return Err(Error::invalid(format!("SubsMatch payload must be {} bytes, got {len}", 2 * d)));
                }
                Ok(d)
            }
        }
    }

    /// Checks a payload's shape and value ranges.
    pub fn check_payload(&self, payload: &[u8]) -> Result<()> {
        self.elements(payload.len())?;
        if let AlgorithmParams::ScanMatch { grid, bins, .. } = self {
            let n = alphabet_size(*grid, *bins)?;
            if let Some(s) = payload.iter().find(|&&s| s as u32 >= n) {
                return Err(Error::invalid(format!("symbol {s} outside alphabet of {n}")));
            }
        }
        Ok(())
    }
}

pub fn encode_scanmatch(seq: &SymbolSequence) -> Result<Vec<u8>> {
    seq.symbols
        .iter()
        .map(|&s| u8::try_from(s).map_err(|_| Error::invalid(format!("symbol {s} does not fit one byte"))))
        .collect()
}

pub fn decode_scanmatch(payload: &[u8], grid: u32, bins: u32) -> Result<SymbolSequence> {
    SymbolSequence::new(payload.iter().map(|&b| b as u32).collect(), grid, bins)
}

/// `round(x * 4096)` saturated to the `i16` range.
pub fn quantize_q12(x: f64) -> i16 {
    (x * (1u32 << MULTIMATCH_FRAC_BITS) as f64).round().clamp(-32767.0, 32767.0) as i16
}

pub fn dequantize_q12(v: i16) -> f64 {
    v as f64 / (1u32 << MULTIMATCH_FRAC_BITS) as f64
}

pub fn multimatch_fields(s: &Saccade) -> [i16; MULTIMATCH_FIELDS] {
    [
        quantize_q12(s.dx),
        quantize_q12(s.dy),
        quantize_q12(s.amp),
        quantize_q12(s.theta),
        quantize_q12(s.turn),
        quantize_q12(s.s0.0),
        quantize_q12(s.s0.1),
        quantize_q12(s.duration_ms / 1000.0),
    ]
}

pub fn encode_multimatch(ss: &SaccadeSequence) -> Vec<u8> {
    ss.saccades().iter().flat_map(|s| multimatch_fields(s).into_iter().flat_map(i16::to_be_bytes)).collect()
}

pub fn decode_multimatch_fields(payload: &[u8]) -> Result<Vec<[i16; MULTIMATCH_FIELDS]>> {
    AlgorithmParams::MultiMatch.elements(payload.len())?;
    Ok(payload
        .chunks(MULTIMATCH_SACCADE_BYTES)
        .map(|c| std::array::from_fn(|k| i16::from_be_bytes([c[2 * k], c[2 * k + 1]])))
        .collect())
}

/// Saccades as carried by a payload (quantized values, stored turn angles).
pub fn decode_multimatch(payload: &[u8]) -> Result<SaccadeSequence> {
    let fields = decode_multimatch_fields(payload)?;
    let saccades: Vec<Saccade> = fields
        .iter()
        .map(|f| {
            let v = |k: usize| dequantize_q12(f[k]);
            let s0 = (v(5), v(6));
            Saccade {
                dx: v(0),
                dy: v(1),
                amp: v(2),
                theta: v(3),
                turn: v(4),
                s0,
                s1: (s0.0 + v(0), s0.1 + v(1)),
                duration_ms: v(7) * 1000.0,
            }
        })
        .collect();
    // Keep the transmitted turn angles rather than recomputing them.
    SaccadeSequence::from_raw(saccades)
}

pub fn quantize_q14(p: f64) -> u16 {
    (p * (1u32 << SUBSMATCH_FRAC_BITS) as f64).round().clamp(0.0, 32767.0) as u16
}

pub fn encode_subsmatch(fv: &FrequencyVector) -> Vec<u8> {
    fv.entries.iter().flat_map(|&p| quantize_q14(p).to_be_bytes()).collect()
}

pub fn decode_subsmatch(payload: &[u8]) -> Vec<f64> {
    payload
        .chunks(2)
        .map(|c| u16::from_be_bytes([c[0], c.get(1).copied().unwrap_or(0)]) as f64 / (1u32 << SUBSMATCH_FRAC_BITS) as f64)
        .collect()
}
