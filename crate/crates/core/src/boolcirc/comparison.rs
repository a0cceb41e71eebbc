//! Similarity circuits over byte payloads, and their two-party wrapper.

use sha2::{Digest, Sha256};

use super::multimatch::MultiMatchCircuit;
use super::scanmatch::ScanMatchCircuit;
use super::subsmatch::SubsMatchCircuit;
use super::{Backend, Bit, Builder, CircuitDef, InputDecl, OutputDecl, Party, Word};
use crate::error::{Error, Result};
use crate::payload::AlgorithmParams;
use crate::plaintext::MultiMatchScores;

/// A similarity function of two payloads. Payload bits are the payload
/// bytes in order, each byte LSB first.
pub trait Comparison {
    fn payload_len_a(&self) -> usize;
    fn payload_len_b(&self) -> usize;
    fn result_outputs(&self) -> Vec<OutputDecl>;
    fn compare<B: Backend>(
        &self,
        b: &mut Builder<B>,
        a_bits: &[Bit<B::Wire>],
        b_bits: &[Bit<B::Wire>],
    ) -> Vec<Word<B::Wire>>;
    /// Canonical description of the public shape; feeds the circuit id.
    fn describe(&self) -> String;
}

/// Big-endian 16-bit field `k` of a payload, as an LSB-first word.
pub(crate) fn be16<W: Copy>(bits: &[Bit<W>], k: usize) -> Word<W> {
    let hi = &bits[16 * k..16 * k + 8];
    let lo = &bits[16 * k + 8..16 * k + 16];
    lo.iter().chain(hi).copied().collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum Similarity {
    ScanMatch { raw: i64, score: f64 },
    MultiMatch(MultiMatchScores),
    SubsMatch(f64),
}

impl Similarity {
    /// The single headline number: ScanMatch score, MultiMatch overall, SubsMatch S.
    pub fn overall(&self) -> f64 {
        match self {
            Similarity::ScanMatch { score, .. } => *score,
            Similarity::MultiMatch(s) => s.overall,
            Similarity::SubsMatch(s) => *s,
        }
    }

    /// `name value` lines.
    pub fn lines(&self) -> Vec<(String, f64)> {
        match self {
            Similarity::ScanMatch { raw, score } => {
                vec![("raw_score".into(), *raw as f64), ("similarity".into(), *score)]
            }
            Similarity::MultiMatch(s) => {
                let mut v: Vec<(String, f64)> = crate::plaintext::COMPONENT_NAMES
                    .iter()
                    .zip(s.components())
                    .map(|(n, x)| (n.to_string(), x))
                    .collect();
                v.push(("overall".into(), s.overall));
                v
            }
            Similarity::SubsMatch(s) => vec![("similarity".into(), *s)],
        }
    }
}

/// One of the three algorithm circuits, chosen at run time.
#[derive(Clone, Debug)]
pub enum ComparisonCircuit {
    ScanMatch(ScanMatchCircuit),
    MultiMatch(MultiMatchCircuit),
    SubsMatch(SubsMatchCircuit),
}

impl ComparisonCircuit {
    /// Circuit for payloads of `len_a` and `len_b` bytes.
    pub fn for_params(params: &AlgorithmParams, len_a: usize, len_b: usize) -> Result<Self> {
        params.validate()?;
        let (na, nb) = (params.elements(len_a)?, params.elements(len_b)?);
        Ok(match params {
            AlgorithmParams::ScanMatch { .. } => {
                ComparisonCircuit::ScanMatch(ScanMatchCircuit::new(na, nb, params.matrix()?)?)
            }
            AlgorithmParams::MultiMatch => ComparisonCircuit::MultiMatch(MultiMatchCircuit::new(na, nb)?),
            AlgorithmParams::SubsMatch { .. } => {
                if na != nb {
                    return Err(Error::ParamsMismatch("frequency vectors differ in dimension".into()));
                }
                ComparisonCircuit::SubsMatch(SubsMatchCircuit::new(na)?)
            }
        })
    }

    /// Interprets revealed result bits, in [`Comparison::result_outputs`] order.
    pub fn decode(&self, outputs: &[Vec<bool>]) -> Result<Similarity> {
        let decls = self.result_outputs();
        if outputs.len() != decls.len() || outputs.iter().zip(&decls).any(|(o, d)| o.len() != d.width) {
            return Err(Error::protocol("result bits do not match the circuit outputs"));
        }
        Ok(match self {
            ComparisonCircuit::ScanMatch(c) => c.decode(outputs),
            ComparisonCircuit::MultiMatch(c) => Similarity::MultiMatch(c.decode(outputs)),
            ComparisonCircuit::SubsMatch(c) => Similarity::SubsMatch(c.decode(outputs)),
        })
    }
}

impl Comparison for ComparisonCircuit {
    fn payload_len_a(&self) -> usize {
        match self {
            ComparisonCircuit::ScanMatch(c) => c.payload_len_a(),
            ComparisonCircuit::MultiMatch(c) => c.payload_len_a(),
            ComparisonCircuit::SubsMatch(c) => c.payload_len_a(),
        }
    }

    fn payload_len_b(&self) -> usize {
        match self {
            ComparisonCircuit::ScanMatch(c) => c.payload_len_b(),
            ComparisonCircuit::MultiMatch(c) => c.payload_len_b(),
            ComparisonCircuit::SubsMatch(c) => c.payload_len_b(),
        }
    }

    fn result_outputs(&self) -> Vec<OutputDecl> {
        match self {
            ComparisonCircuit::ScanMatch(c) => c.result_outputs(),
            ComparisonCircuit::MultiMatch(c) => c.result_outputs(),
            ComparisonCircuit::SubsMatch(c) => c.result_outputs(),
        }
    }

    fn compare<B: Backend>(
        &self,
        b: &mut Builder<B>,
        a_bits: &[Bit<B::Wire>],
        b_bits: &[Bit<B::Wire>],
    ) -> Vec<Word<B::Wire>> {
        match self {
            ComparisonCircuit::ScanMatch(c) => c.compare(b, a_bits, b_bits),
            ComparisonCircuit::MultiMatch(c) => c.compare(b, a_bits, b_bits),
            ComparisonCircuit::SubsMatch(c) => c.compare(b, a_bits, b_bits),
        }
    }

    fn describe(&self) -> String {
        match self {
            ComparisonCircuit::ScanMatch(c) => c.describe(),
            ComparisonCircuit::MultiMatch(c) => c.describe(),
            ComparisonCircuit::SubsMatch(c) => c.describe(),
        }
    }
}

/// Direct comparison: the garbler holds payload `a`, the evaluator payload `b`.
#[derive(Clone, Debug)]
pub struct TwoPartyCircuit<C>(pub C);

impl<C: Comparison> CircuitDef for TwoPartyCircuit<C> {
    fn inputs(&self) -> Vec<InputDecl> {
        vec![
            InputDecl::new(Party::Garbler, "a", 8 * self.0.payload_len_a()),
            InputDecl::new(Party::Evaluator, "b", 8 * self.0.payload_len_b()),
        ]
    }

    fn outputs(&self) -> Vec<OutputDecl> {
        self.0.result_outputs()
    }

    fn build<B: Backend>(&self, b: &mut Builder<B>, inputs: &[Word<B::Wire>]) -> Vec<Word<B::Wire>> {
        self.0.compare(b, &inputs[0], &inputs[1])
    }

    fn circuit_id(&self) -> [u8; 32] {
        Sha256::digest(format!("two-party-v1;{}", self.0.describe())).into()
    }
}
