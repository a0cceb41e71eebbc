//! Base 1-out-of-2 oblivious transfer of 128-bit messages, one group
//! operation pair per transfer, over the Ristretto group of Curve25519.
//!
//! Sender picks `y`, sends `S = yG`. For choice `c` the receiver picks `x`
//! and sends `R = xG + cS`. The sender derives `k0 = H(yR)` and
//! `k1 = H(yR - yS)`; the receiver derives `k_c = H(xS)`. Only the receiver's
//! points reach the sender, and `R` is uniform whatever `c` is.
//!
//! Scalars are kept halved so that every key point comes out of one
//! `double_and_compress_batch` call.

use curve25519_dalek::constants::RISTRETTO_BASEPOINT_TABLE;
use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoBasepointTable, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};

use super::Block;
use crate::error::{Error, Result};

pub const POINT_BYTES: usize = 32;

/// First message, sender to receiver.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SenderHello {
    pub s: [u8; POINT_BYTES],
}

/// Receiver's blinded choices, one point per transfer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReceiverChoices {
    pub points: Vec<[u8; POINT_BYTES]>,
}

/// Both messages of every transfer, each masked with its key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SenderPayload {
    pub ciphertexts: Vec<(Block, Block)>,
}

impl SenderHello {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.s.to_vec()
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        let s = b.try_into().map_err(|_| Error::protocol("OT hello must be 32 bytes"))?;
        Ok(SenderHello { s })
    }
}

impl ReceiverChoices {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.points.concat()
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        if b.len() % POINT_BYTES != 0 {
            return Err(Error::protocol("OT choice message is not a whole number of points"));
        }
        Ok(ReceiverChoices { points: b.chunks(POINT_BYTES).map(|c| c.try_into().unwrap()).collect() })
    }
}

impl SenderPayload {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 * self.ciphertexts.len());
        for (e0, e1) in &self.ciphertexts {
            out.extend_from_slice(&e0.to_bytes());
            out.extend_from_slice(&e1.to_bytes());
        }
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        if b.len() % 32 != 0 {
            return Err(Error::protocol("OT payload is not a whole number of ciphertext pairs"));
        }
        let block = |s: &[u8]| Block::from_bytes(s.try_into().unwrap());
        Ok(SenderPayload { ciphertexts: b.chunks(32).map(|c| (block(&c[..16]), block(&c[16..]))).collect() })
    }
}

fn key(s: &[u8; POINT_BYTES], index: usize, r: &[u8; POINT_BYTES], p: &CompressedRistretto) -> Block {
    let mut h = Sha256::new();
    h.update(b"scanpath-ot-v1");
    h.update(s);
    h.update((index as u64).to_be_bytes());
    h.update(r);
    h.update(p.as_bytes());
    let d = h.finalize();
    Block::from_bytes(d[..16].try_into().unwrap())
}

fn half() -> Scalar {
    Scalar::from(2u64).invert()
}

/// Runs `f` over contiguous chunks of `items` on all available cores and
/// concatenates the results in order.
fn par_chunks<T: Sync, U: Send>(items: &[T], f: impl Fn(usize, &[T]) -> Vec<U> + Sync) -> Vec<U> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    if threads <= 1 || items.len() < 64 {
        return f(0, items);
    }
    let size = items.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(size)
            .enumerate()
            .map(|(k, chunk)| {
                let f = &f;
                scope.spawn(move || f(k * size, chunk))
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("OT worker panicked")).collect()
    })
}

pub struct OtSender {
    s: [u8; POINT_BYTES],
    y_half: Scalar,
    t_half: RistrettoPoint,
}

impl OtSender {
    pub fn new<R: RngCore + CryptoRng>(rng: &mut R) -> (Self, SenderHello) {
        let y = Scalar::random(rng);
        let s_point = RistrettoPoint::mul_base(&y);
        let y_half = y * half();
        let s = s_point.compress().to_bytes();
        (OtSender { s, y_half, t_half: s_point * y_half }, SenderHello { s })
    }

    /// Masks `pairs[i].0` and `pairs[i].1` for the `i`-th choice point.
    pub fn respond(&self, choices: &ReceiverChoices, pairs: &[(Block, Block)]) -> Result<SenderPayload> {
        if choices.points.len() != pairs.len() {
            return Err(Error::protocol(format!(
                "OT receiver sent {} points for {} message pairs",
                choices.points.len(),
                pairs.len()
            )));
        }
        let results = par_chunks(&choices.points, |offset, pts| {
            let mut half_points = Vec::with_capacity(2 * pts.len());
            for r in pts {
                let Some(p) = CompressedRistretto(*r).decompress() else {
                    return vec![None];
                };
                let p0 = p * self.y_half;
                half_points.push(p0);
                half_points.push(p0 - self.t_half);
            }
            let keys = RistrettoPoint::double_and_compress_batch(&half_points);
            pts.iter()
                .enumerate()
                .map(|(k, r)| {
                    let i = offset + k;
                    let (m0, m1) = pairs[i];
                    Some((m0 ^ key(&self.s, i, r, &keys[2 * k]), m1 ^ key(&self.s, i, r, &keys[2 * k + 1])))
                })
                .collect()
        });
        let ciphertexts: Option<Vec<_>> = results.into_iter().collect();
        let ciphertexts = ciphertexts.ok_or_else(|| Error::protocol("OT receiver sent an invalid point"))?;
        Ok(SenderPayload { ciphertexts })
    }
}

pub struct OtReceiver {
    choices: Vec<bool>,
    keys: Vec<Block>,
}

impl OtReceiver {
    pub fn choose<R: RngCore + CryptoRng>(
        hello: &SenderHello,
        choices: &[bool],
        rng: &mut R,
    ) -> Result<(Self, ReceiverChoices)> {
        let s = CompressedRistretto(hello.s)
            .decompress()
            .ok_or_else(|| Error::protocol("OT sender sent an invalid point"))?;
        // A precomputed table for S only pays off over many transfers.
        let s_table = (choices.len() >= 64).then(|| RistrettoBasepointTable::create(&s));
        let s_half = s * half();
        let zs: Vec<(Scalar, bool)> = choices.iter().map(|&c| (Scalar::random(rng), c)).collect();
        let out = par_chunks(&zs, |offset, chunk| {
            let mut half_points = Vec::with_capacity(2 * chunk.len());
            for (z, c) in chunk {
                let mut r = RISTRETTO_BASEPOINT_TABLE * z;
                if *c {
                    r += s_half;
                }
                half_points.push(r);
                half_points.push(match &s_table {
                    Some(t) => t * z,
                    None => s * z,
                });
            }
            let comp = RistrettoPoint::double_and_compress_batch(&half_points);
            (0..chunk.len())
                .map(|k| {
                    let r = comp[2 * k].to_bytes();
                    (r, key(&hello.s, offset + k, &r, &comp[2 * k + 1]))
                })
                .collect()
        });
        let (points, keys) = out.into_iter().unzip();
        Ok((OtReceiver { choices: choices.to_vec(), keys }, ReceiverChoices { points }))
    }

    pub fn finish(self, payload: &SenderPayload) -> Result<Vec<Block>> {
        if payload.ciphertexts.len() != self.keys.len() {
            return Err(Error::protocol(format!(
                "OT sender answered {} transfers, expected {}",
                payload.ciphertexts.len(),
                self.keys.len()
            )));
        }
        Ok(payload
            .ciphertexts
            .iter()
            .zip(self.keys.iter().zip(&self.choices))
            .map(|(&(e0, e1), (&k, &c))| if c { e1 ^ k } else { e0 ^ k })
            .collect())
    }
}

/// Both sides in one process. Returns the receiver's messages and the
/// bytes each side would send.
pub fn ot_transfer<R1, R2>(
    pairs: &[(Block, Block)],
    choices: &[bool],
    sender_rng: &mut R1,
    receiver_rng: &mut R2,
) -> Result<OtTranscript>
where
    R1: RngCore + CryptoRng,
    R2: RngCore + CryptoRng,
{
    if pairs.len() != choices.len() {
        return Err(Error::protocol(format!("{} message pairs for {} choice bits", pairs.len(), choices.len())));
    }
    let (sender, hello) = OtSender::new(sender_rng);
    let (receiver, blinded) = OtReceiver::choose(&hello, choices, receiver_rng)?;
    let payload = sender.respond(&blinded, pairs)?;
    let received = receiver.finish(&payload)?;
    Ok(OtTranscript { hello, choices: blinded, payload, received })
}

#[derive(Clone, Debug)]
pub struct OtTranscript {
    pub hello: SenderHello,
    pub choices: ReceiverChoices,
    pub payload: SenderPayload,
    pub received: Vec<Block>,
}

impl OtTranscript {
    pub fn sender_bytes(&self) -> usize {
        POINT_BYTES + 32 * self.payload.ciphertexts.len()
    }

    pub fn receiver_bytes(&self) -> usize {
        POINT_BYTES * self.choices.points.len()
    }
}
