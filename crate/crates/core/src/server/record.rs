//! Storage record and header byte formats. All integers are big-endian.
//!
//! ```text
//! HEADER = "SPC1" | version (1) | IV (16) | payload_len (4) | algorithm (1) | params digest (32)
//! record = HEADER | CT | T (32) | R (16) | pk_A (32) | count (4) | (id_len (2) | client_id | E_len (4) | E)*
//! ```

use std::ops::Range;

use crate::crypto::{Mask, TAG_BYTES};
use crate::error::{Error, Result};
use crate::payload::{Algorithm, AlgorithmParams};

pub const MAGIC: &[u8; 4] = b"SPC1";
pub const RECORD_VERSION: u8 = 1;
pub const HEADER_BYTES: usize = 58;
pub const IV_RANGE: Range<usize> = 5..21;
const MAX_CLIENT_ID: usize = 255;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Header {
    pub iv: [u8; 16],
    pub payload_len: u32,
    pub algorithm: Algorithm,
    pub params_digest: [u8; 32],
}

impl Header {
    pub fn new(iv: [u8; 16], payload_len: usize, params: &AlgorithmParams) -> Self {
        Header { iv, payload_len: payload_len as u32, algorithm: params.algorithm(), params_digest: params.digest() }
    }

    pub fn to_bytes(&self) -> [u8; HEADER_BYTES] {
        let mut h = [0u8; HEADER_BYTES];
        h[..4].copy_from_slice(MAGIC);
        h[4] = RECORD_VERSION;
        h[IV_RANGE].copy_from_slice(&self.iv);
        h[21..25].copy_from_slice(&self.payload_len.to_be_bytes());
        h[25] = self.algorithm.tag();
        h[26..].copy_from_slice(&self.params_digest);
        h
    }

    /// Structural failures are reported as authentication errors: a header
    /// that does not parse cannot be the one the tag was computed over.
    pub fn parse(b: &[u8]) -> Result<Self> {
        if b.len() != HEADER_BYTES {
            return Err(Error::Auth("record header has the wrong size".into()));
        }
        if &b[..4] != MAGIC || b[4] != RECORD_VERSION {
            return Err(Error::Auth("record header has a bad magic or version".into()));
        }
        let algorithm = Algorithm::from_tag(b[25]).ok_or_else(|| Error::Auth("record header names no algorithm".into()))?;
        Ok(Header {
            iv: b[IV_RANGE].try_into().unwrap(),
            payload_len: u32::from_be_bytes(b[21..25].try_into().unwrap()),
            algorithm,
            params_digest: b[26..].try_into().unwrap(),
        })
    }

    /// The header must describe a payload of `ct_len` bytes for `params`.
    pub fn check(&self, params: &AlgorithmParams, ct_len: usize) -> Result<()> {
        if self.payload_len as usize != ct_len {
            return Err(Error::Auth("header payload length disagrees with the ciphertext".into()));
        }
        if self.algorithm != params.algorithm() || self.params_digest != params.digest() {
            return Err(Error::Auth("record header does not match the session parameters".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StorageRecord {
    pub header: Header,
    pub ct: Vec<u8>,
    pub tag: [u8; TAG_BYTES],
    pub mask: Mask,
    pub pk_a: [u8; 32],
    /// One wrapped masked key per authorized client, in authorization order.
    pub wrapped: Vec<(String, Vec<u8>)>,
}

struct Cursor<'a> {
    b: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.b.len() < n {
            return Err(Error::Auth("record file is truncated".into()));
        }
        let (h, t) = self.b.split_at(n);
        self.b = t;
        Ok(h)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }
}

impl StorageRecord {
    /// Short id derived from the per-record public key.
    pub fn id(&self) -> String {
        record_id(&self.pk_a)
    }

    pub fn wrapped_for(&self, client_id: &str) -> Option<&[u8]> {
        self.wrapped.iter().find(|(c, _)| c == client_id).map(|(_, e)| e.as_slice())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut v = Vec::with_capacity(HEADER_BYTES + self.ct.len() + 128);
        v.extend_from_slice(&self.header.to_bytes());
        v.extend_from_slice(&self.ct);
        v.extend_from_slice(&self.tag);
        v.extend_from_slice(&self.mask.0);
        v.extend_from_slice(&self.pk_a);
        v.extend_from_slice(&(self.wrapped.len() as u32).to_be_bytes());
        for (id, e) in &self.wrapped {
            v.extend_from_slice(&(id.len() as u16).to_be_bytes());
            v.extend_from_slice(id.as_bytes());
            v.extend_from_slice(&(e.len() as u32).to_be_bytes());
            v.extend_from_slice(e);
        }
        v
    }

    /// Any malformation is an authentication error.
    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        let mut c = Cursor { b };
        let header = Header::parse(c.take(HEADER_BYTES)?)?;
        let ct = c.take(header.payload_len as usize)?.to_vec();
        let tag = c.take(TAG_BYTES)?.try_into().unwrap();
        let mask = Mask(c.take(16)?.try_into().unwrap());
        let pk_a = c.take(32)?.try_into().unwrap();
        let count = c.u32()? as usize;
        if count > c.b.len() / 6 {
            return Err(Error::Auth("record file has an implausible client count".into()));
        }
        let mut wrapped = Vec::with_capacity(count);
        for _ in 0..count {
            let n = u16::from_be_bytes(c.take(2)?.try_into().unwrap()) as usize;
            let id = std::str::from_utf8(c.take(n)?)
                .map_err(|_| Error::Auth("client id is not UTF-8".into()))?
                .to_string();
            let e_len = c.u32()? as usize;
            let e = c.take(e_len)?.to_vec();
            wrapped.push((id, e));
        }
        if !c.b.is_empty() {
            return Err(Error::Auth("record file has trailing bytes".into()));
        }
        Ok(StorageRecord { header, ct, tag, mask, pk_a, wrapped })
    }

    /// Byte ranges of the fields inside [`StorageRecord::to_bytes`], for
    /// fault injection: HEADER, CT, T, R, pk_A and each E.
    pub fn field_ranges(&self) -> Vec<(&'static str, Range<usize>)> {
        let mut at = 0;
        let mut next = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let mut out = vec![
            ("HEADER", next(HEADER_BYTES)),
            ("CT", next(self.ct.len())),
            ("T", next(TAG_BYTES)),
            ("R", next(16)),
            ("pk_A", next(32)),
        ];
        next(4);
        for (id, e) in &self.wrapped {
            next(2 + id.len() + 4);
            out.push(("E", next(e.len())));
        }
        out
    }
}

pub fn record_id(pk_a: &[u8; 32]) -> String {
    let d = crate::crypto::sha256(pk_a);
    d[..8].iter().map(|b| format!("{b:02x}")).collect()
}

pub fn check_client_id(id: &str) -> Result<()> {
    if id.is_empty() || id.len() > MAX_CLIENT_ID || id.chars().any(|c| c.is_control() || c == '/') {
        return Err(Error::invalid(format!("client id {id:?} must be 1..={MAX_CLIENT_ID} printable bytes")));
    }
    Ok(())
}
