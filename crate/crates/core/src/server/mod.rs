//! Server-assisted comparison: the owner encrypts and uploads a record and
//! may go offline; an authorized client later runs a session with the
//! storage server, which garbles the composed circuit of [`circuit`].

pub mod circuit;
pub mod record;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use aes_gcm::aead::{Aead, Payload};
use aes_gcm::{Aes128Gcm, KeyInit, Nonce};
use rand::{CryptoRng, RngCore};
use x25519_dalek::{PublicKey, StaticSecret};

use crate::boolcirc::bytes_to_bits;
use crate::boolcirc::comparison::Similarity;
use crate::crypto::{self, KeyPair, Mask, MaskedKey, SymmetricKey};
use crate::error::{Error, Result};
use crate::payload::AlgorithmParams;
use crate::session::{evaluator_run, garbler_run, session_rng, with_abort, Role, PROTOCOL_VERSION};
use crate::transport::{Channel, MsgType, NetProfile, SessionMetrics};
use circuit::ServerCircuit;
use record::{check_client_id, Header, StorageRecord, HEADER_BYTES};

/// What the owner keeps after upload so that clients can be authorized later.
#[derive(Clone)]
pub struct Escrow {
    pub record_id: String,
    pub masked_key: MaskedKey,
    pub sk_a: [u8; 32],
}

pub struct Upload {
    pub record: StorageRecord,
    pub escrow: Escrow,
}

/// Encrypts `payload` under a fresh key and wraps the masked key for every
/// listed client. The record key `K` is dropped before returning.
pub fn owner_encrypt_and_upload<R: RngCore + CryptoRng>(
    payload: &[u8],
    params: &AlgorithmParams,
    clients: &[(String, PublicKey)],
    rng: &mut R,
) -> Result<Upload> {
    if payload.is_empty() {
        return Err(Error::invalid("empty payload"));
    }
    params.validate()?;
    params.check_payload(payload)?;
    let k = SymmetricKey::random(rng);
    let r = Mask::random(rng);
    let mut iv = [0u8; 16];
    rng.fill_bytes(&mut iv);
    let owner = KeyPair::generate(rng);
    let header = Header::new(iv, payload.len(), params);
    let ct = crypto::aes_ctr(&k, &iv, payload);
    let tag = crypto::mac_tag(&k, &iv, &header.to_bytes(), &ct);
    let m = k.mask(&r);
    let mut record = StorageRecord { header, ct, tag, mask: r, pk_a: owner.public.to_bytes(), wrapped: Vec::new() };
    let escrow = Escrow { record_id: record.id(), masked_key: m, sk_a: owner.secret.to_bytes() };
    for (id, pk) in clients {
        authorize_client(&mut record, &escrow, id, pk, rng)?;
    }
    Ok(Upload { record, escrow })
}

/// Appends a wrapped masked key for a new client. CT, T and R are untouched.
pub fn authorize_client<R: RngCore + CryptoRng>(
    record: &mut StorageRecord,
    escrow: &Escrow,
    client_id: &str,
    pk_b: &PublicKey,
    rng: &mut R,
) -> Result<()> {
    check_client_id(client_id)?;
    let sk_a = StaticSecret::from(escrow.sk_a);
    if escrow.record_id != record.id() || PublicKey::from(&sk_a).to_bytes() != record.pk_a {
        return Err(Error::invalid("escrow entry belongs to a different record"));
    }
    if record.wrapped_for(client_id).is_some() {
        return Err(Error::AlreadyAuthorized(client_id.to_string()));
    }
    let e = crypto::wrap_masked_key(&escrow.masked_key, &sk_a, pk_b, rng);
    record.wrapped.push((client_id.to_string(), e));
    Ok(())
}

pub const VAULT_MAGIC: &[u8; 4] = b"SPV1";
pub const VAULT_KDF_ROUNDS: u32 = 100_000;
const VAULT_CHECK: &[u8] = b"scanpath-vault-check";

/// Owner-side store of escrow entries, each sealed with AES-GCM under a key
/// derived from the owner passphrase with PBKDF2-HMAC-SHA256.
///
/// ```text
/// "SPV1" | salt (16) | check (32) | count (4) | (id_len (2) | record_id | nonce (12) | sealed (64))*
/// ```
pub struct Vault {
    salt: [u8; 16],
    key: [u8; 16],
    entries: Vec<(String, [u8; 12], Vec<u8>)>,
}

fn vault_key(passphrase: &str, salt: &[u8; 16]) -> [u8; 16] {
    pbkdf2::pbkdf2_hmac_array::<sha2::Sha256, 16>(passphrase.as_bytes(), salt, VAULT_KDF_ROUNDS)
}

impl Vault {
    pub fn create<R: RngCore + CryptoRng>(passphrase: &str, rng: &mut R) -> Self {
        let mut salt = [0u8; 16];
        rng.fill_bytes(&mut salt);
        Vault { salt, key: vault_key(passphrase, &salt), entries: Vec::new() }
    }

    fn check_value(&self) -> [u8; 32] {
        crypto::hmac_sha256(&self.key, VAULT_CHECK)
    }

    /// Wrong passphrases and damaged files are authentication errors.
    pub fn open(b: &[u8], passphrase: &str) -> Result<Self> {
        let bad = || Error::Auth("vault file is damaged".into());
        if b.len() < 56 || &b[..4] != VAULT_MAGIC {
            return Err(bad());
        }
        let salt: [u8; 16] = b[4..20].try_into().unwrap();
        let mut v = Vault { salt, key: vault_key(passphrase, &salt), entries: Vec::new() };
        if !crypto::ct_eq(&v.check_value(), &b[20..52]) {
            return Err(Error::Auth("wrong vault passphrase".into()));
        }
        let count = u32::from_be_bytes(b[52..56].try_into().unwrap()) as usize;
        let mut rest = &b[56..];
        for _ in 0..count {
            if rest.len() < 2 {
                return Err(bad());
            }
            let n = u16::from_be_bytes([rest[0], rest[1]]) as usize;
            if rest.len() < 2 + n + 12 + 64 {
                return Err(bad());
            }
            let id = std::str::from_utf8(&rest[2..2 + n]).map_err(|_| bad())?.to_string();
            let nonce = rest[2 + n..14 + n].try_into().unwrap();
            let sealed = rest[14 + n..78 + n].to_vec();
            v.entries.push((id, nonce, sealed));
            rest = &rest[78 + n..];
        }
        if !rest.is_empty() {
            return Err(bad());
        }
        Ok(v)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = VAULT_MAGIC.to_vec();
        out.extend_from_slice(&self.salt);
        out.extend_from_slice(&self.check_value());
        out.extend_from_slice(&(self.entries.len() as u32).to_be_bytes());
        for (id, nonce, sealed) in &self.entries {
            out.extend_from_slice(&(id.len() as u16).to_be_bytes());
            out.extend_from_slice(id.as_bytes());
            out.extend_from_slice(nonce);
            out.extend_from_slice(sealed);
        }
        out
    }

    pub fn insert<R: RngCore + CryptoRng>(&mut self, e: &Escrow, rng: &mut R) -> Result<()> {
        if self.entries.iter().any(|(id, ..)| *id == e.record_id) {
            return Err(Error::invalid(format!("vault already holds record {}", e.record_id)));
        }
        let mut nonce = [0u8; 12];
        rng.fill_bytes(&mut nonce);
        let msg = [e.masked_key.0.as_slice(), &e.sk_a].concat();
        let sealed = Aes128Gcm::new(&self.key.into())
            .encrypt(Nonce::from_slice(&nonce), Payload { msg: &msg, aad: e.record_id.as_bytes() })
            .expect("AES-GCM encryption");
        self.entries.push((e.record_id.clone(), nonce, sealed));
        Ok(())
    }

    pub fn get(&self, record_id: &str) -> Result<Escrow> {
        let (_, nonce, sealed) = self
            .entries
            .iter()
            .find(|(id, ..)| id == record_id)
            .ok_or_else(|| Error::invalid(format!("vault has no record {record_id}")))?;
        let msg = Aes128Gcm::new(&self.key.into())
            .decrypt(Nonce::from_slice(nonce), Payload { msg: sealed, aad: record_id.as_bytes() })
            .map_err(|_| Error::Auth("vault entry does not authenticate".into()))?;
        Ok(Escrow {
            record_id: record_id.to_string(),
            masked_key: MaskedKey(msg[..16].try_into().unwrap()),
            sk_a: msg[16..].try_into().unwrap(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Where the server finds record bytes.
pub trait RecordSource: Sync {
    fn load(&self, record_id: &str) -> Result<Vec<u8>>;
}

impl RecordSource for HashMap<String, Vec<u8>> {
    fn load(&self, record_id: &str) -> Result<Vec<u8>> {
        self.get(record_id).cloned().ok_or_else(|| Error::invalid(format!("no record {record_id}")))
    }
}

/// Directory of `<record_id>.spc` files.
pub struct RecordStore {
    dir: PathBuf,
}

impl RecordStore {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        std::fs::create_dir_all(dir.as_ref())?;
        Ok(RecordStore { dir: dir.as_ref().to_path_buf() })
    }

    pub fn path(&self, record_id: &str) -> PathBuf {
        self.dir.join(format!("{record_id}.spc"))
    }

    pub fn put(&self, record: &StorageRecord) -> Result<()> {
        let tmp = self.dir.join(format!(".{}.tmp", record.id()));
        std::fs::write(&tmp, record.to_bytes())?;
        std::fs::rename(&tmp, self.path(&record.id()))?;
        Ok(())
    }

    pub fn get(&self, record_id: &str) -> Result<StorageRecord> {
        StorageRecord::from_bytes(&self.load(record_id)?)
    }

    /// Runs `f` on the stored record and writes it back, holding a lock
    /// file so that mutations of one record are serialized.
    pub fn update(&self, record_id: &str, f: impl FnOnce(&mut StorageRecord) -> Result<()>) -> Result<()> {
        let lock = self.dir.join(format!(".{record_id}.lock"));
        let deadline = std::time::Instant::now() + std::time::Duration::from_secs(10);
        loop {
            match std::fs::OpenOptions::new().write(true).create_new(true).open(&lock) {
                Ok(_) => break,
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists && std::time::Instant::now() < deadline => {
                    std::thread::sleep(std::time::Duration::from_millis(20));
                }
                Err(e) => return Err(Error::Io(e)),
            }
        }
        let r = self.get(record_id).and_then(|mut rec| {
            f(&mut rec)?;
            self.put(&rec)
        });
        let _ = std::fs::remove_file(&lock);
        r
    }

    pub fn list(&self) -> Result<Vec<String>> {
        let mut ids = Vec::new();
        for e in std::fs::read_dir(&self.dir)? {
            let name = e?.file_name().to_string_lossy().to_string();
            if let Some(id) = name.strip_suffix(".spc") {
                if !id.starts_with('.') {
                    ids.push(id.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }
}

impl RecordSource for RecordStore {
    fn load(&self, record_id: &str) -> Result<Vec<u8>> {
        if record_id.is_empty() || !record_id.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(Error::invalid(format!("bad record id {record_id:?}")));
        }
        std::fs::read(self.path(record_id)).map_err(|e| Error::invalid(format!("record {record_id}: {e}")))
    }
}

/// Client HELLO of a server-assisted session.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClientHello {
    pub client_id: String,
    pub record_id: String,
    pub params: AlgorithmParams,
    pub payload_len: u32,
}

impl ClientHello {
    pub fn to_bytes(&self) -> Vec<u8> {
        let canon = self.params.canonical();
        let mut v = vec![PROTOCOL_VERSION, Role::Client.tag()];
        v.push(self.client_id.len() as u8);
        v.extend_from_slice(self.client_id.as_bytes());
        v.push(self.record_id.len() as u8);
        v.extend_from_slice(self.record_id.as_bytes());
        v.extend_from_slice(&(canon.len() as u16).to_be_bytes());
        v.extend_from_slice(canon.as_bytes());
        v.extend_from_slice(&self.payload_len.to_be_bytes());
        v
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        let bad = || Error::protocol("malformed client HELLO");
        let mut rest = b;
        let mut take = |n: usize| -> Result<&[u8]> {
            if rest.len() < n {
                return Err(bad());
            }
            let (h, t) = rest.split_at(n);
            rest = t;
            Ok(h)
        };
        let head = take(2)?;
        if head[0] != PROTOCOL_VERSION || head[1] != Role::Client.tag() {
            return Err(Error::protocol("client HELLO has the wrong version or role"));
        }
        let n = take(1)?[0] as usize;
        let client_id = String::from_utf8(take(n)?.to_vec()).map_err(|_| bad())?;
        let n = take(1)?[0] as usize;
        let record_id = String::from_utf8(take(n)?.to_vec()).map_err(|_| bad())?;
        let n = u16::from_be_bytes(take(2)?.try_into().unwrap()) as usize;
        let canon = std::str::from_utf8(take(n)?).map_err(|_| bad())?.to_string();
        let payload_len = u32::from_be_bytes(take(4)?.try_into().unwrap());
        if !rest.is_empty() {
            return Err(bad());
        }
        let params = AlgorithmParams::from_canonical(&canon).map_err(|e| Error::ParamsMismatch(e.to_string()))?;
        Ok(ClientHello { client_id, record_id, params, payload_len })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SessionOutcome {
    Scores(Similarity),
    /// An in-circuit integrity check failed.
    Bottom,
}

impl SessionOutcome {
    pub fn is_bottom(&self) -> bool {
        matches!(self, SessionOutcome::Bottom)
    }
}

#[derive(Clone, Debug)]
pub struct ClientReport {
    pub outcome: SessionOutcome,
    pub metrics: SessionMetrics,
    pub and_gates: u64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct ServerReport {
    pub record_id: String,
    pub client_id: String,
    pub metrics: SessionMetrics,
    pub and_gates: u64,
    pub table_bytes: u64,
}

/// Server side of one session. The server never learns the outcome.
pub fn serve_session(ch: &mut Channel, records: &dyn RecordSource, seed: u64) -> Result<ServerReport> {
    ch.reset_clock();
    with_abort(ch, |ch| {
        let hello = ClientHello::from_bytes(&ch.expect(MsgType::Hello)?)?;
        let record = StorageRecord::from_bytes(&records.load(&hello.record_id)?)?;
        let e = record
            .wrapped_for(&hello.client_id)
            .ok_or_else(|| Error::Auth(format!("client {} is not authorized for this record", hello.client_id)))?;
        let header = record.header.to_bytes();
        let mut msg = header.to_vec();
        msg.extend_from_slice(&record.ct);
        msg.extend_from_slice(&record.tag);
        msg.extend_from_slice(&record.pk_a);
        msg.extend_from_slice(&(e.len() as u16).to_be_bytes());
        msg.extend_from_slice(e);
        ch.send(MsgType::Record, &msg)?;

        let reply = ch.expect(MsgType::Record)?;
        if reply.len() != record.ct.len() + 32 {
            return Err(Error::protocol("client ciphertext copy has the wrong length"));
        }
        let (ct_b, d_prime) = reply.split_at(record.ct.len());
        let circuit = ServerCircuit::new(&hello.params, record.ct.len(), hello.payload_len as usize)?;
        let known = vec![
            Some(bytes_to_bits(&record.ct)),
            Some(bytes_to_bits(&header)),
            Some(bytes_to_bits(&record.tag)),
            Some(bytes_to_bits(&record.mask.0)),
            Some(bytes_to_bits(ct_b)),
            Some(bytes_to_bits(d_prime)),
            None,
            None,
        ];
        let mut rng = session_rng(seed, "server");
        let stats = garbler_run(ch, &circuit, &known, &mut rng)?;
        ch.finish()?;
        Ok(ServerReport {
            record_id: hello.record_id,
            client_id: hello.client_id,
            metrics: ch.metrics(),
            and_gates: stats.and_gates,
            table_bytes: stats.table_bytes,
        })
    })
}

/// Client side of one session.
pub fn client_session(
    ch: &mut Channel,
    record_id: &str,
    client_id: &str,
    sk_b: &StaticSecret,
    params: &AlgorithmParams,
    payload: &[u8],
    seed: u64,
) -> Result<ClientReport> {
    check_client_id(client_id)?;
    params.check_payload(payload)?;
    ch.reset_clock();
    with_abort(ch, |ch| {
        let hello = ClientHello {
            client_id: client_id.to_string(),
            record_id: record_id.to_string(),
            params: params.clone(),
            payload_len: payload.len() as u32,
        };
        ch.send(MsgType::Hello, &hello.to_bytes())?;
        let msg = ch.expect(MsgType::Record)?;
        let header = Header::parse(msg.get(..HEADER_BYTES).ok_or_else(|| Error::Auth("record message is truncated".into()))?)?;
        let n = header.payload_len as usize;
        let rest = &msg[HEADER_BYTES..];
        if rest.len() < n + 32 + 32 + 2 {
            return Err(Error::Auth("record message is truncated".into()));
        }
        let ct = &rest[..n];
        let pk_a: [u8; 32] = rest[n + 32..n + 64].try_into().unwrap();
        let e_len = u16::from_be_bytes([rest[n + 64], rest[n + 65]]) as usize;
        let e = &rest[n + 66..];
        if e.len() != e_len {
            return Err(Error::Auth("record message is malformed".into()));
        }
        header.check(params, ct.len())?;
        let m = crypto::unwrap_masked_key(e, sk_b, &PublicKey::from(pk_a))?;

        let mut reply = ct.to_vec();
        reply.extend_from_slice(&crypto::sha256(ct));
        ch.send(MsgType::Record, &reply)?;

        let circuit = ServerCircuit::new(params, ct.len(), payload.len())?;
        let mut own = vec![None; 8];
        own[6] = Some(bytes_to_bits(&m.0));
        own[7] = Some(bytes_to_bits(payload));
        let mut rng = session_rng(seed, "client");
        let r = evaluator_run(ch, &circuit, &own, &mut rng)?;
        let outcome = match circuit.decode(&r.outputs)? {
            Some(s) => SessionOutcome::Scores(s),
            None => SessionOutcome::Bottom,
        };
        ch.finish()?;
        Ok(ClientReport { outcome, metrics: ch.metrics(), and_gates: r.and_gates, seed })
    })
}

/// Server and client in one process over an in-memory link.
#[allow(clippy::too_many_arguments)]
pub fn session_in_process(
    records: &dyn RecordSource,
    record_id: &str,
    client_id: &str,
    sk_b: &StaticSecret,
    params: &AlgorithmParams,
    payload: &[u8],
    seed: u64,
    profile: &NetProfile,
) -> (Result<ClientReport>, Result<ServerReport>) {
    let (mut cs, mut cc) = crate::transport::memory_pair(profile);
    std::thread::scope(|s| {
        let server = s.spawn(|| serve_session(&mut cs, records, seed));
        let client = client_session(&mut cc, record_id, client_id, sk_b, params, payload, seed);
        drop(cc);
        let server = server.join().unwrap_or_else(|_| Err(Error::protocol("server thread panicked")));
        (client, server)
    })
}
