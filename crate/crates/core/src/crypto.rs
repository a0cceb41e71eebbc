//! Native primitives for the storage path: AES-CTR payload encryption,
//! XOR key masking, X25519 + HKDF + AES-GCM key wrapping, and the record tag.

use aes::cipher::{BlockEncrypt, KeyInit, KeyIvInit, StreamCipher};
use aes::Aes128;
use aes_gcm::aead::{Aead, Payload};
use aes_gcm::{Aes128Gcm, Nonce};
use hkdf::Hkdf;
use hmac::{Hmac, Mac};
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};
use subtle::ConstantTimeEq;
use x25519_dalek::{PublicKey, StaticSecret};

use crate::error::{Error, Result};

pub const KEY_BYTES: usize = 16;
pub const TAG_BYTES: usize = 32;
pub const WRAP_INFO: &[u8] = b"scanpath-wrap-v1";
pub const MAC_LABEL: &[u8] = b"MAC";
const GCM_NONCE_BYTES: usize = 12;
/// nonce || GCM ciphertext of M || GCM tag
pub const WRAPPED_BYTES: usize = GCM_NONCE_BYTES + KEY_BYTES + 16;

type Ctr = ctr::Ctr128BE<Aes128>;
type HmacSha256 = Hmac<Sha256>;

/// 128-bit AES key `K`.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct SymmetricKey(pub [u8; KEY_BYTES]);

/// Uniform mask `R` kept by the server.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mask(pub [u8; KEY_BYTES]);

/// `M = K ^ R`, wrapped for each authorized client.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct MaskedKey(pub [u8; KEY_BYTES]);

impl std::fmt::Debug for SymmetricKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SymmetricKey(..)")
    }
}

impl std::fmt::Debug for MaskedKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("MaskedKey(..)")
    }
}

fn xor16(a: &[u8; KEY_BYTES], b: &[u8; KEY_BYTES]) -> [u8; KEY_BYTES] {
    std::array::from_fn(|i| a[i] ^ b[i])
}

impl SymmetricKey {
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut k = [0u8; KEY_BYTES];
        rng.fill_bytes(&mut k);
        SymmetricKey(k)
    }

    pub fn mask(&self, r: &Mask) -> MaskedKey {
        MaskedKey(xor16(&self.0, &r.0))
    }
}

impl Mask {
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut r = [0u8; KEY_BYTES];
        rng.fill_bytes(&mut r);
        Mask(r)
    }
}

impl MaskedKey {
    pub fn unmask(&self, r: &Mask) -> SymmetricKey {
        SymmetricKey(xor16(&self.0, &r.0))
    }
}

pub fn aes128_encrypt_block(key: &[u8; KEY_BYTES], block: &[u8; 16]) -> [u8; 16] {
    let c = Aes128::new(key.into());
    let mut b = aes::Block::from(*block);
    c.encrypt_block(&mut b);
    b.into()
}

/// `C_i = P_i ^ AES_K(IV + i)`, counter big-endian over all 128 bits.
/// The same call decrypts.
pub fn aes_ctr(key: &SymmetricKey, iv: &[u8; 16], data: &[u8]) -> Vec<u8> {
    let mut out = data.to_vec();
    Ctr::new(&key.0.into(), iv.into()).apply_keystream(&mut out);
    out
}

pub fn sha256(data: &[u8]) -> [u8; 32] {
    Sha256::digest(data).into()
}

pub fn hmac_sha256(key: &[u8], data: &[u8]) -> [u8; 32] {
    let mut m = <HmacSha256 as Mac>::new_from_slice(key).expect("HMAC takes any key length");
    m.update(data);
    m.finalize().into_bytes().into()
}

pub fn hkdf_sha256(salt: &[u8], ikm: &[u8], info: &[u8], len: usize) -> Result<Vec<u8>> {
    let salt = if salt.is_empty() { None } else { Some(salt) };
    let mut okm = vec![0u8; len];
    Hkdf::<Sha256>::new(salt, ikm)
        .expand(info, &mut okm)
        .map_err(|_| Error::invalid(format!("HKDF cannot produce {len} bytes")))?;
    Ok(okm)
}

/// `K_mac = SHA256(K || "MAC" || IV)`.
pub fn mac_key(key: &SymmetricKey, iv: &[u8; 16]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(key.0);
    h.update(MAC_LABEL);
    h.update(iv);
    h.finalize().into()
}

/// `T = HMAC-SHA256(K_mac, HEADER || SHA256(CT))`.
pub fn mac_tag(key: &SymmetricKey, iv: &[u8; 16], header: &[u8], ciphertext: &[u8]) -> [u8; TAG_BYTES] {
    let mut msg = header.to_vec();
    msg.extend_from_slice(&sha256(ciphertext));
    hmac_sha256(&mac_key(key, iv), &msg)
}

pub fn verify_tag(key: &SymmetricKey, iv: &[u8; 16], header: &[u8], ciphertext: &[u8], tag: &[u8]) -> bool {
    ct_eq(&mac_tag(key, iv, header, ciphertext), tag)
}

pub fn ct_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && bool::from(a.ct_eq(b))
}

/// An X25519 key pair.
#[derive(Clone)]
pub struct KeyPair {
    pub secret: StaticSecret,
    pub public: PublicKey,
}

impl KeyPair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let secret = StaticSecret::random_from_rng(rng);
        let public = PublicKey::from(&secret);
        KeyPair { secret, public }
    }

    pub fn from_secret_bytes(b: [u8; 32]) -> Self {
        let secret = StaticSecret::from(b);
        let public = PublicKey::from(&secret);
        KeyPair { secret, public }
    }
}

pub fn x25519(secret: &StaticSecret, public: &PublicKey) -> [u8; 32] {
    secret.diffie_hellman(public).to_bytes()
}

/// `K_wrap = HKDF-SHA256(salt = "", ikm = K_AB, info = "scanpath-wrap-v1")`, 16 bytes.
fn wrap_key(shared: &[u8; 32]) -> [u8; KEY_BYTES] {
    hkdf_sha256(&[], shared, WRAP_INFO, KEY_BYTES).expect("16 bytes").try_into().unwrap()
}

fn wrap_aad(pk_a: &PublicKey, pk_b: &PublicKey) -> Vec<u8> {
    [pk_a.as_bytes().as_slice(), pk_b.as_bytes().as_slice()].concat()
}

/// `E = nonce || AES-GCM(K_wrap, nonce, M)` with both public keys as
/// associated data.
pub fn wrap_masked_key<R: RngCore + CryptoRng>(
    m: &MaskedKey,
    sk_a: &StaticSecret,
    pk_b: &PublicKey,
    rng: &mut R,
) -> Vec<u8> {
    let pk_a = PublicKey::from(sk_a);
    let k = wrap_key(&x25519(sk_a, pk_b));
    let mut nonce = [0u8; GCM_NONCE_BYTES];
    rng.fill_bytes(&mut nonce);
    let aad = wrap_aad(&pk_a, pk_b);
    let ct = Aes128Gcm::new(&k.into())
        .encrypt(Nonce::from_slice(&nonce), Payload { msg: &m.0, aad: &aad })
        .expect("AES-GCM encryption of 16 bytes");
    [nonce.as_slice(), &ct].concat()
}

pub fn unwrap_masked_key(e: &[u8], sk_b: &StaticSecret, pk_a: &PublicKey) -> Result<MaskedKey> {
    if e.len() != WRAPPED_BYTES {
        return Err(Error::Auth(format!("wrapped key must be {WRAPPED_BYTES} bytes")));
    }
    let pk_b = PublicKey::from(sk_b);
    let k = wrap_key(&x25519(sk_b, pk_a));
    let aad = wrap_aad(pk_a, &pk_b);
    let (nonce, ct) = e.split_at(GCM_NONCE_BYTES);
    let m = Aes128Gcm::new(&k.into())
        .decrypt(Nonce::from_slice(nonce), Payload { msg: ct, aad: &aad })
        .map_err(|_| Error::Auth("wrapped key does not authenticate".into()))?;
    Ok(MaskedKey(m.try_into().expect("16-byte plaintext")))
}
