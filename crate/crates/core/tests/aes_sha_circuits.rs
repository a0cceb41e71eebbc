use aes::cipher::{generic_array::GenericArray, BlockEncrypt, KeyInit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use scanpath_gc::boolcirc::aes::{aes_inputs, build_aes128_circuit, Aes128Circuit, SBOX_AND_GATES};
use scanpath_gc::boolcirc::sha256::{build_sha256_compression_circuit, Sha256CompressCircuit};
use scanpath_gc::boolcirc::{bits_to_bytes, bytes_to_bits, count, eval_plain};

fn native_aes(key: &[u8; 16], block: &[u8; 16]) -> [u8; 16] {
    let c = aes::Aes128::new(GenericArray::from_slice(key));
    let mut b = GenericArray::clone_from_slice(block);
    c.encrypt_block(&mut b);
    b.into()
}

fn native_compress(state: &[u8; 32], block: &[u8; 64]) -> [u8; 32] {
    let mut s = [0u32; 8];
    for (i, c) in state.chunks(4).enumerate() {
        s[i] = u32::from_be_bytes(c.try_into().unwrap());
    }
    sha2::compress256(&mut s, &[*GenericArray::from_slice(block)]);
    let mut out = [0u8; 32];
    for (i, w) in s.iter().enumerate() {
        out[4 * i..4 * i + 4].copy_from_slice(&w.to_be_bytes());
    }
    out
}

fn hex16(s: &str) -> [u8; 16] {
    hex::decode(s).unwrap().try_into().unwrap()
}

#[test]
fn aes_circuit_known_answer() {
    let key = hex16("000102030405060708090a0b0c0d0e0f");
    let pt = hex16("00112233445566778899aabbccddeeff");
    let out = eval_plain(&Aes128Circuit, &aes_inputs(&key, &pt)).unwrap();
    assert_eq!(hex::encode(bits_to_bytes(&out[0])), "69c4e0d86a7b0430d8cdb78070b4c55a");
    let zero = [0u8; 16];
    let out = eval_plain(&Aes128Circuit, &aes_inputs(&zero, &zero)).unwrap();
    assert_eq!(bits_to_bytes(&out[0]), native_aes(&zero, &zero));
}

#[test]
fn aes_circuit_gate_count() {
    let s = count(&Aes128Circuit);
    assert_eq!(s.and_count as usize, 200 * SBOX_AND_GATES);
    let c = build_aes128_circuit();
    assert_eq!(c.stats().and_count, s.and_count);
}

#[test]
fn aes_circuit_matches_native_on_random_inputs() {
    let c = build_aes128_circuit();
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let key: [u8; 16] = rng.gen();
        let pt: [u8; 16] = rng.gen();
        let out = c.eval(&aes_inputs(&key, &pt)).unwrap();
        assert_eq!(bits_to_bytes(&out[0]), native_aes(&key, &pt));
    }
}

fn iv_bytes() -> [u8; 32] {
    let mut s = [0u8; 32];
    for (i, w) in scanpath_gc::boolcirc::sha256::IV.iter().enumerate() {
        s[4 * i..4 * i + 4].copy_from_slice(&w.to_be_bytes());
    }
    s
}

#[test]
fn sha_circuit_abc() {
    let mut block = [0u8; 64];
    block[..3].copy_from_slice(b"abc");
    block[3] = 0x80;
    block[63] = 24;
    let out = eval_plain(&Sha256CompressCircuit, &[bytes_to_bits(&iv_bytes()), bytes_to_bits(&block)]).unwrap();
    assert_eq!(
        hex::encode(bits_to_bytes(&out[0])),
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    );
    let zero = [0u8; 64];
    let out = eval_plain(&Sha256CompressCircuit, &[bytes_to_bits(&[0u8; 32]), bytes_to_bits(&zero)]).unwrap();
    assert_eq!(bits_to_bytes(&out[0]), native_compress(&[0u8; 32], &zero));
}

#[test]
fn sha_circuit_matches_native_on_random_inputs() {
    let c = build_sha256_compression_circuit();
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    for _ in 0..1000 {
        let state: [u8; 32] = rng.gen();
        let mut block = [0u8; 64];
        rng.fill(&mut block[..]);
        let out = c.eval(&[bytes_to_bits(&state), bytes_to_bits(&block)]).unwrap();
        assert_eq!(bits_to_bytes(&out[0]), native_compress(&state, &block));
    }
}
