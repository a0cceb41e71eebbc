use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use scanpath_gc::boolcirc::aes::{aes_inputs, build_aes128_circuit};
use scanpath_gc::boolcirc::bristol::{export, import};
use scanpath_gc::boolcirc::Party;

// Hand-written full adder: inputs a, b, cin; outputs sum, cout.
const FULL_ADDER: &str = "\
6 9
3 1 1 1
2 1 1

2 1 0 1 3 XOR
2 1 0 1 4 AND
2 1 3 2 5 AND
2 1 5 4 6 XOR
1 1 6 8 EQW
2 1 3 2 7 XOR
";

#[test]
fn hand_written_full_adder() {
    let c = import(FULL_ADDER, &[Party::Garbler, Party::Evaluator, Party::Evaluator]).unwrap();
    assert_eq!(c.stats().and_count, 2);
    for x in 0..8u8 {
        let bits: Vec<Vec<bool>> = (0..3).map(|i| vec![(x >> i) & 1 == 1]).collect();
        let out = c.eval(&bits).unwrap();
        let n = x.count_ones();
        // Outputs are the last two wires: 7 is the sum, 8 the carry.
        assert_eq!(out, vec![vec![n & 1 == 1], vec![n >= 2]], "input {x:03b}");
    }
}

#[test]
fn aes_roundtrip_through_text() {
    let c = build_aes128_circuit();
    let text = export(&c);
    let parties: Vec<Party> = c.input_specs().iter().map(|i| i.party).collect();
    let back = import(&text, &parties).unwrap();
    assert_eq!(back.stats().and_count, c.stats().and_count);
    assert_eq!(export(&back).lines().count(), text.lines().count());
    let mut r = ChaCha20Rng::seed_from_u64(1);
    for _ in 0..20 {
        let (k, m): ([u8; 16], [u8; 16]) = (r.gen(), r.gen());
        let inputs = aes_inputs(&k, &m);
        assert_eq!(back.eval(&inputs).unwrap(), c.eval(&inputs).unwrap());
    }
}

#[test]
fn malformed_text_is_rejected() {
    let p = [Party::Garbler, Party::Evaluator, Party::Evaluator];
    assert!(import("", &p).is_err());
    assert!(import(&FULL_ADDER.replacen("6 9", "7 9", 1), &p).is_err());
    assert!(import(&FULL_ADDER.replace("XOR\n2 1 0 1 4", "NAND\n2 1 0 1 4"), &p).is_err());
    assert!(import(&FULL_ADDER.replace("2 1 3 2 7 XOR", "2 1 3 2 9 XOR"), &p).is_err());
    // Reading a wire before it is written.
    assert!(import(&FULL_ADDER.replace("2 1 0 1 3 XOR", "2 1 0 6 3 XOR"), &p).is_err());
    assert!(import(FULL_ADDER, &p[..2]).is_err());
}
