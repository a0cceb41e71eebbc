use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use scanpath_gc::boolcirc::aes::Aes128Circuit;
use scanpath_gc::boolcirc::comparison::{ComparisonCircuit, TwoPartyCircuit};
use scanpath_gc::boolcirc::{
    bits_to_bytes, bytes_to_bits, count, eval_plain, record, Backend, Builder, CircuitDef, InputDecl, OutputDecl,
    Party, Word,
};
use scanpath_gc::error::Error;
use scanpath_gc::gc::ot::{ot_transfer, OtReceiver, OtSender, ReceiverChoices, SenderHello};
use scanpath_gc::gc::{
    debug_check_labels, decode, evaluate, evaluate_instrumented, evaluate_with, garble, garble_with, run_local, Block,
    EvalCore, GarbleCore, SliceSource,
};
use scanpath_gc::payload::AlgorithmParams;
use statrs::distribution::{ChiSquared, ContinuousCDF};

struct Adder8;

impl CircuitDef for Adder8 {
    fn inputs(&self) -> Vec<InputDecl> {
        vec![InputDecl::new(Party::Garbler, "a", 8), InputDecl::new(Party::Evaluator, "b", 8)]
    }
    fn outputs(&self) -> Vec<OutputDecl> {
        vec![OutputDecl::new("sum", 9)]
    }
    fn build<B: Backend>(&self, b: &mut Builder<B>, inputs: &[Word<B::Wire>]) -> Vec<Word<B::Wire>> {
        let x = b.zext(&inputs[0], 9);
        let y = b.zext(&inputs[1], 9);
        vec![b.add(&x, &y)]
    }
    fn circuit_id(&self) -> [u8; 32] {
        [1; 32]
    }
}

/// `3 * x` on a 9-bit word, used as the second stage of a composition.
struct Triple;

impl CircuitDef for Triple {
    fn inputs(&self) -> Vec<InputDecl> {
        vec![InputDecl::new(Party::Garbler, "x", 9)]
    }
    fn outputs(&self) -> Vec<OutputDecl> {
        vec![OutputDecl::new("y", 11)]
    }
    fn build<B: Backend>(&self, b: &mut Builder<B>, inputs: &[Word<B::Wire>]) -> Vec<Word<B::Wire>> {
        let x = b.zext(&inputs[0], 11);
        vec![b.mul_const(&x, 3)[..11].to_vec()]
    }
    fn circuit_id(&self) -> [u8; 32] {
        [2; 32]
    }
}

struct OneAnd;

impl CircuitDef for OneAnd {
    fn inputs(&self) -> Vec<InputDecl> {
        vec![InputDecl::new(Party::Garbler, "a", 1), InputDecl::new(Party::Evaluator, "b", 1)]
    }
    fn outputs(&self) -> Vec<OutputDecl> {
        vec![OutputDecl::new("c", 1)]
    }
    fn build<B: Backend>(&self, b: &mut Builder<B>, inputs: &[Word<B::Wire>]) -> Vec<Word<B::Wire>> {
        vec![vec![b.and(inputs[0][0], inputs[1][0])]]
    }
    fn circuit_id(&self) -> [u8; 32] {
        [3; 32]
    }
}

struct XorOnly;

impl CircuitDef for XorOnly {
    fn inputs(&self) -> Vec<InputDecl> {
        vec![InputDecl::new(Party::Garbler, "a", 32), InputDecl::new(Party::Evaluator, "b", 32)]
    }
    fn outputs(&self) -> Vec<OutputDecl> {
        vec![OutputDecl::new("c", 32)]
    }
    fn build<B: Backend>(&self, b: &mut Builder<B>, inputs: &[Word<B::Wire>]) -> Vec<Word<B::Wire>> {
        let x = b.xor_words(&inputs[0], &inputs[1]);
        let y = b.not_word(&x);
        vec![b.xor_words(&y, &inputs[0])]
    }
    fn circuit_id(&self) -> [u8; 32] {
        [4; 32]
    }
}

fn bits(v: u64, w: usize) -> Vec<bool> {
    (0..w).map(|i| (v >> i) & 1 == 1).collect()
}

fn value(b: &[bool]) -> u64 {
    b.iter().enumerate().map(|(i, &x)| (x as u64) << i).sum()
}

fn seed(n: u64) -> [u8; 32] {
    let mut s = [0u8; 32];
    s[..8].copy_from_slice(&n.to_le_bytes());
    s
}

#[test]
fn and_truth_table() {
    for (a, b) in [(false, false), (false, true), (true, false), (true, true)] {
        let r = run_local(&OneAnd, &[a], &[b], seed(a as u64 * 2 + b as u64)).unwrap();
        assert_eq!(r.outputs, vec![vec![a && b]]);
    }
}

#[test]
fn table_bytes_follow_and_count() {
    let g = garble(&XorOnly, &[false; 32], seed(1)).unwrap();
    assert_eq!(g.gc.table_bytes(), 0);
    let g = garble(&OneAnd, &[true], seed(1)).unwrap();
    assert_eq!(g.gc.table_bytes(), 32);
    let g = garble(&Adder8, &bits(7, 8), seed(1)).unwrap();
    assert_eq!(g.gc.table_bytes() as u64, 32 * count(&Adder8).and_count);

    let r = run_local(&XorOnly, &bits(0xdead_beef, 32), &bits(0x1234_5678, 32), seed(2)).unwrap();
    assert_eq!(value(&r.outputs[0]), !0x1234_5678u64 & 0xffff_ffff);
    assert_eq!(r.table_bytes, 0);
}

#[test]
fn same_seed_same_bytes() {
    let c = TwoPartyCircuit(ComparisonCircuit::for_params(&AlgorithmParams::scanmatch(3, 1), 4, 5).unwrap());
    let inputs = bytes_to_bits(&[0, 4, 8, 2]);
    let g1 = garble(&c, &inputs, seed(9)).unwrap();
    let g2 = garble(&c, &inputs, seed(9)).unwrap();
    assert_eq!(g1.gc, g2.gc);
    assert_eq!(g1.evaluator_pairs, g2.evaluator_pairs);
    let g3 = garble(&c, &inputs, seed(10)).unwrap();
    assert_ne!(g1.gc.tables, g3.gc.tables);
}

#[test]
fn label_pairs_differ_by_delta() {
    let g = garble(&Adder8, &bits(5, 8), seed(3)).unwrap();
    let delta = g.encoding.delta;
    assert!(delta.lsb());
    for &(l0, l1) in &g.evaluator_pairs {
        assert_eq!(l0 ^ l1, delta);
    }
    for (l, (z, v)) in g.garbler_labels.iter().zip(g.encoding.zero[0].iter().zip(bits(5, 8))) {
        assert_eq!(*l, if v { *z ^ delta } else { *z });
    }
}

#[test]
fn adder_sample_through_ot() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    for k in 0..200 {
        let (a, b) = (rng.gen_range(0..256u64), rng.gen_range(0..256u64));
        let r = run_local(&Adder8, &bits(a, 8), &bits(b, 8), seed(k)).unwrap();
        assert_eq!(value(&r.outputs[0]), a + b);
    }
}

#[test]
fn garbler_input_width_is_checked() {
    assert!(matches!(garble(&Adder8, &bits(1, 7), seed(0)), Err(Error::Protocol(_))));
}

#[test]
fn malformed_tables_are_rejected() {
    let g = garble(&Adder8, &bits(200, 8), seed(5)).unwrap();
    let mut labels = g.garbler_labels.clone();
    labels.extend(g.evaluator_pairs.iter().map(|p| p.0));
    let ok = evaluate(&g.gc, &Adder8, &labels).unwrap();
    assert_eq!(value(&decode(&ok, &g.gc.decode).unwrap()[0]), 200);

    let mut short = g.gc.clone();
    short.tables.truncate(short.tables.len() - 32);
    assert!(matches!(evaluate(&short, &Adder8, &labels), Err(Error::Protocol(_))));
    let mut ragged = g.gc.clone();
    ragged.tables.push(0);
    assert!(matches!(evaluate(&ragged, &Adder8, &labels), Err(Error::Protocol(_))));
    let mut long = g.gc.clone();
    long.tables.extend([0u8; 32]);
    assert!(matches!(evaluate(&long, &Adder8, &labels), Err(Error::Protocol(_))));
    let mut rebound = g.gc.clone();
    rebound.circuit_hash = [9; 32];
    assert!(matches!(evaluate(&rebound, &Adder8, &labels), Err(Error::Protocol(_))));
    assert!(matches!(evaluate(&g.gc, &Adder8, &labels[1..]), Err(Error::Protocol(_))));
}

#[test]
fn composed_circuits_decode_to_composition() {
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    for _ in 0..50 {
        let (a, b) = (rng.gen_range(0..256u64), rng.gen_range(0..256u64));
        let delta = Block::random(&mut rng);
        let mut gcore = GarbleCore::new(delta);
        let delta = gcore.delta();
        let za: Vec<Block> = (0..8).map(|_| Block::random(&mut rng)).collect();
        let zb: Vec<Block> = (0..8).map(|_| Block::random(&mut rng)).collect();
        let (mid, t1) = garble_with(&Adder8, &mut gcore, &[za.clone(), zb.clone()], Vec::new());
        let mid_zero: Vec<Block> = mid[0].iter().map(|b| b.wire().unwrap()).collect();
        let (out, t2) = garble_with(&Triple, &mut gcore, &[mid_zero], Vec::new());
        // Only the final stage gets a decode map.
        let map = scanpath_gc::gc::decode_map(&out);

        let act = |z: &[Block], v: u64| -> Vec<Block> {
            z.iter().zip(bits(v, 8)).map(|(&l, x)| if x { l ^ delta } else { l }).collect()
        };
        let mut ecore = EvalCore::new();
        let (m, _) = evaluate_with(&Adder8, &mut ecore, &[act(&za, a), act(&zb, b)], SliceSource::new(&t1)).unwrap();
        let m_labels: Vec<Block> = m[0].iter().map(|b| b.wire().unwrap()).collect();
        let (o, _) = evaluate_with(&Triple, &mut ecore, &[m_labels], SliceSource::new(&t2)).unwrap();
        assert_eq!(value(&decode(&o, &map).unwrap()[0]), (3 * (a + b)) & 0x7ff);
    }
}

#[test]
fn labels_are_consistent_and_evaluator_sees_one_per_wire() {
    let c = record(&Adder8).unwrap();
    let g = garble(&c, &bits(77, 8), seed(7)).unwrap();
    let zero = debug_check_labels(&c, &g).unwrap();
    let mut labels = g.garbler_labels.clone();
    labels.extend(g.evaluator_pairs.iter().map(|p| p.1));
    let (held, assigned) = evaluate_instrumented(&g.gc, &c, &labels).unwrap();
    assert!(assigned.iter().all(|&n| n == 1));
    let plain = {
        let mut vals = vec![false; c.num_wires() as usize];
        let b = bits(255, 8);
        let a = bits(77, 8);
        for (spec, v) in c.input_specs().iter().zip([a, b]) {
            for (&w, x) in spec.wires.iter().zip(v) {
                vals[w as usize] = x;
            }
        }
        for gate in c.gates() {
            use scanpath_gc::boolcirc::Gate;
            match *gate {
                Gate::Xor { a, b, out } => vals[out as usize] = vals[a as usize] ^ vals[b as usize],
                Gate::And { a, b, out } => vals[out as usize] = vals[a as usize] & vals[b as usize],
                Gate::Inv { a, out } => vals[out as usize] = !vals[a as usize],
            }
        }
        vals
    };
    for w in 0..held.len() {
        let expect = if plain[w] { zero[w] ^ g.encoding.delta } else { zero[w] };
        assert_eq!(held[w], expect, "wire {w}");
    }
}

#[test]
fn garbled_aes_matches_plain() {
    let c = Aes128Circuit;
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    for k in 0..20 {
        let key: [u8; 16] = rng.gen();
        let block: [u8; 16] = rng.gen();
        let decls = c.inputs();
        let (kb, bb) = (bytes_to_bits(&key), bytes_to_bits(&block));
        let (g_bits, e_bits) = if decls[0].party == Party::Garbler { (kb, bb) } else { (bb, kb) };
        let plain = eval_plain(&c, &[g_bits.clone(), e_bits.clone()]).unwrap();
        let r = run_local(&c, &g_bits, &e_bits, seed(100 + k)).unwrap();
        assert_eq!(r.outputs, plain);
        assert_eq!(bits_to_bytes(&r.outputs[0]).len(), 16);
    }
}

#[test]
fn ot_delivers_chosen_side() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let pairs: Vec<(Block, Block)> = (0..128).map(|_| (Block::random(&mut rng), Block::random(&mut rng))).collect();
    let choices: Vec<bool> = (0..128).map(|_| rng.gen()).collect();
    let mut s = ChaCha20Rng::seed_from_u64(12);
    let mut r = ChaCha20Rng::seed_from_u64(13);
    let t = ot_transfer(&pairs, &choices, &mut s, &mut r).unwrap();
    for ((p, c), got) in pairs.iter().zip(&choices).zip(&t.received) {
        assert_eq!(*got, if *c { p.1 } else { p.0 });
        assert_ne!(*got, if *c { p.0 } else { p.1 });
    }
    let one = ot_transfer(&pairs[..2], &[false, true], &mut s, &mut r).unwrap();
    assert_eq!(one.received, vec![pairs[0].0, pairs[1].1]);
    assert_eq!(t.receiver_bytes(), 32 * 128);
    assert_eq!(t.sender_bytes(), 32 + 32 * 128);
}

#[test]
fn ot_rejects_malformed_messages() {
    let mut rng = ChaCha20Rng::seed_from_u64(14);
    let pairs = vec![(Block(1), Block(2)); 3];
    assert!(matches!(ot_transfer(&pairs, &[true, false], &mut rng.clone(), &mut rng), Err(Error::Protocol(_))));
    let (sender, hello) = OtSender::new(&mut rng);
    let (_, msg) = OtReceiver::choose(&hello, &[true, false, true], &mut rng).unwrap();
    assert!(matches!(sender.respond(&msg, &pairs[..2]), Err(Error::Protocol(_))));
    let mut bad = msg.clone();
    bad.points[1] = [0xff; 32];
    assert!(matches!(sender.respond(&bad, &pairs), Err(Error::Protocol(_))));
    assert!(matches!(ReceiverChoices::from_bytes(&[0u8; 33]), Err(Error::Protocol(_))));
    assert!(matches!(
        OtReceiver::choose(&SenderHello { s: [0xff; 32] }, &[true], &mut rng),
        Err(Error::Protocol(_))
    ));
    let (receiver, _) = OtReceiver::choose(&hello, &[true, false, true], &mut rng).unwrap();
    let payload = sender.respond(&msg, &pairs).unwrap();
    let mut short = payload.clone();
    short.ciphertexts.pop();
    assert!(matches!(receiver.finish(&short), Err(Error::Protocol(_))));
}

/// 2x2 chi-square test of independence between every bit of the receiver's
/// message (what the sender sees) and the choice bits. Positions whose bit
/// never varies carry no information and are skipped.
#[test]
fn sender_view_is_independent_of_choices() {
    const N: usize = 4000;
    let mut rng = ChaCha20Rng::seed_from_u64(15);
    let choices: Vec<bool> = (0..N).map(|_| rng.gen()).collect();
    let (_, hello) = OtSender::new(&mut rng);
    let (_, msg) = OtReceiver::choose(&hello, &choices, &mut rng).unwrap();
    let bytes = msg.to_bytes();
    let chi = ChiSquared::new(1.0).unwrap();
    let mut tested = 0;
    let mut min_p: f64 = 1.0;
    for pos in 0..256 {
        let mut t = [[0f64; 2]; 2];
        for (i, &c) in choices.iter().enumerate() {
            let bit = (bytes[32 * i + pos / 8] >> (pos % 8)) & 1;
            t[c as usize][bit as usize] += 1.0;
        }
        let col = [t[0][0] + t[1][0], t[0][1] + t[1][1]];
        if col[0] == 0.0 || col[1] == 0.0 {
            continue;
        }
        let row = [t[0][0] + t[0][1], t[1][0] + t[1][1]];
        let mut stat = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                let e = row[r] * col[c] / N as f64;
                stat += (t[r][c] - e).powi(2) / e;
            }
        }
        min_p = min_p.min(1.0 - chi.cdf(stat));
        tested += 1;
    }
    assert!(tested >= 250, "only {tested} varying bit positions");
    // Bonferroni over the tested positions at family level 0.01.
    assert!(min_p > 0.01 / tested as f64, "min p = {min_p}");
}
