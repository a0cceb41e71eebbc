use std::f64::consts::PI;

use proptest::prelude::*;
use scanpath_gc::scanpath::*;
use scanpath_gc::Error;

fn sp(points: &[(f64, f64)]) -> Scanpath {
    Scanpath::new(points.iter().map(|&(x, y)| Fixation { x, y, duration_ms: 200.0 }).collect()).unwrap()
}

#[test]
fn symbolize_examples() {
    assert_eq!(symbolize(&sp(&[(0.0, 0.0)]), 9, 1).unwrap().symbols, vec![0]);
    assert_eq!(symbolize(&sp(&[(0.999, 0.999)]), 9, 1).unwrap().symbols, vec![80]);
    let c = |k: f64| (k + 0.5) / 9.0;
    let s = symbolize(&sp(&[(c(0.0), c(0.0)), (c(4.0), c(4.0)), (c(8.0), c(8.0))]), 9, 1).unwrap();
    assert_eq!(s.symbols, vec![0, 40, 80]);
    assert!(matches!(Scanpath::new(vec![]), Err(Error::InvalidInput(_))));
}

#[test]
fn symbolize_duration_bins() {
    let f = |d| Fixation { x: 0.5, y: 0.0, duration_ms: d };
    let s = Scanpath::new(vec![f(0.0), f(499.0), f(500.0), f(5000.0)]).unwrap();
    // Cell (row 0, col 4) with two bins over [0, 1000 ms].
    assert_eq!(symbolize(&s, 9, 2).unwrap().symbols, vec![8, 8, 9, 9]);
}

#[test]
fn saccade_examples() {
    let s = extract_saccades(&sp(&[(0.0, 0.0), (1.0, 0.0)])).unwrap();
    let a = s.saccades()[0];
    assert_eq!((a.dx, a.dy, a.amp, a.theta), (1.0, 0.0, 1.0, 0.0));
    let s = extract_saccades(&sp(&[(0.0, 0.0), (0.0, 1.0)])).unwrap();
    assert!((s.saccades()[0].theta - PI / 2.0).abs() < 1e-12);
    let s = extract_saccades(&sp(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)])).unwrap();
    assert_eq!(s.saccades()[0].turn, 0.0);
    assert!((s.saccades()[1].turn - PI / 2.0).abs() < 1e-12);
    assert!(matches!(extract_saccades(&sp(&[(0.2, 0.2)])), Err(Error::InvalidInput(_))));
}

#[test]
fn saccade_duration_is_destination_duration() {
    let f = |x, d| Fixation { x, y: 0.5, duration_ms: d };
    let s = extract_saccades(&Scanpath::new(vec![f(0.1, 100.0), f(0.5, 250.0)]).unwrap()).unwrap();
    assert_eq!(s.saccades()[0].duration_ms, 250.0);
}

#[test]
fn simplify_examples() {
    let s = extract_saccades(&sp(&[(0.0, 0.5), (0.3, 0.2), (0.6, 0.9), (0.9, 0.1)])).unwrap();
    assert_eq!(simplify(&s, 0.0, 0.0), s);
    let collinear = SaccadeSequence::new(vec![
        Saccade::between((0.0, 0.0), (1.0, 0.0), 100.0),
        Saccade::between((1.0, 0.0), (2.0, 0.0), 100.0),
    ])
    .unwrap();
    let merged = simplify(&collinear, 0.0, 0.1);
    assert_eq!(merged.len(), 1);
    let m = merged.saccades()[0];
    assert_eq!((m.dx, m.dy), (2.0, 0.0));
    let single = extract_saccades(&sp(&[(0.1, 0.1), (0.2, 0.8)])).unwrap();
    assert_eq!(simplify(&single, 0.5, 1.0), single);
}

#[test]
fn ngram_examples() {
    let seq = SymbolSequence::new(vec![0, 0, 0], 9, 1).unwrap();
    let f = ngram_frequencies(&seq, 5, 2).unwrap();
    assert_eq!(f.dim(), 25);
    assert_eq!(f.entries[0], 1.0);
    let seq = SymbolSequence::new(vec![0, 1, 0, 1], 9, 1).unwrap();
    let f = ngram_frequencies(&seq, 2, 2).unwrap();
    assert!((f.entries[1] - 2.0 / 3.0).abs() < 1e-12);
    assert!((f.entries[2] - 1.0 / 3.0).abs() < 1e-12);
    let short = SymbolSequence::new(vec![3], 9, 1).unwrap();
    assert!(matches!(ngram_frequencies(&short, 5, 2), Err(Error::InvalidInput(_))));
}

#[test]
fn csv_parsing() {
    let text = "t_ms,x,y,dur_ms\n0,0.1,0.2,150\n150,0.5,0.5,300\n";
    let s = Scanpath::from_csv(text.as_bytes()).unwrap();
    assert_eq!(s.len(), 2);
    assert_eq!(s.fixations()[1], Fixation { x: 0.5, y: 0.5, duration_ms: 300.0 });
    assert!(Scanpath::from_csv("a,b\n1,2\n".as_bytes()).is_err());
    assert!(Scanpath::from_csv("t_ms,x,y,dur_ms\n0,zz,0.2,1\n".as_bytes()).is_err());
    assert!(Scanpath::from_csv("t_ms,x,y,dur_ms\n0,1.5,0.2,1\n".as_bytes()).is_err());
}

fn points() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((0.0..=1.0f64, 0.0..=1.0f64, 0.0..1500.0f64), 2..40)
}

fn scanpath(p: &[(f64, f64, f64)]) -> Scanpath {
    Scanpath::new(p.iter().map(|&(x, y, d)| Fixation { x, y, duration_ms: d }).collect()).unwrap()
}

proptest! {
    #[test]
    fn symbolize_is_pure_and_in_range(p in points(), g in 1u32..12, b in 1u32..4) {
        let s = scanpath(&p);
        let a = symbolize(&s, g, b).unwrap();
        prop_assert_eq!(&a, &symbolize(&s, g, b).unwrap());
        prop_assert!(a.symbols.iter().all(|&x| x < g * g * b));
    }

    #[test]
    fn saccade_invariants(p in points()) {
        let ss = extract_saccades(&scanpath(&p)).unwrap();
        let simple = simplify(&ss, DEFAULT_AMP_THRESHOLD, DEFAULT_DIR_THRESHOLD);
        for seq in [&ss, &simple] {
            for s in seq.saccades() {
                prop_assert!((s.amp - (s.dx * s.dx + s.dy * s.dy).sqrt()).abs() < 1e-9);
                prop_assert!(s.theta.abs() <= PI && s.turn.abs() <= PI);
            }
        }
        prop_assert!(simple.len() <= ss.len());
        prop_assert_eq!(&simplify(&simple, DEFAULT_AMP_THRESHOLD, DEFAULT_DIR_THRESHOLD), &simple);
    }

    #[test]
    fn ngram_sums_to_one(sym in prop::collection::vec(0u32..81, 3..60), a in 2u32..12, n in 1u32..4) {
        let seq = SymbolSequence::new(sym, 9, 1).unwrap();
        let f = ngram_frequencies(&seq, a, n).unwrap();
        prop_assert_eq!(f.dim(), (a as usize).pow(n));
        prop_assert!((f.entries.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn wrap_angle_range(x in -50.0..50.0f64) {
        let w = wrap_angle(x);
        prop_assert!((-PI..=PI).contains(&w));
        let k = ((x - w) / (2.0 * PI)).round();
        prop_assert!((x - w - k * 2.0 * PI).abs() < 1e-9);
    }
}
