mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use treetrans::metrics::*;
use treetrans::pipeline::{pad_to, PaddedTree};
use treetrans::topology::Topology;
use treetrans::tree::BinTree;

fn padded(values: Vec<u32>) -> PaddedTree {
    let n = values.len();
    let hull = Topology::left_chain(n / 2);
    PaddedTree {
        hull,
        values,
        swaps: vec![false; n],
    }
}

#[test]
fn agrees_with_brute_force_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut pooled = Counts::default();
    let (mut hits, mut n, mut ch, mut cn, mut miss) = (0, 0, 0, 0, 0);
    for _ in 0..1000 {
        let (p, t) = random_metric_pair(&mut rng);
        let (h, len, c_hits, c_n, overlap) = oracle_counts(&p.values, &t.values);
        assert_eq!(full_accuracy(&p, &t).unwrap(), h as f64 / len as f64);
        assert_eq!(
            bow_accuracy(&p, &t).unwrap(),
            1.0 - (len - overlap) as f64 / len as f64
        );
        match masked_accuracy(&p, &t) {
            Ok(m) => assert_eq!(m, c_hits as f64 / c_n as f64),
            Err(e) => assert_eq!((e, c_n), (MetricsError::NoContentPositions, 0)),
        }
        pooled.add(&p, &t).unwrap();
        hits += h;
        n += len;
        ch += c_hits;
        cn += c_n;
        miss += len - overlap;
    }
    let r = pooled.report();
    assert_eq!(r.p_f, hits as f64 / n as f64);
    assert_eq!(r.p_m, ch as f64 / cn as f64);
    assert_eq!(r.p_b, 1.0 - miss as f64 / n as f64);
    assert_eq!(r.n_trees, 1000);
}

#[test]
fn worked_values() {
    // positions: INTERNAL, 5, 6, INTERNAL, 7, 8, Y_END
    let truth = padded(vec![0, 5, 0, 6, 7, 8, 1]);
    let pred = padded(vec![0, 5, 0, 7, 6, 8, 1]);
    assert_eq!(full_accuracy(&pred, &truth).unwrap(), 5.0 / 7.0);
    assert_eq!(masked_accuracy(&pred, &truth).unwrap(), 0.5);
    assert_eq!(bow_accuracy(&pred, &truth).unwrap(), 1.0);
    let shifted = padded(vec![0, 5, 0, 5, 9, 8, 1]);
    assert_eq!(bow_accuracy(&shifted, &truth).unwrap(), 1.0 - 2.0 / 7.0);
}

#[test]
fn mismatched_hulls_are_rejected() {
    let a = pad_to(&Topology::leaf(), &BinTree::leaf(4)).unwrap();
    let b = pad_to(
        &Topology::left_chain(1),
        &BinTree::node(BinTree::leaf(4), BinTree::leaf(5)),
    )
    .unwrap();
    assert_eq!(full_accuracy(&a, &b), Err(MetricsError::HullMismatch));
    assert_eq!(
        evaluate([(&a, &b)]).unwrap_err(),
        MetricsError::HullMismatch
    );
}

#[test]
fn averaging_folds() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let reports: Vec<EvalReport> = (0..3)
        .map(|_| {
            let pairs: Vec<_> = (0..20).map(|_| random_metric_pair(&mut rng)).collect();
            evaluate(pairs.iter().map(|(p, t)| (p, t))).unwrap()
        })
        .collect();
    let avg = average_reports(&reports).unwrap();
    let want = reports.iter().map(|r| r.p_f).sum::<f64>() / 3.0;
    assert!((avg.p_f - want).abs() < 1e-15);
    assert_eq!(avg.n_trees, 60);
    assert!(average_reports(&[]).is_none());
}

proptest! {
    #[test]
    fn scores_are_bounded_and_perfect_on_identity(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, t) = random_metric_pair(&mut rng);
        for f in [full_accuracy, bow_accuracy] {
            let v = f(&p, &t).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(f(&t, &t).unwrap(), 1.0);
        }
        // bag-of-words ignores position, so it never scores below full accuracy
        prop_assert!(bow_accuracy(&p, &t).unwrap() >= full_accuracy(&p, &t).unwrap() - 1e-12);
        let mut c = Counts::default();
        c.add(&p, &t).unwrap();
        let mut merged = Counts::default();
        merged.merge(&c);
        merged.merge(&c);
        prop_assert_eq!(merged.report().p_f, c.report().p_f);
        if full_accuracy(&p, &t).unwrap() == 1.0 {
            prop_assert_eq!(bow_accuracy(&p, &t).unwrap(), 1.0);
        }
        // joint relabeling of content ids
        let relabel = |x: &PaddedTree| {
            let mut y = x.clone();
            y.values.iter_mut().filter(|v| is_content(**v)).for_each(|v| *v = 40 - *v);
            y
        };
        let (rp, rt) = (relabel(&p), relabel(&t));
        prop_assert_eq!(full_accuracy(&rp, &rt), full_accuracy(&p, &t));
        prop_assert_eq!(masked_accuracy(&rp, &rt), masked_accuracy(&p, &t));
        prop_assert_eq!(bow_accuracy(&rp, &rt), bow_accuracy(&p, &t));
    }
}
