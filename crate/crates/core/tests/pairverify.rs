use proptest::prelude::*;
use wildreid::math::Matrix;
use wildreid::pairverify::{
    evaluate_predictions, gbdt_fit, gbdt_predict, make_all_pairs, pair_row, GbdtConfig, PairLayout,
};
use wildreid::rng::SeededRng;

fn random_rows(rng: &mut SeededRng, n: usize, d: usize) -> Matrix {
    Matrix::new(n, d, rng.normals(n * d)).unwrap()
}

#[test]
fn same_pair_fraction_matches_counting_formula() {
    // 10 equal classes of 6: C(6,2)·10 same pairs out of C(60,2).
    let labels: Vec<usize> = (0..60).map(|i| i % 10).collect();
    let mut rng = SeededRng::new(1);
    let pairs = make_all_pairs(&random_rows(&mut rng, 60, 2), &labels, PairLayout::Absdiff).unwrap();
    let same = pairs.labels.iter().filter(|&&l| l == 1).count();
    assert_eq!(same, 15 * 10);
    assert_eq!(pairs.len(), 1770);
    let eval = evaluate_predictions(&vec![0.0; pairs.len()], &pairs.labels, 0.5).unwrap();
    assert!((eval.majority_baseline - (1770.0 - 150.0) / 1770.0).abs() < 1e-15);
    assert_eq!(eval.accuracy, eval.majority_baseline);
}

#[test]
fn layouts_have_expected_widths() {
    let mut rng = SeededRng::new(2);
    let x = random_rows(&mut rng, 5, 3);
    for (layout, width) in [(PairLayout::Full, 9), (PairLayout::Concat, 6), (PairLayout::Absdiff, 3)] {
        let p = make_all_pairs(&x, &[0, 1, 0, 1, 2], layout).unwrap();
        assert_eq!(p.features.cols(), width);
        for (row, &(i, j)) in p.features.row_iter().zip(&p.pair_index) {
            assert_eq!(row, pair_row(x.row(i), x.row(j), layout).as_slice());
        }
    }
}

#[test]
fn overfits_any_consistent_labelling() {
    let mut rng = SeededRng::new(3);
    let x = random_rows(&mut rng, 120, 3);
    let y: Vec<u8> = (0..120).map(|_| u8::from(rng.bernoulli(0.4))).collect();
    let cfg = GbdtConfig {
        n_rounds: 300,
        max_leaves: 1024,
        min_samples_leaf: 1,
        learning_rate: 0.5,
        ..GbdtConfig::default()
    };
    let fit = gbdt_fit(&x, &y, &cfg).unwrap();
    let eval = evaluate_predictions(&gbdt_predict(&fit.model, &x).unwrap(), &y, 0.5).unwrap();
    assert_eq!(eval.accuracy, 1.0);
}

#[test]
fn tree_nodes_stay_in_range() {
    let mut rng = SeededRng::new(4);
    let x = random_rows(&mut rng, 200, 4);
    let y: Vec<u8> = (0..200).map(|i| u8::from(x.get(i, 1) + x.get(i, 3) > 0.3)).collect();
    let cfg = GbdtConfig {
        max_depth: Some(3),
        n_rounds: 20,
        ..GbdtConfig::default()
    };
    let fit = gbdt_fit(&x, &y, &cfg).unwrap();
    for t in &fit.model.trees {
        assert!(t.depth() <= 3);
        assert!(t.n_leaves() <= cfg.max_leaves);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn training_loss_never_increases(seed in any::<u64>(), n in 30usize..120, d in 1usize..5) {
        let mut rng = SeededRng::new(seed);
        let x = random_rows(&mut rng, n, d);
        let y: Vec<u8> = (0..n).map(|i| u8::from(x.get(i, 0) + 0.5 * rng.next_normal() > 0.0)).collect();
        prop_assume!(y.contains(&0) && y.contains(&1));
        let cfg = GbdtConfig { n_rounds: 25, min_samples_leaf: 3, ..GbdtConfig::default() };
        let fit = gbdt_fit(&x, &y, &cfg).unwrap();
        prop_assert_eq!(fit.loss_history.len(), 26);
        for w in fit.loss_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn swapping_a_pair_only_swaps_blocks(seed in any::<u64>(), d in 1usize..8) {
        let mut rng = SeededRng::new(seed);
        let a = rng.normals(d);
        let b = rng.normals(d);
        let ab = pair_row(&a, &b, PairLayout::Full);
        let ba = pair_row(&b, &a, PairLayout::Full);
        prop_assert_eq!(&ab[..d], &ba[d..2 * d]);
        prop_assert_eq!(&ab[d..2 * d], &ba[..d]);
        prop_assert_eq!(&ab[2 * d..], &ba[2 * d..]);
    }

    #[test]
    fn accuracy_matches_loop_oracle(seed in any::<u64>(), n in 1usize..60, threshold in 0.05f64..0.95) {
        let mut rng = SeededRng::new(seed);
        let probs: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
        let y: Vec<u8> = (0..n).map(|_| u8::from(rng.bernoulli(0.3))).collect();
        let mut hits = 0usize;
        let mut ones = 0usize;
        for k in 0..n {
            let predicted = if probs[k] >= threshold { 1 } else { 0 };
            if predicted == y[k] {
                hits += 1;
            }
            if y[k] == 1 {
                ones += 1;
            }
        }
        let e = evaluate_predictions(&probs, &y, threshold).unwrap();
        prop_assert_eq!(e.accuracy, hits as f64 / n as f64);
        prop_assert_eq!(e.majority_baseline, ones.max(n - ones) as f64 / n as f64);
        let c = e.confusion;
        prop_assert_eq!(c.true_positive + c.false_positive + c.true_negative + c.false_negative, n);
    }
}
