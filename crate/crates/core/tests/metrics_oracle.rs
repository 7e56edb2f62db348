use std::collections::BTreeMap;

use proptest::prelude::*;
use wildreid::math::Matrix;
use wildreid::metrics::{
    classification_accuracy, map_at_r, precision_at_1, r_precision, random_baseline_map_at_r, Averaging,
};
use wildreid::nn::EmbeddingSet;
use wildreid::rng::SeededRng;
use wildreid::Dataset;

struct Oracle {
    map_per_class: f64,
    map_global: f64,
    rp_per_class: f64,
    rp_global: f64,
    p1_per_class: f64,
    p1_global: f64,
    skipped: usize,
}

/// Ranks come from pairwise comparison counts rather than a sort, so this
/// shares no ranking code with the library.
fn oracle(x: &[Vec<f64>], labels: &[usize]) -> Oracle {
    let n = x.len();
    let dist = |a: usize, b: usize| -> f64 { x[a].iter().zip(&x[b]).map(|(u, v)| (u - v) * (u - v)).sum() };
    let mut per_class: BTreeMap<usize, Vec<(f64, f64, f64)>> = BTreeMap::new();
    let mut all = Vec::new();
    let mut skipped = 0;
    for q in 0..n {
        let r = (0..n).filter(|&j| j != q && labels[j] == labels[q]).count();
        if r == 0 {
            skipped += 1;
            continue;
        }
        let d: Vec<f64> = (0..n).map(|j| dist(q, j)).collect();
        let rank = |j: usize| -> usize {
            1 + (0..n)
                .filter(|&k| k != q && k != j && (d[k] < d[j] || (d[k] == d[j] && k < j)))
                .count()
        };
        let mut relevant_ranks: Vec<usize> =
            (0..n).filter(|&j| j != q && labels[j] == labels[q]).map(rank).collect();
        relevant_ranks.sort_unstable();
        let mut ap = 0.0;
        for (hits_so_far, &rk) in relevant_ranks.iter().enumerate() {
            if rk <= r {
                ap += (hits_so_far + 1) as f64 / rk as f64;
            }
        }
        ap /= r as f64;
        let rp = relevant_ranks.iter().filter(|&&rk| rk <= r).count() as f64 / r as f64;
        let p1 = if relevant_ranks[0] == 1 { 1.0 } else { 0.0 };
        per_class.entry(labels[q]).or_default().push((ap, rp, p1));
        all.push((ap, rp, p1));
    }
    let mean = |v: &[(f64, f64, f64)], f: fn(&(f64, f64, f64)) -> f64| v.iter().map(f).sum::<f64>() / v.len() as f64;
    let class_mean = |f: fn(&(f64, f64, f64)) -> f64| {
        per_class.values().map(|v| mean(v, f)).sum::<f64>() / per_class.len() as f64
    };
    Oracle {
        map_per_class: class_mean(|t| t.0),
        map_global: mean(&all, |t| t.0),
        rp_per_class: class_mean(|t| t.1),
        rp_global: mean(&all, |t| t.1),
        p1_per_class: class_mean(|t| t.2),
        p1_global: mean(&all, |t| t.2),
        skipped,
    }
}

fn emb_from(x: &[Vec<f64>], labels: &[usize]) -> EmbeddingSet {
    let d = x[0].len();
    EmbeddingSet::new(Matrix::new(x.len(), d, x.concat()).unwrap(), labels.to_vec()).unwrap()
}

/// Random set with at least one non-singleton class; `quantised` sets draw
/// small integer coordinates so distance ties are common.
fn random_set(rng: &mut SeededRng, quantised: bool) -> (Vec<Vec<f64>>, Vec<usize>) {
    let n = 2 + rng.below(199);
    let d = 1 + rng.below(32);
    let classes = 2 + rng.below(9);
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..d)
                .map(|_| if quantised { rng.below(3) as f64 } else { rng.next_normal() })
                .collect()
        })
        .collect();
    let mut labels: Vec<usize> = (0..n).map(|_| rng.below(classes)).collect();
    labels[1] = labels[0];
    (x, labels)
}

const TOL: f64 = 1e-12;

#[test]
fn library_matches_brute_force_oracle() {
    let mut rng = SeededRng::new(31337);
    for trial in 0..50 {
        let (x, labels) = random_set(&mut rng, trial % 3 == 0);
        let o = oracle(&x, &labels);
        let emb = emb_from(&x, &labels);
        let pc = map_at_r(&emb, Averaging::PerClass).unwrap();
        let gl = map_at_r(&emb, Averaging::Global).unwrap();
        assert!((pc.map_at_r - o.map_per_class).abs() < TOL, "trial {trial}");
        assert!((gl.map_at_r - o.map_global).abs() < TOL, "trial {trial}");
        assert!((pc.r_precision - o.rp_per_class).abs() < TOL);
        assert!((gl.r_precision - o.rp_global).abs() < TOL);
        assert!((pc.precision_at_1 - o.p1_per_class).abs() < TOL);
        assert!((gl.precision_at_1 - o.p1_global).abs() < TOL);
        assert!((r_precision(&emb).unwrap() - o.rp_global).abs() < TOL);
        assert!((precision_at_1(&emb).unwrap() - o.p1_global).abs() < TOL);
        assert_eq!(pc.n_queries_skipped, o.skipped);
        assert_eq!(pc.n_queries_evaluated + pc.n_queries_skipped, labels.len());
    }
}

#[test]
fn four_points_on_a_line() {
    let x = vec![vec![0.0], vec![1.0], vec![2.0], vec![10.0]];
    let labels = [0, 0, 1, 1];
    let o = oracle(&x, &labels);
    let r = map_at_r(&emb_from(&x, &labels), Averaging::PerClass).unwrap();
    assert!((r.map_at_r - o.map_per_class).abs() < TOL);
    assert!((r.map_at_r - 0.75).abs() < TOL);
}

#[test]
fn singleton_classes_are_skipped() {
    let x = vec![vec![0.0], vec![0.1], vec![5.0], vec![9.0]];
    let r = map_at_r(&emb_from(&x, &[0, 0, 1, 2]), Averaging::PerClass).unwrap();
    assert_eq!((r.n_queries_evaluated, r.n_queries_skipped), (2, 2));
    assert_eq!(r.map_at_r, 1.0);
    assert!(r.per_class.keys().eq([0].iter()));
}

#[test]
fn perfect_clusters_score_one() {
    let x = vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![9.0, 9.0], vec![9.0, 9.0], vec![9.0, 9.0]];
    let r = map_at_r(&emb_from(&x, &[0, 0, 1, 1, 1]), Averaging::Global).unwrap();
    assert_eq!((r.map_at_r, r.r_precision, r.precision_at_1), (1.0, 1.0, 1.0));
}

#[test]
fn symmetric_classes_make_averaging_modes_agree() {
    // Two mirrored classes of equal size give identical per-query APs.
    let x = vec![vec![0.0], vec![1.0], vec![3.0], vec![-10.0], vec![-11.0], vec![-13.0]];
    let labels = [0, 0, 0, 1, 1, 1];
    let emb = emb_from(&x, &labels);
    let pc = map_at_r(&emb, Averaging::PerClass).unwrap();
    let gl = map_at_r(&emb, Averaging::Global).unwrap();
    assert!((pc.map_at_r - gl.map_at_r).abs() < TOL);
}

/// Expected AP@R of a uniformly random ranking of `m` references of which
/// `r` are relevant.
fn random_ranking_ap(m: usize, r: usize) -> f64 {
    let (m, rf) = (m as f64, r as f64);
    (1..=r)
        .map(|i| {
            let i = i as f64;
            (rf / m) * (1.0 + (i - 1.0) * (rf - 1.0) / (m - 1.0)) / i
        })
        .sum::<f64>()
        / rf
}

#[test]
fn random_labels_on_gaussian_data_score_at_chance() {
    let mut rng = SeededRng::new(8);
    let n = 400;
    let x: Vec<Vec<f64>> = (0..n).map(|_| rng.normals(8)).collect();
    let labels: Vec<usize> = (0..n).map(|_| rng.below(2)).collect();
    let r = map_at_r(&emb_from(&x, &labels), Averaging::Global).unwrap();
    let ones = labels.iter().filter(|&&l| l == 1).count();
    let expected_ap = labels
        .iter()
        .map(|&l| {
            let same = if l == 1 { ones } else { n - ones };
            random_ranking_ap(n - 1, same - 1)
        })
        .sum::<f64>()
        / n as f64;
    // MAP@R under a random ranking is close to prior², R-precision to the prior.
    assert!((r.map_at_r - expected_ap).abs() < 0.03, "{} vs {expected_ap}", r.map_at_r);
    assert!((r.r_precision - 0.5).abs() < 0.1, "{}", r.r_precision);
}

#[test]
fn identical_duplicates_score_one_even_untrained() {
    let mut rng = SeededRng::new(12);
    let centres: Vec<Vec<f64>> = (0..5).map(|_| rng.normals(6)).collect();
    let x: Vec<f64> = (0..40).flat_map(|i| centres[i % 5].clone()).collect();
    let labels: Vec<usize> = (0..40).map(|i| i % 5).collect();
    let data = Dataset::new(Matrix::new(40, 6, x).unwrap(), labels).unwrap();
    let summary = random_baseline_map_at_r(&data, &[64], 3, 1, Averaging::PerClass).unwrap();
    assert_eq!(summary.min, 1.0);
}

#[test]
fn accuracy_matches_loop_oracle() {
    let mut rng = SeededRng::new(13);
    for _ in 0..20 {
        let (n, c) = (1 + rng.below(30), 1 + rng.below(6));
        let probs = Matrix::new(n, c, (0..n * c).map(|_| rng.below(4) as f64).collect()).unwrap();
        let labels: Vec<usize> = (0..n).map(|_| rng.below(c)).collect();
        let mut hits = 0;
        for (i, &label) in labels.iter().enumerate() {
            let row = probs.row(i);
            let mut best = 0;
            for j in 1..c {
                if row[j] > row[best] {
                    best = j;
                }
            }
            hits += usize::from(best == label);
        }
        assert_eq!(classification_accuracy(&probs, &labels).unwrap(), hits as f64 / n as f64);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn metrics_are_permutation_invariant(seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed);
        let (x, labels) = random_set(&mut rng, seed % 2 == 0);
        let perm = rng.permutation(x.len());
        let px: Vec<Vec<f64>> = perm.iter().map(|&i| x[i].clone()).collect();
        let pl: Vec<usize> = perm.iter().map(|&i| labels[i]).collect();
        for avg in [Averaging::PerClass, Averaging::Global] {
            let a = map_at_r(&emb_from(&x, &labels), avg).unwrap();
            let b = map_at_r(&emb_from(&px, &pl), avg).unwrap();
            // Exact ties may reorder under a permutation, so only continuous
            // data is compared exactly.
            if seed % 2 == 1 {
                prop_assert!((a.map_at_r - b.map_at_r).abs() < TOL);
                prop_assert!((a.r_precision - b.r_precision).abs() < TOL);
                prop_assert!((a.precision_at_1 - b.precision_at_1).abs() < TOL);
            }
            prop_assert_eq!(a.n_queries_skipped, b.n_queries_skipped);
        }
    }

    #[test]
    fn metrics_are_scale_invariant(seed in any::<u64>(), exp in -4i32..5) {
        let mut rng = SeededRng::new(seed);
        let (x, labels) = random_set(&mut rng, false);
        let c = 2f64.powi(exp);
        let sx: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|v| v * c).collect()).collect();
        let a = map_at_r(&emb_from(&x, &labels), Averaging::PerClass).unwrap();
        let b = map_at_r(&emb_from(&sx, &labels), Averaging::PerClass).unwrap();
        prop_assert_eq!(a.map_at_r, b.map_at_r);
        prop_assert_eq!(a.r_precision, b.r_precision);
        prop_assert_eq!(a.precision_at_1, b.precision_at_1);
    }

    #[test]
    fn r_precision_bounds_map_at_r(seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed);
        let (x, labels) = random_set(&mut rng, seed % 2 == 0);
        let r = map_at_r(&emb_from(&x, &labels), Averaging::Global).unwrap();
        prop_assert!(r.map_at_r <= r.r_precision + 1e-15);
        prop_assert!((0.0..=1.0).contains(&r.map_at_r));
    }
}
