use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use wildreid::math::{matmul, pairwise_sq_euclidean, Matrix};
use wildreid::nn::{init_model, BackwardTarget, Head};
use wildreid::pairverify::{gbdt_fit, make_all_pairs, GbdtConfig, PairLayout};
use wildreid::synth::{gaussian_clusters, ClusterConfig};
use wildreid::training::mine_semi_hard;
use wildreid::{map_at_r, Averaging, EmbeddingSet, SeededRng};

fn random(rng: &mut SeededRng, r: usize, c: usize) -> Matrix {
    Matrix::new(r, c, rng.normals(r * c)).unwrap()
}

fn bench_matmul(c: &mut Criterion) {
    let mut rng = SeededRng::new(0);
    let mut group = c.benchmark_group("matmul");
    for n in [32, 128, 256] {
        let (a, b) = (random(&mut rng, n, n), random(&mut rng, n, n));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter(|| matmul(black_box(&a), black_box(&b)).unwrap())
        });
    }
    group.finish();
}

fn bench_mlp(c: &mut Criterion) {
    let mut rng = SeededRng::new(1);
    let model = init_model(&[4096, 64, 3], Head::Classifier, &mut rng).unwrap();
    let x = random(&mut rng, 32, 4096);
    let labels: Vec<usize> = (0..32).map(|i| i % 3).collect();
    c.bench_function("mlp forward+backward 32x4096", |b| {
        b.iter(|| {
            let acts = model.forward(black_box(&x)).unwrap();
            model.backward(&acts, BackwardTarget::Labels(&labels)).unwrap()
        })
    });
}

fn bench_map_at_r(c: &mut Criterion) {
    let mut rng = SeededRng::new(2);
    let mut group = c.benchmark_group("map_at_r");
    for n in [200, 1000] {
        let labels: Vec<usize> = (0..n).map(|i| i % 10).collect();
        let emb = EmbeddingSet::new(random(&mut rng, n, 32), labels).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| map_at_r(black_box(&emb), Averaging::PerClass).unwrap())
        });
    }
    group.finish();
}

fn bench_mining(c: &mut Criterion) {
    let mut rng = SeededRng::new(3);
    let x = random(&mut rng, 32, 16);
    let dist = pairwise_sq_euclidean(&x, &x).unwrap();
    let labels: Vec<usize> = (0..32).map(|i| i / 4).collect();
    c.bench_function("semi-hard mining 8x4", |b| {
        b.iter(|| mine_semi_hard(black_box(&dist), &labels).unwrap())
    });
}

fn bench_gbdt(c: &mut Criterion) {
    let data = gaussian_clusters(
        &ClusterConfig {
            n_classes: 6,
            n_per_class: 10,
            dim: 8,
            spread: 0.3,
        },
        4,
    )
    .unwrap();
    let pairs = make_all_pairs(&data.x, &data.labels, PairLayout::Full).unwrap();
    let cfg = GbdtConfig {
        n_rounds: 20,
        ..GbdtConfig::default()
    };
    c.bench_function("gbdt 20 rounds on 1770 pairs", |b| {
        b.iter(|| gbdt_fit(black_box(&pairs.features), &pairs.labels, &cfg).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_matmul, bench_mlp, bench_map_at_r, bench_mining, bench_gbdt
}
criterion_main!(benches);
