use wildreid::dataio::{load_features_csv, write_features_csv};
use wildreid::math::Matrix;
use wildreid::metrics::{map_at_r, Averaging, MetricsReport};
use wildreid::nn::{embed, init_model, load_model, model_from_json, model_to_json, save_model, Head};
use wildreid::pairverify::{gbdt_fit, GbdtConfig, GbdtModel};
use wildreid::rng::SeededRng;
use wildreid::Dataset;

#[test]
fn models_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = SeededRng::new(10);
    for trial in 0..10 {
        let depth = 1 + rng.below(3);
        let dims: Vec<usize> = (0..=depth).map(|_| 2 + rng.below(20)).collect();
        let head = match trial % 3 {
            0 => Head::Classifier,
            1 => Head::Embedder { l2norm: false },
            _ => Head::Embedder { l2norm: true },
        };
        let mut model = init_model(&dims, head, &mut rng).unwrap();
        for p in model.params_mut() {
            let n = p.bias.data().len();
            p.bias.data_mut().copy_from_slice(&rng.normals(n));
        }
        let path = dir.path().join(format!("m{trial}.json"));
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, model);
        let x = Matrix::new(7, dims[0], rng.normals(7 * dims[0])).unwrap();
        let labels = vec![0; 7];
        if depth > 1 || head != Head::Classifier {
            let a = embed(&model, &x, &labels).unwrap();
            let b = embed(&back, &x, &labels).unwrap();
            for (u, v) in a.vectors.data().iter().zip(b.vectors.data()) {
                assert!((u - v).abs() <= 1e-15);
            }
        }
        assert_eq!(model_to_json(&back), model_to_json(&model));
    }
}

#[test]
fn malformed_model_files_are_rejected() {
    let model = init_model(&[3, 4, 2], Head::Classifier, &mut SeededRng::new(0)).unwrap();
    let text = model_to_json(&model);
    assert!(model_from_json(&text.replace("\"format_version\":1", "\"format_version\":9")).is_err());
    assert!(model_from_json(&text.replace("\"head\":", "\"extra\":0,\"head\":")).is_err());
    assert!(model_from_json("{}").is_err());
}

#[test]
fn gbdt_round_trips() {
    let mut rng = SeededRng::new(1);
    let x = Matrix::new(80, 2, rng.normals(160)).unwrap();
    let y: Vec<u8> = (0..80).map(|i| u8::from(x.get(i, 0) > 0.2)).collect();
    let model = gbdt_fit(&x, &y, &GbdtConfig::default()).unwrap().model;
    let back = GbdtModel::from_json(&model.to_json()).unwrap();
    assert_eq!(back, model);
}

#[test]
fn feature_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.csv");
    let mut rng = SeededRng::new(2);
    let data = Dataset::new(Matrix::new(6, 3, rng.normals(18)).unwrap(), vec![0, 1, 2, 0, 1, 2]).unwrap();
    write_features_csv(&path, &data).unwrap();
    assert_eq!(load_features_csv(&path).unwrap(), data);
}

#[test]
fn metrics_report_round_trips() {
    let mut rng = SeededRng::new(3);
    let emb = wildreid::EmbeddingSet::new(
        Matrix::new(20, 4, rng.normals(80)).unwrap(),
        (0..20).map(|i| i % 4).collect(),
    )
    .unwrap();
    let report = map_at_r(&emb, Averaging::PerClass).unwrap();
    let back: MetricsReport = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
    assert_eq!(back, report);
}
