use log::warn;
use serde::Serialize;
use wildreid::dataio::stratified_holdout;
use wildreid::nn::load_model;
use wildreid::pairverify::{evaluate_pairs, gbdt_fit, make_all_pairs, PairEvaluation};
use wildreid::rng::derive_seed;
use wildreid::{Dataset, PairLayout, SeededRng};

use crate::config::{DataConfig, PairsConfig};
use crate::data::{load, Part};
use crate::error::{CliError, ExitCode, Stage};
use crate::report::{hash_file, OutDir};
use crate::{Common, Resolved};

#[derive(Serialize)]
struct PairsResult {
    layout: PairLayout,
    n_features: usize,
    n_train_samples: usize,
    n_test_samples: usize,
    n_train_pairs: usize,
    n_test_pairs: usize,
    train: PairEvaluation,
    test: PairEvaluation,
    loss_history: Vec<f64>,
}

fn shuffled(mut data: Dataset, rng: &mut SeededRng) -> Dataset {
    rng.shuffle(&mut data.labels);
    data
}

pub fn run(common: &Common, seed: u64, data_cfg: &DataConfig, cfg: &PairsConfig) -> Result<(), CliError> {
    let mut out = OutDir::create(&common.out)?;
    let (mut train, mut test) = if data_cfg.split.is_some() {
        (load(data_cfg, Part::Train, &mut out)?, load(data_cfg, Part::Test, &mut out)?)
    } else {
        let all = load(data_cfg, Part::All, &mut out)?;
        let (tr, te) = stratified_holdout(&all.labels, cfg.test_fraction, seed).stage(ExitCode::Pairing)?;
        (all.subset(&tr), all.subset(&te))
    };
    if cfg.shuffle_labels {
        let mut rng = SeededRng::new(derive_seed(seed, &[7]));
        train = shuffled(train, &mut rng);
        test = shuffled(test, &mut rng);
    }
    if let Some(path) = &cfg.model {
        out.input("model", hash_file(path, ExitCode::Ingestion)?);
        let model = load_model(path).stage(ExitCode::Ingestion)?;
        train.x = model.embed(&train.x).stage(ExitCode::Pairing)?;
        test.x = model.embed(&test.x).stage(ExitCode::Pairing)?;
    }
    for (name, d) in [("training", &train), ("test", &test)] {
        if d.len() < 2 {
            return Err(CliError::new(
                ExitCode::Pairing,
                format!("{name} side has {} samples; pairing needs at least 2", d.len()),
            ));
        }
    }

    let train_pairs = make_all_pairs(&train.x, &train.labels, cfg.layout).stage(ExitCode::Pairing)?;
    let test_pairs = make_all_pairs(&test.x, &test.labels, cfg.layout).stage(ExitCode::Pairing)?;
    let rate = test_pairs.positive_rate();
    if rate == 0.0 || rate == 1.0 {
        warn!("every test pair has the same label; accuracy will equal the majority baseline or its complement");
    }
    let fit = gbdt_fit(&train_pairs.features, &train_pairs.labels, &cfg.gbdt).stage(ExitCode::Pairing)?;
    let train_eval = evaluate_pairs(&fit.model, &train_pairs, cfg.threshold).stage(ExitCode::Pairing)?;
    let test_eval = evaluate_pairs(&fit.model, &test_pairs, cfg.threshold).stage(ExitCode::Pairing)?;
    let model_json = fit.model.to_json();
    out.write("gbdt_model.json", model_json.as_bytes())?;

    println!(
        "{} test pairs: accuracy {:.4} vs majority baseline {:.4}",
        test_eval.n_pairs, test_eval.accuracy, test_eval.majority_baseline
    );
    let result = PairsResult {
        layout: cfg.layout,
        n_features: train_pairs.features.cols(),
        n_train_samples: train.len(),
        n_test_samples: test.len(),
        n_train_pairs: train_pairs.len(),
        n_test_pairs: test_pairs.len(),
        train: train_eval,
        test: test_eval,
        loss_history: fit.loss_history,
    };
    out.finish(
        "pairs",
        seed,
        &Resolved {
            data: Some(data_cfg),
            settings: cfg,
        },
        &result,
    )?;
    Ok(())
}
