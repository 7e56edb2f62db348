use log::info;
use serde::Serialize;
use wildreid::dataio::{training_indices, AugmentConfig};
use wildreid::nn::{init_model, model_to_json, Head};
use wildreid::rng::derive_seed;
use wildreid::training::{
    grid_search, kfold_accuracy, train_classifier, train_triplet, GridCell, GridSearchReport, History, KFoldReport,
    TripletHistory,
};
use wildreid::{SeededRng, TrainConfig};

use crate::config::{DataConfig, TrainMlpConfig, TrainTripletConfig};
use crate::data::{load, Part};
use crate::error::{CliError, ExitCode, Stage};
use crate::report::OutDir;
use crate::{Common, Resolved};

#[derive(Serialize)]
struct MlpResult {
    dims: Vec<usize>,
    n_samples: usize,
    /// Output unit → original class id.
    class_ids: Vec<usize>,
    grid: GridSearchReport,
    best_cell: GridCell,
    cross_validation: KFoldReport,
    final_history: History,
}

pub fn run_mlp(common: &Common, seed: u64, data_cfg: &DataConfig, cfg: &TrainMlpConfig) -> Result<(), CliError> {
    let mut out = OutDir::create(&common.out)?;
    let mut data = load(data_cfg, Part::Train, &mut out)?;
    let class_ids = data.relabel_contiguous();
    if class_ids.len() < 2 {
        return Err(CliError::new(
            ExitCode::Training,
            format!("classifier training needs at least 2 classes, found {}", class_ids.len()),
        ));
    }
    let mut dims = vec![data.dim()];
    dims.extend_from_slice(&cfg.hidden);
    dims.push(class_ids.len());
    let factory = |s: u64| init_model(&dims, Head::Classifier, &mut SeededRng::new(s));
    let base = TrainConfig {
        max_epochs: cfg.max_epochs,
        patience: cfg.patience,
        seed,
        ..TrainConfig::default()
    };

    let grid = grid_search(&factory, &data, &cfg.grid, cfg.k, seed, &base).stage(ExitCode::Training)?;
    let best = grid.best().cell;
    info!("best cell: lr {} with {} batches", best.lr, best.n_batches);
    let tuned = TrainConfig {
        lr: best.lr,
        n_batches: best.n_batches,
        ..base
    };
    let cv = kfold_accuracy(&factory, &data, cfg.k, derive_seed(seed, &[1]), &tuned).stage(ExitCode::Training)?;

    let train = data.subset(&training_indices(&grid.folds, 0));
    let val = data.subset(&grid.folds[0]);
    let model = factory(derive_seed(seed, &[2])).stage(ExitCode::Training)?;
    let fit = train_classifier(
        model,
        &train,
        &val,
        &TrainConfig {
            seed: derive_seed(seed, &[3]),
            ..tuned
        },
    )
    .stage(ExitCode::Training)?;
    out.write("mlp_model.json", model_to_json(&fit.model).as_bytes())?;

    println!(
        "best cell lr={} n_batches={}; {}-fold CV accuracy {:.4}",
        best.lr, best.n_batches, cfg.k, cv.mean_accuracy
    );
    let result = MlpResult {
        dims: dims.clone(),
        n_samples: data.len(),
        class_ids,
        grid,
        best_cell: best,
        cross_validation: cv,
        final_history: fit.history,
    };
    out.finish(
        "train-mlp",
        seed,
        &Resolved {
            data: Some(data_cfg),
            settings: cfg,
        },
        &result,
    )?;
    Ok(())
}

#[derive(Serialize)]
struct TripletResult {
    dims: Vec<usize>,
    n_samples: usize,
    batch_size: usize,
    epochs: usize,
    steps_per_epoch: usize,
    first_loss: Option<f64>,
    last_loss: Option<f64>,
    history: TripletHistory,
}

pub fn run_triplet(
    common: &Common,
    seed: u64,
    data_cfg: &DataConfig,
    cfg: &TrainTripletConfig,
) -> Result<(), CliError> {
    let mut out = OutDir::create(&common.out)?;
    let data = load(data_cfg, Part::Train, &mut out)?;
    let mut dims = vec![data.dim()];
    dims.extend_from_slice(&cfg.hidden);
    dims.push(cfg.embedding_dim);
    let model = init_model(
        &dims,
        Head::Embedder { l2norm: cfg.l2norm },
        &mut SeededRng::new(derive_seed(seed, &[0])),
    )
    .stage(ExitCode::Training)?;
    let train_cfg = TrainConfig {
        lr: cfg.lr,
        batch_size: cfg.batch_size,
        samples_per_class: cfg.samples_per_class,
        steps_per_epoch: cfg.steps_per_epoch,
        epochs: cfg.epochs,
        margin: cfg.margin,
        seed: derive_seed(seed, &[1]),
        ..TrainConfig::default()
    };
    let augment = AugmentConfig::default();
    let augmentation = cfg.augment.then_some((&augment, data_cfg.range));
    let fit = train_triplet(model, &data, &train_cfg, augmentation).stage(ExitCode::Training)?;
    out.write("triplet_model.json", model_to_json(&fit.model).as_bytes())?;

    let losses = &fit.history.step_loss;
    let result = TripletResult {
        dims,
        n_samples: data.len(),
        batch_size: cfg.batch_size,
        epochs: cfg.epochs,
        steps_per_epoch: cfg.steps_per_epoch,
        first_loss: losses.first().copied(),
        last_loss: losses.last().copied(),
        history: fit.history,
    };
    println!(
        "{} steps; loss {:.4} -> {:.4}",
        result.history.step_loss.len(),
        result.first_loss.unwrap_or(f64::NAN),
        result.last_loss.unwrap_or(f64::NAN)
    );
    out.finish(
        "train-triplet",
        seed,
        &Resolved {
            data: Some(data_cfg),
            settings: cfg,
        },
        &result,
    )?;
    Ok(())
}
