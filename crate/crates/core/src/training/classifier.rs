use log::debug;
use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::dataio::{stratified_kfold, training_indices, Dataset};
use crate::error::{Error, Result};
use crate::metrics::classification_accuracy;
use crate::nn::{cross_entropy, AdamConfig, AdamState, BackwardTarget, Head, MlpModel};
use crate::rng::{derive_seed, SeededRng};

/// Builds a fresh model from a seed.
pub type ModelFactory<'a> = dyn Fn(u64) -> Result<MlpModel> + 'a;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopDecision {
    pub improved: bool,
    pub stop: bool,
}

/// Patience-based early stopping on a loss that should decrease.
/// An epoch counts as an improvement only when its loss is strictly lower
/// than the best so far.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            since_best: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopDecision {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.since_best = 0;
            StopDecision {
                improved: true,
                stop: false,
            }
        } else {
            self.since_best += 1;
            StopDecision {
                improved: false,
                stop: self.since_best >= self.patience,
            }
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    /// 1-based epoch whose parameters were restored.
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub stopped_early: bool,
}

#[derive(Debug, Clone)]
pub struct ClassifierOutcome {
    pub model: MlpModel,
    pub history: History,
}

/// Cuts `perm` into `n` contiguous parts whose sizes differ by at most one.
fn partition(perm: &[usize], n: usize) -> impl Iterator<Item = &[usize]> {
    let n = n.min(perm.len()).max(1);
    let base = perm.len() / n;
    let extra = perm.len() % n;
    let mut start = 0;
    (0..n).map(move |i| {
        let len = base + usize::from(i < extra);
        let part = &perm[start..start + len];
        start += len;
        part
    })
}

/// Mini-batch Adam training with early stopping on validation cross-entropy.
/// The returned model carries the parameters of the best validation epoch.
pub fn train_classifier(
    mut model: MlpModel,
    train: &Dataset,
    val: &Dataset,
    config: &TrainConfig,
) -> Result<ClassifierOutcome> {
    config.validate()?;
    if model.head() != Head::Classifier {
        return Err(Error::invalid("train_classifier needs a classifier head"));
    }
    if train.is_empty() || val.is_empty() {
        return Err(Error::invalid("training and validation sets must be non-empty"));
    }
    let mut adam = AdamState::new(&model, AdamConfig::with_lr(config.lr))?;
    let mut rng = SeededRng::new(config.seed);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = model.clone();
    let mut history = History {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        val_accuracy: Vec::new(),
        best_epoch: 0,
        epochs_run: 0,
        stopped_early: false,
    };

    for epoch in 1..=config.max_epochs {
        let perm = rng.permutation(train.len());
        let mut loss_sum = 0.0;
        for batch in partition(&perm, config.n_batches) {
            let x = train.x.select_rows(batch);
            let labels: Vec<usize> = batch.iter().map(|&i| train.labels[i]).collect();
            let acts = model.forward(&x)?;
            loss_sum += cross_entropy(acts.last(), &labels)? * batch.len() as f64;
            let grads = model.backward(&acts, BackwardTarget::Labels(&labels))?;
            adam.step(&mut model, &grads).map_err(|e| match e {
                Error::NonFiniteGradient(_) => Error::Diverged { epoch },
                other => other,
            })?;
        }
        let train_loss = loss_sum / train.len() as f64;
        let probs = model.predict(&val.x)?;
        let val_loss = cross_entropy(&probs, &val.labels)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);
        history.val_accuracy.push(classification_accuracy(&probs, &val.labels)?);
        history.epochs_run = epoch;

        let decision = stopper.observe(epoch, val_loss);
        if decision.improved {
            best = model.clone();
        }
        if decision.stop {
            history.stopped_early = true;
            break;
        }
    }
    history.best_epoch = stopper.best_epoch();
    debug!(
        "trained {} epochs, best epoch {} (val loss {:.6})",
        history.epochs_run,
        history.best_epoch,
        stopper.best_loss()
    );
    Ok(ClassifierOutcome { model: best, history })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub lr: f64,
    pub n_batches: usize,
}

/// lr ∈ {1e-2, 1e-3, 1e-4} × batches ∈ {4, 8, 16}.
pub fn default_grid() -> Vec<GridCell> {
    let mut grid = Vec::new();
    for lr in [1e-2, 1e-3, 1e-4] {
        for n_batches in [4, 8, 16] {
            grid.push(GridCell { lr, n_batches });
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: GridCell,
    pub fold_accuracies: Vec<f64>,
    pub cv_mean_accuracy: f64,
    /// Set when any fold produced a non-finite loss; such folds score 0.
    pub diverged: bool,
    pub epochs_run: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchReport {
    pub k: usize,
    pub seed: u64,
    /// Fold membership shared by every cell.
    pub folds: Vec<Vec<usize>>,
    pub cells: Vec<CellResult>,
    pub best_cell: usize,
}

impl GridSearchReport {
    pub fn best(&self) -> &CellResult {
        &self.cells[self.best_cell]
    }
}

struct FoldRun {
    accuracy: f64,
    epochs_run: usize,
}

fn run_fold(
    factory: &ModelFactory<'_>,
    data: &Dataset,
    folds: &[Vec<usize>],
    fold: usize,
    config: &TrainConfig,
) -> Result<FoldRun> {
    let train = data.subset(&training_indices(folds, fold));
    let val = data.subset(&folds[fold]);
    let model = factory(derive_seed(config.seed, &[0]))?;
    let out = train_classifier(model, &train, &val, config)?;
    let probs = out.model.predict(&val.x)?;
    Ok(FoldRun {
        accuracy: classification_accuracy(&probs, &val.labels)?,
        epochs_run: out.history.epochs_run,
    })
}

/// Scores every grid cell by k-fold cross-validated accuracy on one shared
/// fold partition and picks the best (lowest index on ties). Cell `c`, fold
/// `f` trains with its own seed derived from `(seed, c, f)`.
pub fn grid_search(
    factory: &ModelFactory<'_>,
    data: &Dataset,
    grid: &[GridCell],
    k: usize,
    seed: u64,
    base: &TrainConfig,
) -> Result<GridSearchReport> {
    if grid.is_empty() {
        return Err(Error::invalid("grid search needs at least one cell"));
    }
    let folds = stratified_kfold(&data.labels, k, seed)?;
    let mut cells = Vec::with_capacity(grid.len());
    for (ci, &cell) in grid.iter().enumerate() {
        let mut fold_accuracies = Vec::with_capacity(k);
        let mut epochs_run = Vec::with_capacity(k);
        let mut diverged = false;
        for f in 0..k {
            let config = TrainConfig {
                lr: cell.lr,
                n_batches: cell.n_batches,
                seed: derive_seed(seed, &[ci as u64, f as u64]),
                ..base.clone()
            };
            match run_fold(factory, data, &folds, f, &config) {
                Ok(run) => {
                    fold_accuracies.push(run.accuracy);
                    epochs_run.push(run.epochs_run);
                }
                Err(Error::Diverged { epoch }) => {
                    debug!("cell {ci} fold {f} diverged at epoch {epoch}");
                    diverged = true;
                    fold_accuracies.push(0.0);
                    epochs_run.push(epoch);
                }
                Err(e) => return Err(e),
            }
        }
        let cv_mean_accuracy = fold_accuracies.iter().sum::<f64>() / k as f64;
        debug!("cell {ci} (lr {}, batches {}): {cv_mean_accuracy:.4}", cell.lr, cell.n_batches);
        cells.push(CellResult {
            cell,
            fold_accuracies,
            cv_mean_accuracy,
            diverged,
            epochs_run,
        });
    }
    let mut best_cell = 0;
    for (i, c) in cells.iter().enumerate() {
        if c.cv_mean_accuracy > cells[best_cell].cv_mean_accuracy {
            best_cell = i;
        }
    }
    Ok(GridSearchReport {
        k,
        seed,
        folds,
        cells,
        best_cell,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KFoldReport {
    pub k: usize,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub epochs_run: Vec<usize>,
}

/// k rounds of train-on-(k−1)-folds, validate-on-the-rest with fresh models.
pub fn kfold_accuracy(
    factory: &ModelFactory<'_>,
    data: &Dataset,
    k: usize,
    seed: u64,
    config: &TrainConfig,
) -> Result<KFoldReport> {
    let folds = stratified_kfold(&data.labels, k, seed)?;
    let mut fold_accuracies = Vec::with_capacity(k);
    let mut epochs_run = Vec::with_capacity(k);
    for f in 0..k {
        let cfg = TrainConfig {
            seed: derive_seed(seed, &[u64::MAX, f as u64]),
            ..config.clone()
        };
        let run = run_fold(factory, data, &folds, f, &cfg)?;
        fold_accuracies.push(run.accuracy);
        epochs_run.push(run.epochs_run);
    }
    Ok(KFoldReport {
        k,
        mean_accuracy: fold_accuracies.iter().sum::<f64>() / k as f64,
        fold_accuracies,
        epochs_run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn early_stopping_trace() {
        let losses = [5.0, 4.0, 3.0, 3.1, 3.2, 3.3, 3.4, 3.5];
        let mut s = EarlyStopping::new(5);
        let mut stopped_at = None;
        for (i, &l) in losses.iter().enumerate() {
            if s.observe(i + 1, l).stop {
                stopped_at = Some(i + 1);
                break;
            }
        }
        assert_eq!(stopped_at, Some(8));
        assert_eq!(s.best_epoch(), 3);
    }

    #[test]
    fn equal_loss_is_not_an_improvement() {
        let mut s = EarlyStopping::new(2);
        assert!(s.observe(1, 1.0).improved);
        assert!(!s.observe(2, 1.0).improved);
        assert!(s.observe(3, 1.0).stop);
    }

    #[test]
    fn partition_sizes() {
        let perm: Vec<usize> = (0..10).collect();
        let sizes: Vec<usize> = partition(&perm, 4).map(<[usize]>::len).collect();
        assert_eq!(sizes, vec![3, 3, 2, 2]);
        let sizes: Vec<usize> = partition(&perm[..3], 8).map(<[usize]>::len).collect();
        assert_eq!(sizes, vec![1, 1, 1]);
    }

    #[test]
    fn default_grid_shape() {
        let g = default_grid();
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], GridCell { lr: 1e-2, n_batches: 4 });
    }
}
