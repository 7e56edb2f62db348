//! Experiment harness: early-stopped classifier training, k-fold
//! cross-validation and grid search, and the triplet-training loop with
//! semi-hard mining.

mod classifier;
mod triplet;

pub use classifier::{
    default_grid, grid_search, kfold_accuracy, train_classifier, CellResult, ClassifierOutcome, EarlyStopping,
    GridCell, GridSearchReport, History, KFoldReport, ModelFactory, StopDecision,
};
pub use triplet::{
    mine_semi_hard, sample_triplet_batch, train_triplet, triplet_loss_and_grad, Triplet, TripletHistory,
    TripletOutcome,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::TripletMargin;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    /// Mini-batches per classification epoch; the shuffled training set is
    /// cut into this many near-equal parts.
    pub n_batches: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// Triplet path: samples per batch.
    pub batch_size: usize,
    /// Triplet path: samples drawn per class (the K of a P×K batch).
    pub samples_per_class: usize,
    pub steps_per_epoch: usize,
    pub epochs: usize,
    pub margin: TripletMargin,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            n_batches: 8,
            max_epochs: 200,
            patience: 5,
            seed: 0,
            batch_size: 32,
            samples_per_class: 4,
            steps_per_epoch: 100,
            epochs: 3,
            margin: TripletMargin::Soft,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("lr must be positive, got {}", self.lr)));
        }
        for (name, v) in [
            ("n_batches", self.n_batches),
            ("max_epochs", self.max_epochs),
            ("patience", self.patience),
            ("batch_size", self.batch_size),
            ("samples_per_class", self.samples_per_class),
            ("steps_per_epoch", self.steps_per_epoch),
            ("epochs", self.epochs),
        ] {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be at least 1")));
            }
        }
        if self.samples_per_class < 2 {
            return Err(Error::invalid("samples_per_class must be at least 2 to form positives"));
        }
        if let TripletMargin::Fixed(m) = self.margin {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(Error::invalid(format!("fixed margin must be non-negative, got {m}")));
            }
        }
        Ok(())
    }
}
