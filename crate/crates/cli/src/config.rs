//! TOML experiment configuration. Every command reads the shared `seed` and
//! `[data]` table plus its own table; command-line flags override file values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wildreid::dataio::ValueRange;
use wildreid::nn::TripletMargin;
use wildreid::pairverify::{GbdtConfig, PairLayout};
use wildreid::synth::{BlobConfig, ClusterConfig, SignPatternConfig};
use wildreid::training::{default_grid, GridCell};

use crate::error::{CliError, ExitCode};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "kebab-case")]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub data: DataConfig,
    pub prep: PrepConfig,
    pub train_mlp: TrainMlpConfig,
    pub train_triplet: TrainTripletConfig,
    pub eval: EvalConfig,
    pub pairs: PairsConfig,
    pub synth: SynthConfig,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::new(ExitCode::Ingestion, format!("reading config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::new(ExitCode::Ingestion, format!("config {}: {e}", path.display())))
    }
}

/// Where samples come from: an image manifest (with an optional class split)
/// or a feature CSV.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub manifest: Option<PathBuf>,
    pub split: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub range: ValueRange,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrepConfig {
    pub root: Option<PathBuf>,
    /// Classes held out for testing; 0 keeps every class in training.
    pub test_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainMlpConfig {
    pub hidden: Vec<usize>,
    pub k: usize,
    pub grid: Vec<GridCell>,
    pub max_epochs: usize,
    pub patience: usize,
}

impl Default for TrainMlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64],
            k: 5,
            grid: default_grid(),
            max_epochs: 200,
            patience: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainTripletConfig {
    pub hidden: Vec<usize>,
    pub embedding_dim: usize,
    pub l2norm: bool,
    pub lr: f64,
    pub batch_size: usize,
    pub samples_per_class: usize,
    pub steps_per_epoch: usize,
    pub epochs: usize,
    pub margin: TripletMargin,
    pub augment: bool,
}

impl Default for TrainTripletConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64],
            embedding_dim: 64,
            l2norm: false,
            lr: 1e-3,
            batch_size: 32,
            samples_per_class: 4,
            steps_per_epoch: 100,
            epochs: 3,
            margin: TripletMargin::Soft,
            augment: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub model: Option<PathBuf>,
    /// Untrained-network seeds to score alongside the model; 0 disables.
    pub random_baseline: usize,
    pub baseline_hidden: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            model: None,
            random_baseline: 0,
            baseline_hidden: vec![64],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PairsConfig {
    /// Embed samples with this model before pairing; raw features otherwise.
    pub model: Option<PathBuf>,
    pub layout: PairLayout,
    pub threshold: f64,
    /// Per-class holdout fraction, used when no class split is given.
    pub test_fraction: f64,
    pub shuffle_labels: bool,
    pub gbdt: GbdtConfig,
}

impl Default for PairsConfig {
    fn default() -> Self {
        Self {
            model: None,
            layout: PairLayout::Full,
            threshold: 0.5,
            test_fraction: 0.5,
            shuffle_labels: false,
            gbdt: GbdtConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    #[default]
    Blobs,
    SignPattern,
    DuplicateClusters,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, rename_all = "kebab-case")]
pub struct SynthConfig {
    pub kind: SynthKind,
    pub blobs: BlobConfig,
    pub sign_pattern: SignPatternConfig,
    pub duplicate_clusters: ClusterConfig,
}
