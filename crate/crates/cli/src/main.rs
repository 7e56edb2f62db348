//! `wildreid`: reproducible metric-learning experiments from the command line.

mod config;
mod data;
mod error;
mod eval;
mod pairs;
mod prep;
mod report;
mod synth;
mod train;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use wildreid::dataio::ValueRange;
use wildreid::pairverify::PairLayout;

use crate::config::{DataConfig, FileConfig, SynthKind};
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "wildreid", version, about = "Metric-learning experiments with JSON reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Seed for every random choice; overrides `seed` from the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML experiment configuration.
    #[arg(long, value_name = "TOML")]
    pub config: Option<PathBuf>,
    /// Directory for models and reports.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Default)]
pub struct DataArgs {
    /// Manifest CSV written by `prep`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Class split JSON written by `prep`.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Feature CSV (`label,v1,v2,...` per row) instead of images.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Pixel range after normalisation: `unit` or `symmetric`.
    #[arg(long, value_parser = parse_range)]
    pub range: Option<ValueRange>,
}

impl DataArgs {
    fn apply(self, cfg: &mut DataConfig) {
        if self.manifest.is_some() || self.features.is_some() {
            cfg.manifest = self.manifest;
            cfg.features = self.features;
        }
        if let Some(s) = self.split {
            cfg.split = Some(s);
        }
        if let Some(r) = self.range {
            cfg.range = r;
        }
    }
}

fn parse_range(s: &str) -> Result<ValueRange, String> {
    match s {
        "unit" => Ok(ValueRange::Unit),
        "symmetric" => Ok(ValueRange::Symmetric),
        _ => Err(format!("expected `unit` or `symmetric`, got `{s}`")),
    }
}

fn parse_layout(s: &str) -> Result<PairLayout, String> {
    match s {
        "full" => Ok(PairLayout::Full),
        "concat" => Ok(PairLayout::Concat),
        "absdiff" => Ok(PairLayout::Absdiff),
        _ => Err(format!("expected `full`, `concat` or `absdiff`, got `{s}`")),
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scan a folder-per-class image tree into a manifest and class split.
    Prep {
        #[command(flatten)]
        common: Common,
        /// Dataset root holding one sub-directory per class.
        #[arg(long)]
        root: Option<PathBuf>,
        /// Number of classes held out for testing.
        #[arg(long)]
        test_classes: Option<usize>,
    },
    /// Grid search, cross-validation and early-stopped training of a classifier MLP.
    TrainMlp {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Hidden layer widths, e.g. `64` or `64,64`.
        #[arg(long, value_delimiter = ',')]
        hidden: Option<Vec<usize>>,
        /// Cross-validation folds.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        max_epochs: Option<usize>,
        #[arg(long)]
        patience: Option<usize>,
    },
    /// Triplet training of an embedding MLP with semi-hard mining.
    TrainTriplet {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_delimiter = ',')]
        hidden: Option<Vec<usize>>,
        #[arg(long)]
        embedding_dim: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        samples_per_class: Option<usize>,
        #[arg(long)]
        steps_per_epoch: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        /// L2-normalise the embedding output.
        #[arg(long)]
        l2norm: bool,
        /// Random flips and rotations of each batch (64×64 image inputs only).
        #[arg(long)]
        augment: bool,
    },
    /// Retrieval metrics of a model's embeddings on the test classes.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Model JSON from `train-mlp` or `train-triplet`.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Also score this many freshly initialised, untrained networks.
        #[arg(long, value_name = "N")]
        random_baseline: Option<usize>,
    },
    /// All-pairs same/different verification with gradient-boosted trees.
    Pairs {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Embed samples with this model first.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Pair row layout: `full`, `concat` or `absdiff`.
        #[arg(long, value_parser = parse_layout)]
        layout: Option<PairLayout>,
        #[arg(long)]
        threshold: Option<f64>,
        /// Per-class test fraction when no class split is given.
        #[arg(long)]
        test_fraction: Option<f64>,
        /// Shuffle sample labels before pairing.
        #[arg(long)]
        shuffle_labels: bool,
    },
    /// Generate a synthetic data set.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kind: Option<SynthKind>,
    },
}

/// Command settings as embedded in a report.
#[derive(Serialize)]
pub struct Resolved<'a, T: Serialize> {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<&'a DataConfig>,
    pub settings: &'a T,
}

pub fn resolve_seed(common: &Common, file: &FileConfig) -> u64 {
    common.seed.or(file.seed).unwrap_or(0)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Prep {
            common,
            root,
            test_classes,
        } => {
            let file = FileConfig::load(common.config.as_deref())?;
            let mut cfg = file.prep.clone();
            if root.is_some() {
                cfg.root = root;
            }
            if let Some(n) = test_classes {
                cfg.test_classes = n;
            }
            prep::run(&common, resolve_seed(&common, &file), &cfg)
        }
        Command::TrainMlp {
            common,
            data,
            hidden,
            k,
            max_epochs,
            patience,
        } => {
            let file = FileConfig::load(common.config.as_deref())?;
            let mut data_cfg = file.data.clone();
            data.apply(&mut data_cfg);
            let mut cfg = file.train_mlp.clone();
            if let Some(h) = hidden {
                cfg.hidden = h;
            }
            if let Some(k) = k {
                cfg.k = k;
            }
            if let Some(m) = max_epochs {
                cfg.max_epochs = m;
            }
            if let Some(p) = patience {
                cfg.patience = p;
            }
            train::run_mlp(&common, resolve_seed(&common, &file), &data_cfg, &cfg)
        }
        Command::TrainTriplet {
            common,
            data,
            hidden,
            embedding_dim,
            lr,
            batch_size,
            samples_per_class,
            steps_per_epoch,
            epochs,
            l2norm,
            augment,
        } => {
            let file = FileConfig::load(common.config.as_deref())?;
            let mut data_cfg = file.data.clone();
            data.apply(&mut data_cfg);
            let mut cfg = file.train_triplet.clone();
            if let Some(h) = hidden {
                cfg.hidden = h;
            }
            if let Some(v) = embedding_dim {
                cfg.embedding_dim = v;
            }
            if let Some(v) = lr {
                cfg.lr = v;
            }
            if let Some(v) = batch_size {
                cfg.batch_size = v;
            }
            if let Some(v) = samples_per_class {
                cfg.samples_per_class = v;
            }
            if let Some(v) = steps_per_epoch {
                cfg.steps_per_epoch = v;
            }
            if let Some(v) = epochs {
                cfg.epochs = v;
            }
            cfg.l2norm |= l2norm;
            cfg.augment |= augment;
            train::run_triplet(&common, resolve_seed(&common, &file), &data_cfg, &cfg)
        }
        Command::Eval {
            common,
            data,
            model,
            random_baseline,
        } => {
            let file = FileConfig::load(common.config.as_deref())?;
            let mut data_cfg = file.data.clone();
            data.apply(&mut data_cfg);
            let mut cfg = file.eval.clone();
            if model.is_some() {
                cfg.model = model;
            }
            if let Some(n) = random_baseline {
                cfg.random_baseline = n;
            }
            eval::run(&common, resolve_seed(&common, &file), &data_cfg, &cfg)
        }
        Command::Pairs {
            common,
            data,
            model,
            layout,
            threshold,
            test_fraction,
            shuffle_labels,
        } => {
            let file = FileConfig::load(common.config.as_deref())?;
            let mut data_cfg = file.data.clone();
            data.apply(&mut data_cfg);
            let mut cfg = file.pairs.clone();
            if model.is_some() {
                cfg.model = model;
            }
            if let Some(l) = layout {
                cfg.layout = l;
            }
            if let Some(t) = threshold {
                cfg.threshold = t;
            }
            if let Some(f) = test_fraction {
                cfg.test_fraction = f;
            }
            cfg.shuffle_labels |= shuffle_labels;
            pairs::run(&common, resolve_seed(&common, &file), &data_cfg, &cfg)
        }
        Command::Synth { common, kind } => {
            let file = FileConfig::load(common.config.as_deref())?;
            let mut cfg = file.synth.clone();
            if let Some(k) = kind {
                cfg.kind = k;
            }
            synth::run(&common, resolve_seed(&common, &file), &cfg)
        }
    }
}

fn main() -> std::process::ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::from(e.code as u8)
        }
    }
}
