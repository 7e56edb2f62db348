//! Metric-learning toolkit: a from-scratch MLP trained with Adam for
//! classification or with soft-margin triplet loss, MAP@R-family retrieval
//! metrics, a cross-validated training harness, and an all-pairs
//! gradient-boosted-tree verifier.

pub mod dataio;
pub mod error;
pub mod math;
pub mod metrics;
pub mod nn;
pub mod pairverify;
pub mod rng;
pub mod synth;
pub mod training;

pub use dataio::Dataset;
pub use error::{Error, Result};
pub use math::Matrix;
pub use metrics::{map_at_r, Averaging, MetricsReport};
pub use nn::{EmbeddingSet, MlpModel};
pub use pairverify::{GbdtConfig, GbdtModel, PairDataset, PairLayout};
pub use rng::SeededRng;
pub use training::TrainConfig;
