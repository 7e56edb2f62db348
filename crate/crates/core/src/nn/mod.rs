//! From-scratch MLP with backpropagation, Adam, and the classification and
//! triplet losses.

mod adam;
mod io;
mod loss;
mod model;

pub use adam::{AdamConfig, AdamState};
pub use io::{load_model, model_from_json, model_to_json, save_model, MODEL_FORMAT_VERSION};
pub use loss::{cross_entropy, sigmoid, softplus, triplet_soft_margin, TripletMargin, PROB_FLOOR};
pub use model::{
    init_model, param_name, Activations, BackwardTarget, DenseParams, Gradients, Head, LayerKind, LayerSpec,
    MlpModel,
};

use crate::error::{Error, Result};
use crate::math::Matrix;

/// Embedding rows with aligned class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub vectors: Matrix,
    pub labels: Vec<usize>,
}

impl EmbeddingSet {
    pub fn new(vectors: Matrix, labels: Vec<usize>) -> Result<Self> {
        if vectors.rows() != labels.len() {
            return Err(Error::shape(
                "EmbeddingSet",
                format!("{} vectors vs {} labels", vectors.rows(), labels.len()),
            ));
        }
        Ok(Self { vectors, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Embeds `x` and pairs the rows with `labels`.
pub fn embed(model: &MlpModel, x: &Matrix, labels: &[usize]) -> Result<EmbeddingSet> {
    EmbeddingSet::new(model.embed(x)?, labels.to_vec())
}
