//! Multilayer perceptron: layout, initialisation, forward and backward passes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{matmul, matmul_nt, matmul_tn, softmax_rows, Matrix};
use crate::rng::SeededRng;

const L2_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Dense,
    Relu,
    L2norm,
    SoftmaxOutput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    #[serde(rename = "in")]
    pub in_dim: usize,
    #[serde(rename = "out")]
    pub out_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// Dense/ReLU chain ending in a softmax over classes.
    Classifier,
    /// Dense/ReLU chain ending in a linear embedding, optionally L2-normalised.
    Embedder { l2norm: bool },
}

/// Weight (`in × out`) and bias (`1 × out`) of one dense layer. Also used
/// for gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl DenseParams {
    pub fn zeros_like(&self) -> Self {
        Self {
            weight: Matrix::zeros(self.weight.rows(), self.weight.cols()),
            bias: Matrix::zeros(1, self.bias.cols()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    head: Head,
    layers: Vec<LayerSpec>,
    /// One entry per dense layer, in layer order.
    params: Vec<DenseParams>,
}

/// Per-parameter gradients, aligned with [`MlpModel::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub dense: Vec<DenseParams>,
}

/// Output of every layer for one batch; `outputs[0]` is the input and
/// `outputs[i + 1]` the output of layer `i`.
#[derive(Debug, Clone)]
pub struct Activations {
    pub outputs: Vec<Matrix>,
}

impl Activations {
    pub fn last(&self) -> &Matrix {
        self.outputs.last().expect("activations always hold the input")
    }
}

/// What the backward pass starts from.
#[derive(Debug, Clone, Copy)]
pub enum BackwardTarget<'a> {
    /// Mean cross-entropy against these labels (classifier head only).
    Labels(&'a [usize]),
    /// Gradient of the loss with respect to the model output.
    Upstream(&'a Matrix),
}

pub fn param_name(dense_index: usize, weight: bool) -> String {
    format!("dense{dense_index}.{}", if weight { "weight" } else { "bias" })
}

/// Builds a fresh model with He-normal weights and zero biases.
///
/// `dims` lists the input width, each hidden width and the output width
/// (class count or embedding size). Every dense layer except the last is
/// followed by a ReLU.
pub fn init_model(dims: &[usize], head: Head, rng: &mut SeededRng) -> Result<MlpModel> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::invalid(format!("layer dims {dims:?} need >= 2 positive entries")));
    }
    let out = *dims.last().unwrap();
    if head == Head::Classifier && out < 2 {
        return Err(Error::invalid("a classifier head needs at least 2 classes"));
    }
    let mut layers = Vec::new();
    let mut params = Vec::new();
    let n_dense = dims.len() - 1;
    for (i, w) in dims.windows(2).enumerate() {
        let (fan_in, fan_out) = (w[0], w[1]);
        layers.push(LayerSpec {
            kind: LayerKind::Dense,
            in_dim: fan_in,
            out_dim: fan_out,
        });
        let std = (2.0 / fan_in as f64).sqrt();
        let weight = Matrix::new(
            fan_in,
            fan_out,
            rng.normals(fan_in * fan_out).into_iter().map(|z| z * std).collect(),
        )?;
        params.push(DenseParams {
            weight,
            bias: Matrix::zeros(1, fan_out),
        });
        if i + 1 < n_dense {
            layers.push(LayerSpec {
                kind: LayerKind::Relu,
                in_dim: fan_out,
                out_dim: fan_out,
            });
        }
    }
    let tail = match head {
        Head::Classifier => Some(LayerKind::SoftmaxOutput),
        Head::Embedder { l2norm: true } => Some(LayerKind::L2norm),
        Head::Embedder { l2norm: false } => None,
    };
    if let Some(kind) = tail {
        layers.push(LayerSpec {
            kind,
            in_dim: out,
            out_dim: out,
        });
    }
    MlpModel::from_parts(head, layers, params)
}

impl MlpModel {
    /// Assembles a model, checking the layer chain and parameter shapes.
    pub fn from_parts(head: Head, layers: Vec<LayerSpec>, params: Vec<DenseParams>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("model has no layers"));
        }
        let mut dense_seen = 0;
        for (i, l) in layers.iter().enumerate() {
            if l.in_dim == 0 || l.out_dim == 0 {
                return Err(Error::invalid(format!("layer {i} has a zero dimension")));
            }
            if l.kind != LayerKind::Dense && l.in_dim != l.out_dim {
                return Err(Error::invalid(format!("parameter-free layer {i} changes width")));
            }
            if i > 0 && layers[i - 1].out_dim != l.in_dim {
                return Err(Error::invalid(format!(
                    "layer {i} expects width {} but receives {}",
                    l.in_dim,
                    layers[i - 1].out_dim
                )));
            }
            match l.kind {
                LayerKind::SoftmaxOutput if i + 1 != layers.len() || head != Head::Classifier => {
                    return Err(Error::invalid("softmax_output must be the final layer of a classifier"))
                }
                LayerKind::L2norm if head == Head::Classifier => {
                    return Err(Error::invalid("l2norm is only valid in an embedder"))
                }
                LayerKind::Dense => {
                    let p = params
                        .get(dense_seen)
                        .ok_or_else(|| Error::invalid(format!("missing parameters for layer {i}")))?;
                    if p.weight.shape() != (l.in_dim, l.out_dim) || p.bias.shape() != (1, l.out_dim) {
                        return Err(Error::invalid(format!("parameter shapes do not match layer {i}")));
                    }
                    if !p.weight.is_finite() || !p.bias.is_finite() {
                        return Err(Error::invalid(format!("non-finite parameters in layer {i}")));
                    }
                    dense_seen += 1;
                }
                _ => {}
            }
        }
        if dense_seen != params.len() {
            return Err(Error::invalid("more parameter blocks than dense layers"));
        }
        let last = layers.last().unwrap().kind;
        match head {
            Head::Classifier if last != LayerKind::SoftmaxOutput => {
                return Err(Error::invalid("classifier must end in softmax_output"))
            }
            Head::Embedder { l2norm } if l2norm != (last == LayerKind::L2norm) => {
                return Err(Error::invalid("embedder l2norm flag disagrees with its layers"))
            }
            _ => {}
        }
        Ok(Self { head, layers, params })
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &[DenseParams] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [DenseParams] {
        &mut self.params
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    /// Widths of the dense chain: input, hidden..., output.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().filter(|l| l.kind == LayerKind::Dense).map(|l| l.out_dim));
        dims
    }

    pub fn n_params(&self) -> usize {
        self.params.iter().map(|p| p.weight.data().len() + p.bias.cols()).sum()
    }

    /// Number of layers that make up the embedding: everything for an
    /// embedder, everything before the final dense + softmax for a classifier.
    fn embedding_depth(&self) -> Result<usize> {
        match self.head {
            Head::Embedder { .. } => Ok(self.layers.len()),
            Head::Classifier => {
                let depth = self.layers.len() - 2;
                if depth == 0 {
                    return Err(Error::invalid("classifier without a hidden layer has no embedding"));
                }
                Ok(depth)
            }
        }
    }

    pub fn embedding_dim(&self) -> Result<usize> {
        Ok(self.layers[self.embedding_depth()? - 1].out_dim)
    }

    fn forward_layers(&self, batch: &Matrix, depth: usize) -> Result<Activations> {
        if batch.cols() != self.input_dim() {
            return Err(Error::shape(
                "forward",
                format!("batch has {} columns, model expects {}", batch.cols(), self.input_dim()),
            ));
        }
        let mut outputs = Vec::with_capacity(depth + 1);
        outputs.push(batch.clone());
        let mut dense = 0;
        for layer in &self.layers[..depth] {
            let x = outputs.last().unwrap();
            let y = match layer.kind {
                LayerKind::Dense => {
                    let p = &self.params[dense];
                    dense += 1;
                    let mut y = matmul(x, &p.weight)?;
                    y.add_row_broadcast(&p.bias)?;
                    y
                }
                LayerKind::Relu => x.map(|v| v.max(0.0)),
                LayerKind::L2norm => {
                    let mut y = x.clone();
                    for r in 0..y.rows() {
                        let row = y.row_mut(r);
                        let n = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(L2_FLOOR);
                        row.iter_mut().for_each(|v| *v /= n);
                    }
                    y
                }
                LayerKind::SoftmaxOutput => softmax_rows(x),
            };
            outputs.push(y);
        }
        Ok(Activations { outputs })
    }

    pub fn forward(&self, batch: &Matrix) -> Result<Activations> {
        self.forward_layers(batch, self.layers.len())
    }

    /// Final output only: class probabilities or embeddings.
    pub fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        Ok(self.forward(batch)?.outputs.pop().unwrap())
    }

    /// Embedding rows. For a classifier this is the last hidden (post-ReLU)
    /// activation, i.e. the forward pass with the final dense + softmax removed.
    pub fn embed(&self, batch: &Matrix) -> Result<Matrix> {
        let depth = self.embedding_depth()?;
        Ok(self.forward_layers(batch, depth)?.outputs.pop().unwrap())
    }

    /// Exact gradients of the loss described by `target`.
    pub fn backward(&self, acts: &Activations, target: BackwardTarget<'_>) -> Result<Gradients> {
        if acts.outputs.len() != self.layers.len() + 1 {
            return Err(Error::shape(
                "backward",
                format!(
                    "{} activations for a {}-layer model",
                    acts.outputs.len(),
                    self.layers.len()
                ),
            ));
        }
        let batch = acts.outputs[0].rows();
        for (i, out) in acts.outputs.iter().enumerate() {
            let width = if i == 0 {
                self.input_dim()
            } else {
                self.layers[i - 1].out_dim
            };
            if out.shape() != (batch, width) {
                return Err(Error::shape("backward", format!("activation {i} does not match the model")));
            }
        }
        if batch == 0 {
            return Err(Error::invalid("backward on an empty batch"));
        }

        let mut n_layers = self.layers.len();
        let mut grad = match target {
            BackwardTarget::Labels(labels) => {
                if self.head != Head::Classifier {
                    return Err(Error::invalid("label targets need a classifier head"));
                }
                if labels.len() != batch {
                    return Err(Error::shape("backward", format!("{} labels for batch {batch}", labels.len())));
                }
                // Fused softmax + cross-entropy: (probs − onehot) / batch.
                let mut g = acts.last().clone();
                let classes = g.cols();
                for (r, &l) in labels.iter().enumerate() {
                    if l >= classes {
                        return Err(Error::invalid(format!("label {l} out of range for {classes} classes")));
                    }
                    let v = g.get(r, l);
                    g.set(r, l, v - 1.0);
                }
                g.scale(1.0 / batch as f64);
                n_layers -= 1;
                g
            }
            BackwardTarget::Upstream(g) => {
                if g.shape() != acts.last().shape() {
                    return Err(Error::shape("backward", "upstream gradient does not match the output"));
                }
                g.clone()
            }
        };

        let mut dense_idx = self.params.len();
        let mut grads: Vec<Option<DenseParams>> = vec![None; self.params.len()];
        for li in (0..n_layers).rev() {
            let layer = self.layers[li];
            let x = &acts.outputs[li];
            let y = &acts.outputs[li + 1];
            match layer.kind {
                LayerKind::Dense => {
                    dense_idx -= 1;
                    let p = &self.params[dense_idx];
                    grads[dense_idx] = Some(DenseParams {
                        weight: matmul_tn(x, &grad)?,
                        bias: grad.sum_rows(),
                    });
                    if li > 0 {
                        grad = matmul_nt(&grad, &p.weight)?;
                    }
                }
                LayerKind::Relu => {
                    for (g, &xv) in grad.data_mut().iter_mut().zip(x.data()) {
                        if xv <= 0.0 {
                            *g = 0.0;
                        }
                    }
                }
                LayerKind::L2norm => {
                    for r in 0..batch {
                        let n = x.row(r).iter().map(|v| v * v).sum::<f64>().sqrt().max(L2_FLOOR);
                        let yr = y.row(r);
                        let gy: f64 = yr.iter().zip(grad.row(r)).map(|(a, b)| a * b).sum();
                        for (g, &yv) in grad.row_mut(r).iter_mut().zip(yr) {
                            *g = (*g - yv * gy) / n;
                        }
                    }
                }
                LayerKind::SoftmaxOutput => {
                    for r in 0..batch {
                        let yr = y.row(r);
                        let gy: f64 = yr.iter().zip(grad.row(r)).map(|(a, b)| a * b).sum();
                        for (g, &yv) in grad.row_mut(r).iter_mut().zip(yr) {
                            *g = yv * (*g - gy);
                        }
                    }
                }
            }
        }
        Ok(Gradients {
            dense: grads.into_iter().map(|g| g.expect("every dense layer visited")).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_classifier(dims: &[usize]) -> MlpModel {
        let mut m = init_model(dims, Head::Classifier, &mut SeededRng::new(0)).unwrap();
        for p in m.params_mut() {
            p.weight.data_mut().fill(0.0);
        }
        m
    }

    #[test]
    fn image_classifier_architecture() {
        let m = init_model(&[4096, 64, 80], Head::Classifier, &mut SeededRng::new(1)).unwrap();
        assert_eq!(m.params().len(), 2);
        assert_eq!(m.params()[0].weight.shape(), (4096, 64));
        assert_eq!(m.params()[1].weight.shape(), (64, 80));
        assert!(m.params().iter().all(|p| p.bias.data().iter().all(|&b| b == 0.0)));
        let w = m.params()[0].weight.data();
        let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        assert!((var - 2.0 / 4096.0).abs() < 0.05 * 2.0 / 4096.0, "{var}");
        assert_eq!(m.embedding_dim().unwrap(), 64);
        let again = init_model(&[4096, 64, 80], Head::Classifier, &mut SeededRng::new(1)).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn init_rejects_bad_dims() {
        let mut rng = SeededRng::new(0);
        assert!(init_model(&[4], Head::Classifier, &mut rng).is_err());
        assert!(init_model(&[4, 0, 2], Head::Classifier, &mut rng).is_err());
        assert!(init_model(&[4, 1], Head::Classifier, &mut rng).is_err());
        assert!(init_model(&[4, 1], Head::Embedder { l2norm: false }, &mut rng).is_ok());
    }

    #[test]
    fn zero_weights_give_uniform_softmax() {
        let m = zero_classifier(&[3, 5, 4]);
        let x = Matrix::from_rows(&[[1.0, -2.0, 3.0], [0.0, 0.0, 9.0]]).unwrap();
        let p = m.predict(&x).unwrap();
        assert!(p.data().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn dense_forward_reproduces_matmul() {
        let w = Matrix::from_rows(&[[5.0, 1.0], [6.0, 0.0]]).unwrap();
        let m = MlpModel::from_parts(
            Head::Embedder { l2norm: false },
            vec![LayerSpec {
                kind: LayerKind::Dense,
                in_dim: 2,
                out_dim: 2,
            }],
            vec![DenseParams {
                weight: w,
                bias: Matrix::zeros(1, 2),
            }],
        )
        .unwrap();
        let x = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        assert_eq!(m.predict(&x).unwrap().data(), &[17.0, 1.0]);
    }

    #[test]
    fn relu_zeroes_negatives_and_embed_is_penultimate() {
        let m = init_model(&[3, 8, 4], Head::Classifier, &mut SeededRng::new(5)).unwrap();
        let x = Matrix::from_rows(&[[1.0, -2.0, 3.0], [-1.0, 0.5, 0.25], [4.0, 4.0, -4.0]]).unwrap();
        let acts = m.forward(&x).unwrap();
        let pre = &acts.outputs[1];
        let post = &acts.outputs[2];
        for (a, b) in pre.data().iter().zip(post.data()) {
            assert_eq!(*b, a.max(0.0));
        }
        let e = m.embed(&x).unwrap();
        assert_eq!(&e, post);
        assert!(e.data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn embed_requires_hidden_layer() {
        let m = init_model(&[3, 4], Head::Classifier, &mut SeededRng::new(5)).unwrap();
        assert!(m.embed(&Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn l2norm_head_gives_unit_rows() {
        let m = init_model(&[3, 6, 5], Head::Embedder { l2norm: true }, &mut SeededRng::new(2)).unwrap();
        let x = Matrix::from_rows(&[[1.0, 2.0, 3.0], [0.3, -0.1, 2.0]]).unwrap();
        for r in m.embed(&x).unwrap().row_iter() {
            let n: f64 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn backward_rejects_stale_activations() {
        let m = init_model(&[3, 4, 2], Head::Classifier, &mut SeededRng::new(5)).unwrap();
        let other = init_model(&[3, 4, 4, 2], Head::Classifier, &mut SeededRng::new(5)).unwrap();
        let x = Matrix::zeros(2, 3);
        let acts = other.forward(&x).unwrap();
        assert!(m.backward(&acts, BackwardTarget::Labels(&[0, 1])).is_err());
        let acts = m.forward(&x).unwrap();
        assert!(m.backward(&acts, BackwardTarget::Labels(&[0])).is_err());
        assert!(m.backward(&acts, BackwardTarget::Labels(&[0, 2])).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let m = init_model(&[3, 4, 2], Head::Embedder { l2norm: false }, &mut SeededRng::new(5)).unwrap();
        let x = Matrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        let acts = m.forward(&x).unwrap();
        let g = m.backward(&acts, BackwardTarget::Upstream(&Matrix::zeros(1, 2))).unwrap();
        for p in &g.dense {
            assert!(p.weight.data().iter().chain(p.bias.data()).all(|&v| v == 0.0));
        }
    }
}
