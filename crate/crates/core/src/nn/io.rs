//! Versioned JSON model files.
//!
//! ```json
//! {"format_version":1,"head":"classifier",
//!  "layers":[{"kind":"dense","in":4096,"out":64},...],
//!  "params":[{"name":"dense0.weight","shape":[4096,64],"data":[...]},...]}
//! ```
//!
//! Reals are written in shortest round-trip form, so a file read back yields
//! bit-identical parameters.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{param_name, DenseParams, Head, LayerKind, LayerSpec, MlpModel};
use crate::error::{Error, Result};
use crate::math::Matrix;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    head: HeadTag,
    layers: Vec<LayerSpec>,
    params: Vec<ParamBlock>,
}

#[derive(Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
enum HeadTag {
    Classifier,
    Embedder,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamBlock {
    name: String,
    shape: [usize; 2],
    data: Vec<f64>,
}

fn block(name: String, m: &Matrix) -> ParamBlock {
    ParamBlock {
        name,
        shape: [m.rows(), m.cols()],
        data: m.data().to_vec(),
    }
}

pub fn model_to_json(model: &MlpModel) -> String {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        head: match model.head() {
            Head::Classifier => HeadTag::Classifier,
            Head::Embedder { .. } => HeadTag::Embedder,
        },
        layers: model.layers().to_vec(),
        params: model
            .params()
            .iter()
            .enumerate()
            .flat_map(|(i, p)| [block(param_name(i, true), &p.weight), block(param_name(i, false), &p.bias)])
            .collect(),
    };
    let mut s = serde_json::to_string(&file).expect("model serialises");
    s.push('\n');
    s
}

pub fn model_from_json(text: &str) -> Result<MlpModel> {
    let file: ModelFile = serde_json::from_str(text)?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "format_version {} (expected {MODEL_FORMAT_VERSION})",
            file.format_version
        )));
    }
    let head = match file.head {
        HeadTag::Classifier => Head::Classifier,
        HeadTag::Embedder => Head::Embedder {
            l2norm: file.layers.last().is_some_and(|l| l.kind == LayerKind::L2norm),
        },
    };
    if file.params.len() % 2 != 0 {
        return Err(Error::ModelFormat("parameter blocks must come in weight/bias pairs".into()));
    }
    let mut params = Vec::new();
    for (i, pair) in file.params.chunks_exact(2).enumerate() {
        let mut mats = Vec::with_capacity(2);
        for (b, weight) in pair.iter().zip([true, false]) {
            let expected = param_name(i, weight);
            if b.name != expected {
                return Err(Error::ModelFormat(format!("expected block {expected}, found {}", b.name)));
            }
            mats.push(Matrix::new(b.shape[0], b.shape[1], b.data.clone())?);
        }
        let bias = mats.pop().unwrap();
        let weight = mats.pop().unwrap();
        params.push(DenseParams { weight, bias });
    }
    MlpModel::from_parts(head, file.layers, params)
}

pub fn save_model(model: &MlpModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_json(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<MlpModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}
