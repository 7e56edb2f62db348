//! Retrieval metrics (MAP@R, R-precision, precision@1) and classification
//! accuracy.
//!
//! Every query is ranked against all other samples by ascending distance,
//! ties going to the lower index. `R` for a query is the number of other
//! samples sharing its class; queries with `R = 0` are skipped and counted.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::math::{dot, sq_euclidean, Matrix};
use crate::nn::{init_model, EmbeddingSet, Head};
use crate::rng::{derive_seed, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Mean within each class, then unweighted mean over classes.
    #[default]
    PerClass,
    /// Mean over all evaluated queries.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    #[default]
    SqEuclidean,
    /// `1 − cos`; meant for L2-normalised embeddings.
    Cosine,
}

impl Distance {
    fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Distance::SqEuclidean => sq_euclidean(a, b),
            Distance::Cosine => {
                let na = dot(a, a).sqrt();
                let nb = dot(b, b).sqrt();
                if na == 0.0 || nb == 0.0 {
                    1.0
                } else {
                    1.0 - dot(a, b) / (na * nb)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub averaging: Averaging,
    pub map_at_r: f64,
    pub r_precision: f64,
    pub precision_at_1: f64,
    pub accuracy: Option<f64>,
    /// MAP@R of each class that had at least one evaluated query.
    pub per_class: BTreeMap<usize, f64>,
    pub n_queries_evaluated: usize,
    pub n_queries_skipped: usize,
}

/// Scores of a single evaluated query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryScore {
    pub r: usize,
    pub ap_at_r: f64,
    pub r_precision: f64,
    pub precision_at_1: f64,
}

/// Per-query scores; `None` for queries whose class has no other member.
pub fn query_scores(emb: &EmbeddingSet, distance: Distance) -> Result<Vec<Option<QueryScore>>> {
    let n = emb.len();
    if n < 2 {
        return Err(Error::invalid(format!("retrieval metrics need at least 2 samples, got {n}")));
    }
    let mut class_sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in &emb.labels {
        *class_sizes.entry(l).or_default() += 1;
    }
    let v = &emb.vectors;
    let mut out = Vec::with_capacity(n);
    let mut ranked: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for q in 0..n {
        let label = emb.labels[q];
        let r = class_sizes[&label] - 1;
        if r == 0 {
            out.push(None);
            continue;
        }
        ranked.clear();
        ranked.extend((0..n).filter(|&j| j != q).map(|j| (distance.eval(v.row(q), v.row(j)), j)));
        ranked.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut hits = 0usize;
        let mut precision_sum = 0.0;
        for (i, &(_, j)) in ranked.iter().take(r).enumerate() {
            if emb.labels[j] == label {
                hits += 1;
                precision_sum += hits as f64 / (i + 1) as f64;
            }
        }
        out.push(Some(QueryScore {
            r,
            ap_at_r: precision_sum / r as f64,
            r_precision: hits as f64 / r as f64,
            precision_at_1: if emb.labels[ranked[0].1] == label { 1.0 } else { 0.0 },
        }));
    }
    Ok(out)
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, count) = xs.into_iter().fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Averages one field of the per-query scores.
fn aggregate(
    labels: &[usize],
    scores: &[Option<QueryScore>],
    averaging: Averaging,
    field: impl Fn(&QueryScore) -> f64,
) -> (f64, BTreeMap<usize, f64>) {
    let mut by_class: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (l, s) in labels.iter().zip(scores) {
        if let Some(s) = s {
            by_class.entry(*l).or_default().push(field(s));
        }
    }
    let per_class: BTreeMap<usize, f64> = by_class.iter().map(|(&c, v)| (c, mean(v.iter().copied()))).collect();
    let overall = match averaging {
        Averaging::PerClass => mean(per_class.values().copied()),
        Averaging::Global => mean(scores.iter().flatten().map(&field)),
    };
    (overall, per_class)
}

/// MAP@R together with R-precision and precision@1 under the same averaging.
/// With no evaluable query every metric is reported as 0.
pub fn map_at_r(emb: &EmbeddingSet, averaging: Averaging) -> Result<MetricsReport> {
    map_at_r_with(emb, averaging, Distance::SqEuclidean)
}

pub fn map_at_r_with(emb: &EmbeddingSet, averaging: Averaging, distance: Distance) -> Result<MetricsReport> {
    let scores = query_scores(emb, distance)?;
    let (map, per_class) = aggregate(&emb.labels, &scores, averaging, |s| s.ap_at_r);
    let (rp, _) = aggregate(&emb.labels, &scores, averaging, |s| s.r_precision);
    let (p1, _) = aggregate(&emb.labels, &scores, averaging, |s| s.precision_at_1);
    let evaluated = scores.iter().flatten().count();
    Ok(MetricsReport {
        averaging,
        map_at_r: map,
        r_precision: rp,
        precision_at_1: p1,
        accuracy: None,
        per_class,
        n_queries_evaluated: evaluated,
        n_queries_skipped: scores.len() - evaluated,
    })
}

/// R-precision averaged over all evaluated queries.
pub fn r_precision(emb: &EmbeddingSet) -> Result<f64> {
    let scores = query_scores(emb, Distance::SqEuclidean)?;
    Ok(mean(scores.iter().flatten().map(|s| s.r_precision)))
}

/// Fraction of evaluated queries whose nearest other sample shares the class.
pub fn precision_at_1(emb: &EmbeddingSet) -> Result<f64> {
    let scores = query_scores(emb, Distance::SqEuclidean)?;
    Ok(mean(scores.iter().flatten().map(|s| s.precision_at_1)))
}

/// Index of the row maximum; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn classification_accuracy(probs: &Matrix, labels: &[usize]) -> Result<f64> {
    if probs.rows() != labels.len() {
        return Err(Error::shape(
            "classification_accuracy",
            format!("{} rows vs {} labels", probs.rows(), labels.len()),
        ));
    }
    if labels.is_empty() {
        return Err(Error::invalid("accuracy of an empty set"));
    }
    let correct = probs.row_iter().zip(labels).filter(|(r, &l)| argmax(r) == l).count();
    Ok(correct as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub hidden_dims: Vec<usize>,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<f64>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// MAP@R of untrained networks: for each seed a classifier with the given
/// hidden widths is freshly initialised and its last hidden (ReLU) layer is
/// used as the embedding.
pub fn random_baseline_map_at_r(
    data: &Dataset,
    hidden_dims: &[usize],
    n_seeds: usize,
    seed: u64,
    averaging: Averaging,
) -> Result<BaselineSummary> {
    if hidden_dims.is_empty() {
        return Err(Error::invalid("random baseline needs at least one hidden layer"));
    }
    if n_seeds == 0 {
        return Err(Error::invalid("random baseline needs at least one seed"));
    }
    let mut dims = vec![data.dim()];
    dims.extend_from_slice(hidden_dims);
    dims.push(data.n_classes().max(2));
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|s| derive_seed(seed, &[s])).collect();
    let per_seed = seeds
        .iter()
        .map(|&s| {
            let model = init_model(&dims, Head::Classifier, &mut SeededRng::new(s))?;
            let emb = EmbeddingSet::new(model.embed(&data.x)?, data.labels.clone())?;
            Ok(map_at_r(&emb, averaging)?.map_at_r)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(BaselineSummary {
        hidden_dims: hidden_dims.to_vec(),
        mean: mean(per_seed.iter().copied()),
        min: per_seed.iter().copied().fold(f64::INFINITY, f64::min),
        max: per_seed.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        seeds,
        per_seed,
    })
}
