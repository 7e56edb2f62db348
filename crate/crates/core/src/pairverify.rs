//! All-pairs same/different verification with gradient-boosted trees.
//!
//! Every unordered pair of samples becomes one row labelled 1 when both
//! samples share a class. A binary classifier is fitted by Newton boosting on
//! the logistic loss with exact greedy, best-first grown regression trees.

use std::io::Write;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Matrix;
use crate::nn::sigmoid;

pub const GBDT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PairLayout {
    /// `[f₁, f₂, |f₁ − f₂|]`
    #[default]
    Full,
    /// `[f₁, f₂]`
    Concat,
    /// `|f₁ − f₂|`
    Absdiff,
}

impl PairLayout {
    pub fn width(self, dim: usize) -> usize {
        match self {
            PairLayout::Full => 3 * dim,
            PairLayout::Concat => 2 * dim,
            PairLayout::Absdiff => dim,
        }
    }
}

pub fn pair_row(a: &[f64], b: &[f64], layout: PairLayout) -> Vec<f64> {
    let absdiff = a.iter().zip(b).map(|(x, y)| (x - y).abs());
    match layout {
        PairLayout::Full => a.iter().chain(b).copied().chain(absdiff).collect(),
        PairLayout::Concat => a.iter().chain(b).copied().collect(),
        PairLayout::Absdiff => absdiff.collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairDataset {
    pub layout: PairLayout,
    pub features: Matrix,
    /// 1 when both samples share a class.
    pub labels: Vec<u8>,
    pub pair_index: Vec<(usize, usize)>,
}

impl PairDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn positive_rate(&self) -> f64 {
        self.labels.iter().map(|&l| f64::from(l)).sum::<f64>() / self.len().max(1) as f64
    }

    /// `i,j,label,features...` per row.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for ((row, label), (i, j)) in self.features.row_iter().zip(&self.labels).zip(&self.pair_index) {
            out.push_str(&format!("{i},{j},{label}"));
            for v in row {
                out.push_str(&format!(",{v:?}"));
            }
            out.push('\n');
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// All `N(N−1)/2` unordered pairs in `(i, j)`, `i < j` lexicographic order.
pub fn make_all_pairs(features: &Matrix, labels: &[usize], layout: PairLayout) -> Result<PairDataset> {
    let n = features.rows();
    if n != labels.len() {
        return Err(Error::shape("make_all_pairs", format!("{n} rows vs {} labels", labels.len())));
    }
    if n < 2 {
        return Err(Error::invalid(format!("pairing needs at least 2 samples, got {n}")));
    }
    let m = n * (n - 1) / 2;
    let width = layout.width(features.cols());
    let mut data = Vec::with_capacity(m * width);
    let mut pair_labels = Vec::with_capacity(m);
    let mut pair_index = Vec::with_capacity(m);
    for i in 0..n {
        for j in i + 1..n {
            data.extend(pair_row(features.row(i), features.row(j), layout));
            pair_labels.push(u8::from(labels[i] == labels[j]));
            pair_index.push((i, j));
        }
    }
    Ok(PairDataset {
        layout,
        features: Matrix::new(m, width, data)?,
        labels: pair_labels,
        pair_index,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GbdtConfig {
    pub n_rounds: usize,
    pub max_leaves: usize,
    /// `None` leaves depth unbounded.
    pub max_depth: Option<usize>,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    /// A split must gain strictly more than this.
    pub min_gain: f64,
    /// L2 penalty on leaf values.
    pub lambda: f64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            max_leaves: 31,
            max_depth: None,
            learning_rate: 0.1,
            min_samples_leaf: 20,
            min_gain: 0.0,
            lambda: 1.0,
        }
    }
}

impl GbdtConfig {
    fn validate(&self) -> Result<()> {
        if self.max_leaves < 1 || self.min_samples_leaf < 1 {
            return Err(Error::invalid("max_leaves and min_samples_leaf must be at least 1"));
        }
        if !(self.learning_rate > 0.0) || !(self.lambda >= 0.0) || !self.min_gain.is_finite() {
            return Err(Error::invalid("learning_rate must be positive and lambda non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// `nodes[0]` is the root.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature] < threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub format_version: u32,
    pub n_features: usize,
    /// Log-odds of the training positive rate.
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

impl GbdtModel {
    pub fn raw_score(&self, row: &[f64]) -> f64 {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("gbdt model serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: GbdtModel = serde_json::from_str(text)?;
        if m.format_version != GBDT_FORMAT_VERSION {
            return Err(Error::ModelFormat(format!("gbdt format_version {}", m.format_version)));
        }
        for t in &m.trees {
            for node in &t.nodes {
                if let Node::Split {
                    feature, left, right, ..
                } = *node
                {
                    if feature >= m.n_features || left >= t.nodes.len() || right >= t.nodes.len() {
                        return Err(Error::ModelFormat("tree node out of range".into()));
                    }
                }
            }
        }
        Ok(m)
    }
}

#[derive(Debug, Clone)]
pub struct GbdtFit {
    pub model: GbdtModel,
    /// Mean logistic loss on the training rows before the first round and
    /// after each round.
    pub loss_history: Vec<f64>,
}

fn logistic_loss(scores: &[f64], y: &[f64]) -> f64 {
    let total: f64 = scores
        .iter()
        .zip(y)
        .map(|(&s, &t)| {
            // ln(1 + e^s) − t·s, stable for large |s|.
            let softplus = if s > 0.0 { s + (-s).exp().ln_1p() } else { s.exp().ln_1p() };
            softplus - t * s
        })
        .sum();
    total / y.len() as f64
}

struct Candidate {
    node: usize,
    depth: usize,
    /// Row indices sorted by each feature.
    sorted: Vec<Vec<usize>>,
    grad: f64,
    hess: f64,
    best: Option<SplitChoice>,
}

#[derive(Clone, Copy)]
struct SplitChoice {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct TreeBuilder<'a> {
    x: &'a Matrix,
    g: &'a [f64],
    h: &'a [f64],
    cfg: &'a GbdtConfig,
}

impl TreeBuilder<'_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.cfg.lambda)
    }

    fn find_split(&self, c: &Candidate) -> Option<SplitChoice> {
        if self.cfg.max_depth.is_some_and(|d| c.depth >= d) {
            return None;
        }
        let n = c.sorted[0].len();
        let min_leaf = self.cfg.min_samples_leaf;
        if n < 2 * min_leaf {
            return None;
        }
        let parent = self.score(c.grad, c.hess);
        let mut best: Option<SplitChoice> = None;
        for (f, order) in c.sorted.iter().enumerate() {
            let (mut gl, mut hl) = (0.0, 0.0);
            for pos in 0..n - 1 {
                let i = order[pos];
                gl += self.g[i];
                hl += self.h[i];
                let left_n = pos + 1;
                if left_n < min_leaf || n - left_n < min_leaf {
                    continue;
                }
                let here = self.x.get(i, f);
                let next = self.x.get(order[pos + 1], f);
                if next <= here {
                    continue;
                }
                let gain = 0.5 * (self.score(gl, hl) + self.score(c.grad - gl, c.hess - hl) - parent);
                if gain > self.cfg.min_gain && best.is_none_or(|b| gain > b.gain) {
                    let mid = here + (next - here) / 2.0;
                    let threshold = if mid > here { mid } else { next };
                    best = Some(SplitChoice {
                        gain,
                        feature: f,
                        threshold,
                    });
                }
            }
        }
        best
    }

    fn leaf_value(&self, g: f64, h: f64) -> f64 {
        -g / (h + self.cfg.lambda)
    }

    fn build(&self, root_sorted: Vec<Vec<usize>>) -> Tree {
        let rows = &root_sorted[0];
        let grad: f64 = rows.iter().map(|&i| self.g[i]).sum();
        let hess: f64 = rows.iter().map(|&i| self.h[i]).sum();
        let mut nodes = vec![Node::Leaf {
            value: self.leaf_value(grad, hess),
        }];
        let mut root = Candidate {
            node: 0,
            depth: 0,
            sorted: root_sorted,
            grad,
            hess,
            best: None,
        };
        root.best = self.find_split(&root);
        let mut open = vec![root];
        let mut n_leaves = 1;
        let mut goes_left = vec![false; self.x.rows()];
        while n_leaves < self.cfg.max_leaves {
            // Highest gain first; ties go to the earliest node.
            let mut pick: Option<usize> = None;
            for (k, c) in open.iter().enumerate() {
                if let Some(b) = c.best {
                    if pick.is_none_or(|p| b.gain > open[p].best.unwrap().gain) {
                        pick = Some(k);
                    }
                }
            }
            let Some(k) = pick else { break };
            let c = open.swap_remove(k);
            let split = c.best.unwrap();
            for &i in &c.sorted[0] {
                goes_left[i] = self.x.get(i, split.feature) < split.threshold;
            }
            let (mut ls, mut rs) = (Vec::new(), Vec::new());
            for order in &c.sorted {
                let (l, r): (Vec<usize>, Vec<usize>) = order.iter().partition(|&&i| goes_left[i]);
                ls.push(l);
                rs.push(r);
            }
            let sums = |idx: &[usize]| -> (f64, f64) {
                idx.iter().fold((0.0, 0.0), |(g, h), &i| (g + self.g[i], h + self.h[i]))
            };
            let (lg, lh) = sums(&ls[0]);
            let (rg, rh) = sums(&rs[0]);
            let left = nodes.len();
            nodes.push(Node::Leaf {
                value: self.leaf_value(lg, lh),
            });
            nodes.push(Node::Leaf {
                value: self.leaf_value(rg, rh),
            });
            nodes[c.node] = Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left,
                right: left + 1,
            };
            n_leaves += 1;
            for (node, sorted, grad, hess) in [(left, ls, lg, lh), (left + 1, rs, rg, rh)] {
                let mut child = Candidate {
                    node,
                    depth: c.depth + 1,
                    sorted,
                    grad,
                    hess,
                    best: None,
                };
                child.best = self.find_split(&child);
                open.push(child);
            }
            // Keep ties resolved by node order regardless of swap_remove.
            open.sort_by_key(|c| c.node);
        }
        Tree { nodes }
    }
}

/// Newton boosting on the logistic loss.
pub fn gbdt_fit(x: &Matrix, labels: &[u8], config: &GbdtConfig) -> Result<GbdtFit> {
    config.validate()?;
    let n = x.rows();
    if n != labels.len() {
        return Err(Error::shape("gbdt_fit", format!("{n} rows vs {} labels", labels.len())));
    }
    if n == 0 || x.cols() == 0 {
        return Err(Error::invalid("gbdt_fit needs at least one row and one feature"));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::invalid("gbdt labels must be 0 or 1"));
    }
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let rate = y.iter().sum::<f64>() / n as f64;
    let clamped = rate.clamp(1e-12, 1.0 - 1e-12);
    let base_score = (clamped / (1.0 - clamped)).ln();
    let mut model = GbdtModel {
        format_version: GBDT_FORMAT_VERSION,
        n_features: x.cols(),
        base_score,
        learning_rate: config.learning_rate,
        trees: Vec::new(),
    };
    let mut scores = vec![base_score; n];
    let mut loss_history = vec![logistic_loss(&scores, &y)];
    if rate == 0.0 || rate == 1.0 {
        warn!("all {n} training pairs share one label; fitting the base score only");
        return Ok(GbdtFit { model, loss_history });
    }

    let root_sorted: Vec<Vec<usize>> = (0..x.cols())
        .map(|f| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
            idx
        })
        .collect();
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    for _ in 0..config.n_rounds {
        for i in 0..n {
            let p = sigmoid(scores[i]);
            g[i] = p - y[i];
            h[i] = p * (1.0 - p);
        }
        let tree = TreeBuilder {
            x,
            g: &g,
            h: &h,
            cfg: config,
        }
        .build(root_sorted.clone());
        for (i, s) in scores.iter_mut().enumerate() {
            *s += config.learning_rate * tree.predict_row(x.row(i));
        }
        model.trees.push(tree);
        loss_history.push(logistic_loss(&scores, &y));
    }
    Ok(GbdtFit { model, loss_history })
}

pub fn gbdt_train(pairs: &PairDataset, config: &GbdtConfig) -> Result<GbdtModel> {
    Ok(gbdt_fit(&pairs.features, &pairs.labels, config)?.model)
}

/// Probability of "same class" for each row.
pub fn gbdt_predict(model: &GbdtModel, features: &Matrix) -> Result<Vec<f64>> {
    if features.cols() != model.n_features {
        return Err(Error::shape(
            "gbdt_predict",
            format!("{} feature columns, model expects {}", features.cols(), model.n_features),
        ));
    }
    Ok(features.row_iter().map(|r| sigmoid(model.raw_score(r))).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEvaluation {
    pub n_pairs: usize,
    pub threshold: f64,
    pub accuracy: f64,
    /// Accuracy of always predicting the more frequent label.
    pub majority_baseline: f64,
    pub positive_rate: f64,
    pub confusion: Confusion,
}

/// Scores thresholded probabilities (`p >= threshold` means "same").
pub fn evaluate_predictions(probs: &[f64], labels: &[u8], threshold: f64) -> Result<PairEvaluation> {
    if probs.len() != labels.len() {
        return Err(Error::shape(
            "evaluate_pairs",
            format!("{} predictions vs {} labels", probs.len(), labels.len()),
        ));
    }
    if labels.is_empty() {
        return Err(Error::invalid("no pairs to evaluate"));
    }
    let mut c = Confusion {
        true_positive: 0,
        false_positive: 0,
        true_negative: 0,
        false_negative: 0,
    };
    for (&p, &y) in probs.iter().zip(labels) {
        match (p >= threshold, y == 1) {
            (true, true) => c.true_positive += 1,
            (true, false) => c.false_positive += 1,
            (false, false) => c.true_negative += 1,
            (false, true) => c.false_negative += 1,
        }
    }
    let n = labels.len() as f64;
    let positives = (c.true_positive + c.false_negative) as f64;
    Ok(PairEvaluation {
        n_pairs: labels.len(),
        threshold,
        accuracy: (c.true_positive + c.true_negative) as f64 / n,
        majority_baseline: positives.max(n - positives) / n,
        positive_rate: positives / n,
        confusion: c,
    })
}

pub fn evaluate_pairs(model: &GbdtModel, pairs: &PairDataset, threshold: f64) -> Result<PairEvaluation> {
    let probs = gbdt_predict(model, &pairs.features)?;
    evaluate_predictions(&probs, &pairs.labels, threshold)
}
