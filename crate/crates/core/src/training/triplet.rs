use std::collections::BTreeMap;

use log::debug;
use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::dataio::{augment, AugmentConfig, Dataset, ImageSample, ValueRange, IMAGE_PIXELS};
use crate::error::{Error, Result};
use crate::math::{pairwise_sq_euclidean, sq_euclidean, Matrix};
use crate::nn::{AdamConfig, AdamState, BackwardTarget, Head, MlpModel, TripletMargin};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

/// Draws a P×K batch: `P = batch_size / samples_per_class` distinct classes
/// among those with at least two samples, `batch_size` samples split evenly
/// over them. When fewer than `P` classes are eligible all of them are used
/// with proportionally more samples each. Within a class sampling is without
/// replacement unless the class is too small, in which case every member is
/// taken once and the rest drawn with replacement.
pub fn sample_triplet_batch(
    labels: &[usize],
    batch_size: usize,
    samples_per_class: usize,
    rng: &mut SeededRng,
) -> Result<Vec<usize>> {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut eligible: Vec<&Vec<usize>> = by_class.values().filter(|m| m.len() >= 2).collect();
    if eligible.len() < 2 {
        return Err(Error::invalid(format!(
            "triplet sampling needs >= 2 classes with >= 2 samples, found {}",
            eligible.len()
        )));
    }
    let wanted = (batch_size / samples_per_class.max(1)).max(1);
    if batch_size < 4 {
        return Err(Error::invalid("triplet batches need at least 4 samples"));
    }
    let n_classes = wanted.min(eligible.len()).max(2).min(batch_size / 2);
    rng.shuffle(&mut eligible);
    let chosen = &eligible[..n_classes];
    let base = batch_size / n_classes;
    let extra = batch_size % n_classes;
    let mut batch = Vec::with_capacity(batch_size);
    for (ci, members) in chosen.iter().enumerate() {
        let count = base + usize::from(ci < extra);
        let mut pool: Vec<usize> = (*members).clone();
        rng.shuffle(&mut pool);
        if pool.len() >= count {
            batch.extend_from_slice(&pool[..count]);
        } else {
            batch.extend_from_slice(&pool);
            for _ in pool.len()..count {
                batch.push(members[rng.below(members.len())]);
            }
        }
    }
    Ok(batch)
}

/// For every ordered (anchor, positive) pair of distinct same-class samples,
/// picks the closest negative that is still farther than the positive
/// (semi-hard); if there is none, the closest negative overall. Ties go to
/// the lower index. Pairs without any negative in the batch are skipped.
pub fn mine_semi_hard(dist: &Matrix, labels: &[usize]) -> Result<Vec<Triplet>> {
    let n = labels.len();
    if dist.shape() != (n, n) {
        return Err(Error::shape(
            "mine_semi_hard",
            format!("distance matrix {:?} for {n} labels", dist.shape()),
        ));
    }
    let mut out = Vec::new();
    for a in 0..n {
        for p in 0..n {
            if p == a || labels[p] != labels[a] {
                continue;
            }
            let d_ap = dist.get(a, p);
            let mut semi: Option<(f64, usize)> = None;
            let mut hardest: Option<(f64, usize)> = None;
            for neg in (0..n).filter(|&j| labels[j] != labels[a]) {
                let d = dist.get(a, neg);
                if hardest.is_none_or(|(hd, _)| d < hd) {
                    hardest = Some((d, neg));
                }
                if d > d_ap && semi.is_none_or(|(sd, _)| d < sd) {
                    semi = Some((d, neg));
                }
            }
            if let Some((_, negative)) = semi.or(hardest) {
                out.push(Triplet {
                    anchor: a,
                    positive: p,
                    negative,
                });
            }
        }
    }
    Ok(out)
}

/// Mean triplet loss over `triplets` with distances recomputed directly from
/// `emb`, and its gradient with respect to every embedding row.
pub fn triplet_loss_and_grad(emb: &Matrix, triplets: &[Triplet], margin: TripletMargin) -> (f64, Matrix) {
    let mut grad = Matrix::zeros(emb.rows(), emb.cols());
    if triplets.is_empty() {
        return (0.0, grad);
    }
    let scale = 1.0 / triplets.len() as f64;
    let mut loss = 0.0;
    let dim = emb.cols();
    let mut diff_ap = vec![0.0; dim];
    let mut diff_an = vec![0.0; dim];
    for t in triplets {
        let (a, p, n) = (emb.row(t.anchor), emb.row(t.positive), emb.row(t.negative));
        let d_ap = sq_euclidean(a, p);
        let d_an = sq_euclidean(a, n);
        loss += margin.loss(d_ap, d_an);
        let w = margin.slope(d_ap, d_an) * scale;
        if w == 0.0 {
            continue;
        }
        for k in 0..dim {
            diff_ap[k] = 2.0 * w * (a[k] - p[k]);
            diff_an[k] = 2.0 * w * (a[k] - n[k]);
        }
        for k in 0..dim {
            let v = grad.get(t.anchor, k) + diff_ap[k] - diff_an[k];
            grad.set(t.anchor, k, v);
            let v = grad.get(t.positive, k) - diff_ap[k];
            grad.set(t.positive, k, v);
            let v = grad.get(t.negative, k) + diff_an[k];
            grad.set(t.negative, k, v);
        }
    }
    (loss * scale, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletHistory {
    /// Mean loss of each step over its mined triplets (0 when none were mined).
    pub step_loss: Vec<f64>,
    pub triplets_per_step: Vec<usize>,
    /// 0-based steps at which mining produced no triplet.
    pub empty_steps: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct TripletOutcome {
    pub model: MlpModel,
    pub history: TripletHistory,
}

/// Trains an embedder with semi-hard mined triplets for
/// `epochs × steps_per_epoch` Adam steps. When `augmentation` is given each
/// batch row is treated as a 64×64 image and randomly flipped and rotated.
pub fn train_triplet(
    mut model: MlpModel,
    data: &Dataset,
    config: &TrainConfig,
    augmentation: Option<(&AugmentConfig, ValueRange)>,
) -> Result<TripletOutcome> {
    config.validate()?;
    if !matches!(model.head(), Head::Embedder { .. }) {
        return Err(Error::invalid("train_triplet needs an embedder head"));
    }
    if augmentation.is_some() && data.dim() != IMAGE_PIXELS {
        return Err(Error::invalid(format!(
            "augmentation needs 64x64 image rows, data has {} columns",
            data.dim()
        )));
    }
    let mut adam = AdamState::new(&model, AdamConfig::with_lr(config.lr))?;
    let mut rng = SeededRng::new(config.seed);
    let mut history = TripletHistory {
        step_loss: Vec::new(),
        triplets_per_step: Vec::new(),
        empty_steps: Vec::new(),
    };
    let total = config.epochs * config.steps_per_epoch;
    for step in 0..total {
        let epoch = step / config.steps_per_epoch + 1;
        let idx = sample_triplet_batch(&data.labels, config.batch_size, config.samples_per_class, &mut rng)?;
        let labels: Vec<usize> = idx.iter().map(|&i| data.labels[i]).collect();
        let mut x = data.x.select_rows(&idx);
        if let Some((aug, range)) = augmentation {
            for r in 0..x.rows() {
                let sample = ImageSample {
                    pixels: x.row(r).to_vec(),
                    label: labels[r],
                    range,
                };
                let out = augment(&sample, &mut rng, aug);
                x.row_mut(r).copy_from_slice(&out.pixels);
            }
        }
        let acts = model.forward(&x)?;
        let emb = acts.last();
        let dist = pairwise_sq_euclidean(emb, emb)?;
        let triplets = mine_semi_hard(&dist, &labels)?;
        history.triplets_per_step.push(triplets.len());
        if triplets.is_empty() {
            debug!("step {step}: no triplets mined");
            history.step_loss.push(0.0);
            history.empty_steps.push(step);
            continue;
        }
        let (loss, grad) = triplet_loss_and_grad(emb, &triplets, config.margin);
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        history.step_loss.push(loss);
        let grads = model.backward(&acts, BackwardTarget::Upstream(&grad))?;
        adam.step(&mut model, &grads).map_err(|e| match e {
            Error::NonFiniteGradient(_) => Error::Diverged { epoch },
            other => other,
        })?;
    }
    Ok(TripletOutcome { model, history })
}
