use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Matrix;

/// Lower bound applied to probabilities before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// Beyond this argument softplus switches to `x + ln(1 + e^-x)`.
const SOFTPLUS_SWITCH: f64 = 30.0;

/// Mean of `-ln p[label]` over the batch.
pub fn cross_entropy(probs: &Matrix, labels: &[usize]) -> Result<f64> {
    if probs.rows() != labels.len() {
        return Err(Error::shape(
            "cross_entropy",
            format!("{} rows vs {} labels", probs.rows(), labels.len()),
        ));
    }
    if probs.rows() == 0 {
        return Err(Error::invalid("cross_entropy of an empty batch"));
    }
    let mut total = 0.0;
    for (row, &l) in probs.row_iter().zip(labels) {
        let p = *row.get(l).ok_or_else(|| {
            Error::invalid(format!("label {l} out of range for {} classes", probs.cols()))
        })?;
        total -= p.max(PROB_FLOOR).ln();
    }
    Ok(total / labels.len() as f64)
}

#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > SOFTPLUS_SWITCH {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Soft-margin triplet loss `ln(1 + exp(d_ap − d_an))`.
pub fn triplet_soft_margin(d_ap: f64, d_an: f64) -> f64 {
    softplus(d_ap - d_an)
}

/// Triplet margin formulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "margin")]
pub enum TripletMargin {
    /// `softplus(d_ap − d_an)`
    Soft,
    /// `max(0, d_ap − d_an + m)`
    Fixed(f64),
}

impl TripletMargin {
    pub fn loss(self, d_ap: f64, d_an: f64) -> f64 {
        match self {
            TripletMargin::Soft => triplet_soft_margin(d_ap, d_an),
            TripletMargin::Fixed(m) => (d_ap - d_an + m).max(0.0),
        }
    }

    /// Derivative of the loss with respect to `d_ap` (equal to minus the
    /// derivative with respect to `d_an`).
    pub fn slope(self, d_ap: f64, d_an: f64) -> f64 {
        match self {
            TripletMargin::Soft => sigmoid(d_ap - d_an),
            TripletMargin::Fixed(m) => {
                if d_ap - d_an + m > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}
