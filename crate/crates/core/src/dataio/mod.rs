//! Dataset ingestion, preprocessing, augmentation and splitting.

mod features;
mod image;
mod manifest;
mod pnm;
mod split;

use std::collections::BTreeMap;

pub use features::{load_features_csv, write_features_csv};
pub use image::{
    augment, flip_horizontal, normalize, preprocess, resize_bilinear, rotate_nearest, to_grayscale,
    AugmentConfig, GrayImage, ImageSample, ValueRange, IMAGE_PIXELS, IMAGE_SIDE,
};
pub use manifest::{load_manifest, DatasetManifest, ManifestRecord};
pub use pnm::{decode_image, decode_pnm, encode_ascii, encode_binary, Channels, Raster};
pub use split::{class_disjoint_split, stratified_holdout, stratified_kfold, training_indices, SplitSpec};

use crate::error::{Error, Result};
use crate::math::Matrix;

/// Feature rows with aligned integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(x: Matrix, labels: Vec<usize>) -> Result<Self> {
        if x.rows() != labels.len() {
            return Err(Error::shape(
                "Dataset::new",
                format!("{} rows vs {} labels", x.rows(), labels.len()),
            ));
        }
        Ok(Self { x, labels })
    }

    pub fn from_samples(samples: &[ImageSample]) -> Result<Self> {
        let rows: Vec<&[f64]> = samples.iter().map(|s| s.pixels.as_slice()).collect();
        Self::new(Matrix::from_rows(&rows)?, samples.iter().map(|s| s.label).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    /// One more than the largest label.
    pub fn n_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Rows whose label is in `classes`.
    pub fn filter_classes(&self, classes: &[usize]) -> Dataset {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| classes.contains(&self.labels[i])).collect();
        self.subset(&idx)
    }

    /// Renumbers labels to `0..C` in ascending order of the original ids and
    /// returns the original id of each new label.
    pub fn relabel_contiguous(&mut self) -> Vec<usize> {
        let mut map = BTreeMap::new();
        for &l in &self.labels {
            map.insert(l, 0);
        }
        for (new, v) in map.values_mut().enumerate() {
            *v = new;
        }
        for l in &mut self.labels {
            *l = map[l];
        }
        map.into_keys().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relabel_is_order_preserving() {
        let mut d = Dataset::new(Matrix::zeros(4, 1), vec![7, 3, 7, 9]).unwrap();
        assert_eq!(d.relabel_contiguous(), vec![3, 7, 9]);
        assert_eq!(d.labels, vec![1, 0, 1, 2]);
        assert_eq!(d.n_classes(), 3);
    }
}
