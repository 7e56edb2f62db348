//! Seeded synthetic datasets: blob images, sign-pattern features and tight
//! duplicate clusters.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::{encode_binary, preprocess, Dataset, Raster, ValueRange, IMAGE_SIDE};
use crate::error::{Error, Result};
use crate::math::Matrix;
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlobConfig {
    pub n_samples: usize,
    pub n_classes: usize,
    /// Gaussian blob radius in pixels.
    pub blob_sigma: f64,
    /// Per-sample jitter of the blob centre in pixels.
    pub jitter: f64,
    /// Additive pixel noise (0–255 scale).
    pub noise: f64,
}

impl Default for BlobConfig {
    fn default() -> Self {
        Self {
            n_samples: 200,
            n_classes: 3,
            blob_sigma: 6.0,
            jitter: 2.0,
            noise: 8.0,
        }
    }
}

/// 64×64 grayscale images with one bright blob whose position depends on the
/// class. Samples are dealt to classes round-robin.
pub fn blob_images(cfg: &BlobConfig, seed: u64) -> Result<Vec<(Raster, usize)>> {
    if cfg.n_classes < 1 || cfg.n_samples < cfg.n_classes {
        return Err(Error::invalid("blob images need n_samples >= n_classes >= 1"));
    }
    let mut rng = SeededRng::new(seed);
    let side = IMAGE_SIDE as f64;
    let mut out = Vec::with_capacity(cfg.n_samples);
    for i in 0..cfg.n_samples {
        let class = i % cfg.n_classes;
        let angle = 2.0 * PI * class as f64 / cfg.n_classes as f64;
        let cx = side / 2.0 + 18.0 * angle.cos() + cfg.jitter * rng.next_normal();
        let cy = side / 2.0 + 18.0 * angle.sin() + cfg.jitter * rng.next_normal();
        let mut data = Vec::with_capacity(IMAGE_SIDE * IMAGE_SIDE);
        for y in 0..IMAGE_SIDE {
            for x in 0..IMAGE_SIDE {
                let d2 = (x as f64 + 0.5 - cx).powi(2) + (y as f64 + 0.5 - cy).powi(2);
                let v = 20.0 + 200.0 * (-d2 / (2.0 * cfg.blob_sigma * cfg.blob_sigma)).exp() + cfg.noise * rng.next_normal();
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
        out.push((Raster::gray(IMAGE_SIDE, IMAGE_SIDE, data)?, class));
    }
    Ok(out)
}

/// Blob images preprocessed into a 4096-dim dataset.
pub fn blob_dataset(cfg: &BlobConfig, seed: u64, range: ValueRange) -> Result<Dataset> {
    let samples = blob_images(cfg, seed)?
        .iter()
        .map(|(r, c)| preprocess(r, *c, range))
        .collect::<Result<Vec<_>>>()?;
    Dataset::from_samples(&samples)
}

/// Writes `root/class_XX/img_XXXX.pgm`, one directory per class.
pub fn write_image_tree(root: &Path, images: &[(Raster, usize)]) -> Result<()> {
    for (i, (raster, class)) in images.iter().enumerate() {
        let dir = root.join(format!("class_{class:02}"));
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = dir.join(format!("img_{i:04}.pgm"));
        std::fs::write(&path, encode_binary(raster)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignPatternConfig {
    pub n_per_class: usize,
    pub nuisance_dims: usize,
    pub nuisance_std: f64,
    /// Minimum distance of a latent coordinate from zero.
    pub margin: f64,
}

impl Default for SignPatternConfig {
    fn default() -> Self {
        Self {
            n_per_class: 50,
            nuisance_dims: 30,
            nuisance_std: 3.0,
            margin: 1.0,
        }
    }
}

/// Four classes given by the signs of two latent coordinates, padded with
/// high-variance nuisance dimensions that swamp raw Euclidean distances.
/// Columns 0 and 1 hold the latent coordinates.
pub fn sign_pattern(cfg: &SignPatternConfig, seed: u64) -> Result<Dataset> {
    if cfg.n_per_class == 0 {
        return Err(Error::invalid("n_per_class must be at least 1"));
    }
    let mut rng = SeededRng::new(seed);
    let dim = 2 + cfg.nuisance_dims;
    let n = 4 * cfg.n_per_class;
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 4;
        let sx = if class == 0 || class == 3 { 1.0 } else { -1.0 };
        let sy = if class < 2 { 1.0 } else { -1.0 };
        for s in [sx, sy] {
            data.push(s * (cfg.margin + 0.5 * rng.next_normal().abs()));
        }
        data.extend(rng.normals(cfg.nuisance_dims).iter().map(|z| cfg.nuisance_std * z));
        labels.push(class);
    }
    Dataset::new(Matrix::new(n, dim, data)?, labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterConfig {
    pub n_classes: usize,
    pub n_per_class: usize,
    pub dim: usize,
    /// Within-class standard deviation around a standard-normal centre.
    pub spread: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            n_classes: 10,
            n_per_class: 10,
            dim: 32,
            spread: 1e-3,
        }
    }
}

/// Isotropic Gaussian clusters; with the default spread every class is a
/// near-duplicate of a single vector.
pub fn gaussian_clusters(cfg: &ClusterConfig, seed: u64) -> Result<Dataset> {
    if cfg.n_classes == 0 || cfg.n_per_class == 0 || cfg.dim == 0 {
        return Err(Error::invalid("cluster counts and dim must be at least 1"));
    }
    let mut rng = SeededRng::new(seed);
    let centres: Vec<Vec<f64>> = (0..cfg.n_classes).map(|_| rng.normals(cfg.dim)).collect();
    let n = cfg.n_classes * cfg.n_per_class;
    let mut data = Vec::with_capacity(n * cfg.dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % cfg.n_classes;
        data.extend(centres[class].iter().map(|c| c + cfg.spread * rng.next_normal()));
        labels.push(class);
    }
    Dataset::new(Matrix::new(n, cfg.dim, data)?, labels)
}
