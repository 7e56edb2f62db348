//! Grayscale conversion, resizing, normalisation and augmentation.

use serde::{Deserialize, Serialize};

use super::pnm::{Channels, Raster};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Side length of every preprocessed sample.
pub const IMAGE_SIDE: usize = 64;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;

/// Single-channel image with intensities on the 0..=255 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::shape(
                "GrayImage",
                format!("{width}x{height} needs {} pixels, got {}", width * height, data.len()),
            ));
        }
        Ok(Self { width, height, data })
    }

    #[inline]
    fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Rounds and clamps back to an 8-bit raster.
    pub fn to_raster(&self) -> Raster {
        let data = self.data.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
        Raster {
            width: self.width,
            height: self.height,
            channels: Channels::Gray,
            data,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueRange {
    /// `[0, 1]`
    #[default]
    Unit,
    /// `[-1, 1]`
    Symmetric,
}

impl ValueRange {
    pub fn min(self) -> f64 {
        match self {
            ValueRange::Unit => 0.0,
            ValueRange::Symmetric => -1.0,
        }
    }

    pub fn max(self) -> f64 {
        1.0
    }

    pub fn contains(self, v: f64) -> bool {
        v >= self.min() && v <= self.max()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageSample {
    /// Row-major 64×64 pixels.
    pub pixels: Vec<f64>,
    pub label: usize,
    pub range: ValueRange,
}

/// Rec. 601 luma. Gray rasters pass through unchanged.
pub fn to_grayscale(raster: &Raster) -> GrayImage {
    let data = match raster.channels {
        Channels::Gray => raster.data.iter().map(|&v| f64::from(v)).collect(),
        Channels::Rgb => raster
            .data
            .chunks_exact(3)
            .map(|p| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]))
            .collect(),
    };
    GrayImage {
        width: raster.width,
        height: raster.height,
        data,
    }
}

/// Bilinear resize with half-pixel-centre sampling.
pub fn resize_bilinear(src: &GrayImage, out_w: usize, out_h: usize) -> Result<GrayImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::invalid(format!("resize target {out_w}x{out_h} has a zero dimension")));
    }
    if src.width == 0 || src.height == 0 {
        return Err(Error::invalid("resize source is empty"));
    }
    let sx = src.width as f64 / out_w as f64;
    let sy = src.height as f64 / out_h as f64;
    let coord = |d: usize, scale: f64, len: usize| -> (usize, usize, f64) {
        let c = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f64);
        let c0 = c.floor() as usize;
        let c1 = (c0 + 1).min(len - 1);
        (c0, c1, c - c0 as f64)
    };
    let xs: Vec<_> = (0..out_w).map(|x| coord(x, sx, src.width)).collect();
    let mut data = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        let (y0, y1, fy) = coord(y, sy, src.height);
        for &(x0, x1, fx) in &xs {
            let top = src.at(x0, y0) * (1.0 - fx) + src.at(x1, y0) * fx;
            let bottom = src.at(x0, y1) * (1.0 - fx) + src.at(x1, y1) * fx;
            data.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    Ok(GrayImage {
        width: out_w,
        height: out_h,
        data,
    })
}

/// Maps 0..=255 intensities into the requested range.
pub fn normalize(img: &GrayImage, range: ValueRange) -> Vec<f64> {
    img.data
        .iter()
        .map(|&p| match range {
            ValueRange::Unit => p / 255.0,
            ValueRange::Symmetric => p / 127.5 - 1.0,
        })
        .map(|v| v.clamp(range.min(), range.max()))
        .collect()
}

/// Grayscale, resize to 64×64, normalise.
pub fn preprocess(raster: &Raster, label: usize, range: ValueRange) -> Result<ImageSample> {
    let gray = to_grayscale(raster);
    let resized = if gray.width == IMAGE_SIDE && gray.height == IMAGE_SIDE {
        gray
    } else {
        resize_bilinear(&gray, IMAGE_SIDE, IMAGE_SIDE)?
    };
    Ok(ImageSample {
        pixels: normalize(&resized, range),
        label,
        range,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentConfig {
    pub flip_probability: f64,
    /// Rotation angle is drawn uniformly from `[-max, +max]` degrees.
    pub max_rotation_deg: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            flip_probability: 0.5,
            max_rotation_deg: 15.0,
        }
    }
}

pub fn flip_horizontal(pixels: &[f64], width: usize, height: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(pixels.len());
    for y in 0..height {
        out.extend(pixels[y * width..(y + 1) * width].iter().rev());
    }
    out
}

/// Rotates about the image centre with nearest-neighbour sampling;
/// uncovered pixels take `fill`.
pub fn rotate_nearest(pixels: &[f64], width: usize, height: usize, angle_deg: f64, fill: f64) -> Vec<f64> {
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(pixels.len());
    for y in 0..height {
        for x in 0..width {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let sx = (cos * dx + sin * dy + cx).round();
            let sy = (-sin * dx + cos * dy + cy).round();
            if sx >= 0.0 && sy >= 0.0 && (sx as usize) < width && (sy as usize) < height {
                out.push(pixels[sy as usize * width + sx as usize]);
            } else {
                out.push(fill);
            }
        }
    }
    out
}

/// Random horizontal flip followed by a random rotation. Always consumes two
/// draws from `rng`.
pub fn augment(img: &ImageSample, rng: &mut SeededRng, cfg: &AugmentConfig) -> ImageSample {
    let flip = rng.bernoulli(cfg.flip_probability);
    let angle = rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg);
    let side = (img.pixels.len() as f64).sqrt() as usize;
    let base = if flip {
        flip_horizontal(&img.pixels, side, side)
    } else {
        img.pixels.clone()
    };
    ImageSample {
        pixels: rotate_nearest(&base, side, side, angle, img.range.min()),
        label: img.label,
        range: img.range,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(w: usize, h: usize, data: &[f64]) -> GrayImage {
        GrayImage::new(w, h, data.to_vec()).unwrap()
    }

    #[test]
    fn luma_examples() {
        let r = Raster::rgb(3, 1, vec![255, 255, 255, 255, 0, 0, 77, 77, 77]).unwrap();
        let g = to_grayscale(&r);
        assert!((g.data[0] - 255.0).abs() < 1e-12);
        assert!((g.data[1] - 76.245).abs() < 1e-12);
        assert!((g.data[2] - 77.0).abs() < 1e-12);
    }

    #[test]
    fn resize_identity_and_constant() {
        let src = gray(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(resize_bilinear(&src, 3, 2).unwrap(), src);
        let c = gray(5, 7, &[42.0; 35]);
        let out = resize_bilinear(&c, 64, 64).unwrap();
        assert!(out.data.iter().all(|&v| (v - 42.0).abs() < 1e-12));
        let out = resize_bilinear(&c, 2, 3).unwrap();
        assert!(out.data.iter().all(|&v| (v - 42.0).abs() < 1e-12));
        assert!(resize_bilinear(&c, 0, 3).is_err());
    }

    #[test]
    fn resize_two_by_two_to_one() {
        // Output centre (0.5·2 − 0.5 = 0.5, 0.5) sits midway between all four
        // source pixels: ((0 + 100)/2 + (100 + 200)/2)/2 = 100.
        let src = gray(2, 2, &[0.0, 100.0, 100.0, 200.0]);
        let out = resize_bilinear(&src, 1, 1).unwrap();
        assert_eq!(out.data, vec![100.0]);
    }

    #[test]
    fn normalize_examples() {
        let img = gray(3, 1, &[0.0, 127.5, 255.0]);
        assert_eq!(normalize(&img, ValueRange::Symmetric), vec![-1.0, 0.0, 1.0]);
        assert_eq!(normalize(&img, ValueRange::Unit), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn no_flip_zero_angle_is_identity() {
        let pixels: Vec<f64> = (0..IMAGE_PIXELS).map(|i| (i % 97) as f64 / 96.0).collect();
        let cfg = AugmentConfig {
            flip_probability: 0.0,
            max_rotation_deg: 0.0,
        };
        let s = ImageSample {
            pixels: pixels.clone(),
            label: 3,
            range: ValueRange::Unit,
        };
        let out = augment(&s, &mut SeededRng::new(1), &cfg);
        assert_eq!(out.pixels, pixels);
        assert_eq!(out.label, 3);
    }

    #[test]
    fn double_flip_is_identity() {
        let pixels: Vec<f64> = (0..12).map(f64::from).collect();
        let once = flip_horizontal(&pixels, 4, 3);
        assert_eq!(&once[..4], &[3.0, 2.0, 1.0, 0.0]);
        assert_eq!(flip_horizontal(&once, 4, 3), pixels);
    }

    #[test]
    fn rotation_by_right_angle_on_odd_grid() {
        let p: Vec<f64> = (0..9).map(f64::from).collect();
        let r = rotate_nearest(&p, 3, 3, 90.0, -1.0);
        // Four quarter turns return the original.
        let mut q = r.clone();
        for _ in 0..3 {
            q = rotate_nearest(&q, 3, 3, 90.0, -1.0);
        }
        assert_eq!(q, p);
        assert_ne!(r, p);
        assert_eq!(r[4], 4.0);
    }

    #[test]
    fn augment_stays_in_range() {
        let mut rng = SeededRng::new(11);
        let pixels: Vec<f64> = (0..IMAGE_PIXELS).map(|i| ((i * 37) % 255) as f64 / 127.5 - 1.0).collect();
        let s = ImageSample {
            pixels,
            label: 0,
            range: ValueRange::Symmetric,
        };
        for _ in 0..20 {
            let out = augment(&s, &mut rng, &AugmentConfig::default());
            assert_eq!(out.pixels.len(), IMAGE_PIXELS);
            assert!(out.pixels.iter().all(|&v| ValueRange::Symmetric.contains(v)));
        }
    }

    #[test]
    fn preprocess_shapes_any_input() {
        let r = Raster::rgb(5, 3, (0..45).map(|v| (v * 5) as u8).collect()).unwrap();
        let s = preprocess(&r, 2, ValueRange::Symmetric).unwrap();
        assert_eq!(s.pixels.len(), IMAGE_PIXELS);
        assert!(s.pixels.iter().all(|&v| ValueRange::Symmetric.contains(v)));
    }
}
