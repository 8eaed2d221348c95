//! Patch preprocessing: bilinear resampling, flattening, normalization.

use serde::{Deserialize, Serialize};

use crate::dataio::ubc::{Patch, PATCH_SIDE};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const STD_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    PerPatchStandardize,
    Scale01,
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standardize" | "per_patch_standardize" => Ok(Normalization::PerPatchStandardize),
            "scale01" | "scale_0_1" => Ok(Normalization::Scale01),
            _ => Err(Error::Usage(format!("unknown normalization '{s}' (standardize|scale01)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub target_side: usize,
    pub normalization: Normalization,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            target_side: 16,
            normalization: Normalization::PerPatchStandardize,
        }
    }
}

/// Bilinear resampling with pixel-center alignment and edge clamping.
pub fn resample_bilinear(src: &[f64], src_side: usize, dst_side: usize) -> Vec<f64> {
    assert_eq!(src.len(), src_side * src_side);
    if src_side == dst_side {
        return src.to_vec();
    }
    let scale = src_side as f64 / dst_side as f64;
    let last = (src_side - 1) as f64;
    let coord = |i: usize| -> (usize, usize, f64) {
        let c = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
        let lo = c.floor() as usize;
        let hi = (lo + 1).min(src_side - 1);
        (lo, hi, c - lo as f64)
    };
    let mut out = Vec::with_capacity(dst_side * dst_side);
    for y in 0..dst_side {
        let (y0, y1, fy) = coord(y);
        for x in 0..dst_side {
            let (x0, x1, fx) = coord(x);
            let top = src[y0 * src_side + x0] * (1.0 - fx) + src[y0 * src_side + x1] * fx;
            let bottom = src[y1 * src_side + x0] * (1.0 - fx) + src[y1 * src_side + x1] * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

/// Resamples and normalizes a square grayscale grid of any side.
pub fn preprocess_pixels(pixels: &[u8], side: usize, cfg: &PreprocessConfig) -> Vec<f64> {
    let src: Vec<f64> = pixels.iter().map(|&p| p as f64).collect();
    let mut v = resample_bilinear(&src, side, cfg.target_side);
    match cfg.normalization {
        Normalization::Scale01 => v.iter_mut().for_each(|x| *x /= 255.0),
        Normalization::PerPatchStandardize => {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt().max(STD_FLOOR);
            v.iter_mut().for_each(|x| *x = (*x - mean) / sd);
        }
    }
    v
}

pub fn preprocess<T: Scalar>(patch: &Patch, cfg: &PreprocessConfig) -> Vec<T> {
    preprocess_pixels(&patch.pixels, PATCH_SIDE, cfg)
        .into_iter()
        .map(T::narrow)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patch(v: u8) -> Patch {
        Patch {
            pixels: vec![v; PATCH_SIDE * PATCH_SIDE],
            patch_id: 0,
            point3d_id: 0,
        }
    }

    #[test]
    fn constant_patch_standardizes_to_zero() {
        let out = preprocess::<f32>(&patch(77), &PreprocessConfig::default());
        assert_eq!(out.len(), 256);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn white_patch_scales_to_one() {
        let cfg = PreprocessConfig {
            target_side: 8,
            normalization: Normalization::Scale01,
        };
        let out = preprocess::<f64>(&patch(255), &cfg);
        assert_eq!(out.len(), 64);
        assert!(out.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn two_by_two_to_one_is_mean() {
        // center of the 1x1 output sits at (0.5, 0.5): equal weights on all four
        let out = resample_bilinear(&[10.0, 20.0, 30.0, 60.0], 2, 1);
        assert_eq!(out, vec![(10.0 + 20.0 + 30.0 + 60.0) / 4.0]);
    }

    #[test]
    fn standardized_output_has_unit_variance() {
        let mut p = patch(0);
        for (i, px) in p.pixels.iter_mut().enumerate() {
            *px = (i % 251) as u8;
        }
        let out = preprocess::<f64>(&p, &PreprocessConfig::default());
        let mean = out.iter().sum::<f64>() / out.len() as f64;
        let var = out.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / out.len() as f64;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-9);
    }

    #[test]
    fn parses_normalization_names() {
        assert_eq!("scale01".parse::<Normalization>().unwrap(), Normalization::Scale01);
        assert!("zscore".parse::<Normalization>().is_err());
    }
}
