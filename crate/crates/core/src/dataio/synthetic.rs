//! Deterministic prototype-plus-noise stand-in for a patch corpus.
//!
//! Each "3D point" is a prototype drawn uniformly from `[0,1]^dim`; its patches
//! are the prototype plus isotropic Gaussian noise. Vector `i` belongs to point
//! `i / patches_per_point`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataio::{Dataset, PairIndex};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_points: usize,
    pub patches_per_point: usize,
    pub dim: usize,
    pub noise_sigma: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_points: 50,
            patches_per_point: 8,
            dim: 256,
            noise_sigma: 0.05,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_points < 2 {
            return Err(Error::Usage(format!("need at least 2 points, got {}", self.n_points)));
        }
        if self.patches_per_point < 2 {
            return Err(Error::Usage(format!(
                "need at least 2 patches per point, got {}",
                self.patches_per_point
            )));
        }
        if self.dim == 0 {
            return Err(Error::Usage("dimension must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Usage(format!("noise sigma must be ≥ 0, got {}", self.noise_sigma)));
        }
        Ok(())
    }
}

pub fn generate_synthetic<T: Scalar>(seed: u64, cfg: &SyntheticConfig) -> Result<Dataset<T>> {
    generate_synthetic_stream(seed, 0, cfg)
}

/// Like [`generate_synthetic`] but on an independent ChaCha stream, so one seed
/// can yield disjoint train and validation sets.
///
/// Emits every within-point match pair plus the same number of non-match
/// pairs whose members come from different points; the pair list is shuffled.
pub fn generate_synthetic_stream<T: Scalar>(
    seed: u64,
    stream: u64,
    cfg: &SyntheticConfig,
) -> Result<Dataset<T>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let SyntheticConfig {
        n_points,
        patches_per_point: per,
        dim,
        noise_sigma,
    } = *cfg;

    let prototypes: Vec<f64> = (0..n_points * dim).map(|_| rng.random::<f64>()).collect();
    let noise = Normal::new(0.0, noise_sigma).map_err(|e| Error::Usage(e.to_string()))?;
    let mut vectors = Vec::with_capacity(n_points * per * dim);
    for p in 0..n_points {
        let proto = &prototypes[p * dim..(p + 1) * dim];
        for _ in 0..per {
            vectors.extend(proto.iter().map(|&v| {
                let n = if noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                T::narrow(v + n)
            }));
        }
    }

    let mut pairs = Vec::new();
    for p in 0..n_points {
        for i in 0..per {
            for j in i + 1..per {
                pairs.push(PairIndex::new(p * per + i, p * per + j, true));
            }
        }
    }
    let n_match = pairs.len();
    let total = n_points * per;
    for _ in 0..n_match {
        let a = rng.random_range(0..total);
        let mut b = rng.random_range(0..total - per);
        // skip over a's own point block
        if b >= (a / per) * per {
            b += per;
        }
        pairs.push(PairIndex::new(a, b, false));
    }
    pairs.shuffle(&mut rng);
    Dataset::new(dim, vectors, pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(sigma: f64) -> SyntheticConfig {
        SyntheticConfig {
            n_points: 6,
            patches_per_point: 3,
            dim: 5,
            noise_sigma: sigma,
        }
    }

    #[test]
    fn zero_noise_matches_coincide() {
        let ds = generate_synthetic::<f64>(1, &cfg(0.0)).unwrap();
        for p in ds.pairs().iter().filter(|p| p.is_match) {
            assert_eq!(ds.vector(p.a), ds.vector(p.b));
        }
    }

    #[test]
    fn labels_follow_point_membership() {
        let c = cfg(0.1);
        let ds = generate_synthetic::<f32>(9, &c).unwrap();
        for p in ds.pairs() {
            assert_eq!(p.is_match, p.a / 3 == p.b / 3);
        }
        assert_eq!(ds.n_match() * 2, ds.pairs().len());
        assert_eq!(ds.n_match(), 6 * 3);
    }

    #[test]
    fn smallest_configuration_is_balanced() {
        let c = SyntheticConfig {
            n_points: 2,
            patches_per_point: 2,
            dim: 3,
            noise_sigma: 0.0,
        };
        let ds = generate_synthetic::<f32>(0, &c).unwrap();
        assert_eq!(ds.n_match(), 2);
        assert_eq!(ds.pairs().len(), 4);
    }

    #[test]
    fn degenerate_parameters() {
        for bad in [
            SyntheticConfig { n_points: 1, ..cfg(0.0) },
            SyntheticConfig { patches_per_point: 1, ..cfg(0.0) },
            SyntheticConfig { dim: 0, ..cfg(0.0) },
            cfg(-1.0),
        ] {
            assert!(matches!(generate_synthetic::<f32>(0, &bad), Err(Error::Usage(_))));
        }
    }

    #[test]
    fn streams_differ() {
        let a = generate_synthetic_stream::<f32>(3, 0, &cfg(0.1)).unwrap();
        let b = generate_synthetic_stream::<f32>(3, 1, &cfg(0.1)).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, generate_synthetic::<f32>(3, &cfg(0.1)).unwrap());
    }
}
