//! Contrastive loss over descriptor pairs.
//!
//! `E = 1/(2N) Σ y·d² + (1−y)·max(m − d, 0)²` with `d` the Euclidean distance
//! between the two descriptors of a pair and `m` the margin.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_MARGIN: f64 = 1.0;

/// Euclidean distance, accumulated in `f64`.
pub fn pair_distance<T: Scalar>(a: &[T], b: &[T]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dim(a.len(), b.len(), "descriptor pair"));
    }
    Ok(squared_distance(a, b).sqrt())
}

fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x.widen() - y.widen();
            d * d
        })
        .sum()
}

#[derive(Debug, Clone, Copy)]
pub struct DescriptorPair<'a, T> {
    pub a: &'a [T],
    pub b: &'a [T],
    pub is_match: bool,
}

impl<'a, T: Scalar> DescriptorPair<'a, T> {
    pub fn new(a: &'a [T], b: &'a [T], is_match: bool) -> Self {
        Self { a, b, is_match }
    }
}

/// A non-empty batch of descriptor pairs with a positive margin.
#[derive(Debug, Clone)]
pub struct PairBatch<'a, T> {
    pairs: Vec<DescriptorPair<'a, T>>,
    margin: f64,
}

impl<'a, T: Scalar> PairBatch<'a, T> {
    pub fn new(pairs: Vec<DescriptorPair<'a, T>>, margin: f64) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Usage("contrastive loss needs a non-empty batch".into()));
        }
        if !(margin > 0.0 && margin.is_finite()) {
            return Err(Error::Usage(format!("margin must be positive, got {margin}")));
        }
        for (n, p) in pairs.iter().enumerate() {
            if p.a.len() != p.b.len() {
                return Err(Error::dim(p.a.len(), p.b.len(), format!("pair {n}")));
            }
        }
        Ok(Self { pairs, margin })
    }

    pub fn pairs(&self) -> &[DescriptorPair<'a, T>] {
        &self.pairs
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Unnormalized loss term of one pair: `y·d² + (1−y)·max(m−d, 0)²`.
pub fn pair_term(distance: f64, is_match: bool, margin: f64) -> f64 {
    if is_match {
        distance * distance
    } else {
        let gap = (margin - distance).max(0.0);
        gap * gap
    }
}

pub fn contrastive_loss<T: Scalar>(batch: &PairBatch<'_, T>) -> f64 {
    let n = batch.len() as f64;
    let sum: f64 = batch
        .pairs
        .iter()
        .map(|p| pair_term(squared_distance(p.a, p.b).sqrt(), p.is_match, batch.margin))
        .sum();
    sum / (2.0 * n)
}

/// `(∂E/∂a_n, ∂E/∂b_n)` for every pair of the batch.
///
/// The match term is differentiated in its squared form, so it has no
/// singularity at `d = 0`. For a non-match at `d = 0` the direction is
/// undefined and the gradient is zero.
pub fn loss_grad<T: Scalar>(batch: &PairBatch<'_, T>) -> Vec<(Vec<f64>, Vec<f64>)> {
    let n = batch.len() as f64;
    batch
        .pairs
        .iter()
        .map(|p| {
            let diff: Vec<f64> = p.a.iter().zip(p.b).map(|(&x, &y)| x.widen() - y.widen()).collect();
            let coeff = if p.is_match {
                1.0 / n
            } else {
                let d = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
                if d >= batch.margin || d == 0.0 {
                    0.0
                } else {
                    -(batch.margin - d) / (n * d)
                }
            };
            let ga: Vec<f64> = diff.iter().map(|v| coeff * v).collect();
            let gb: Vec<f64> = ga.iter().map(|v| -v).collect();
            (ga, gb)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_examples() {
        assert_eq!(pair_distance(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(pair_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        let oracle = (1.0f64 * 1.0 + 2.0 * 2.0 + 0.0).sqrt();
        let d = pair_distance(&[1.0, 2.0, 3.0], &[2.0, 0.0, 3.0]).unwrap();
        assert!((d - oracle).abs() < 1e-15);
        assert!((d - 2.236_067_977_499_79).abs() < 1e-12);
        assert!(pair_distance(&[1.0f32], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn loss_examples() {
        let a = [0.2, 0.4];
        let b = PairBatch::new(vec![DescriptorPair::new(&a[..], &a[..], true)], 1.0).unwrap();
        assert_eq!(contrastive_loss(&b), 0.0);

        let far = [1.5, 0.0];
        let zero = [0.0, 0.0];
        let b = PairBatch::new(vec![DescriptorPair::new(&zero[..], &far[..], false)], 1.0).unwrap();
        assert_eq!(contrastive_loss(&b), 0.0);

        // d = 0.5 match, d = 0.4 non-match: (0.25 + 0.36) / 4
        let m1 = [0.5, 0.0];
        let n1 = [0.0, 0.4];
        let b = PairBatch::new(
            vec![
                DescriptorPair::new(&zero[..], &m1[..], true),
                DescriptorPair::new(&zero[..], &n1[..], false),
            ],
            1.0,
        )
        .unwrap();
        let oracle = (0.5f64.powi(2) + (1.0f64 - 0.4).powi(2)) / 4.0;
        assert!((contrastive_loss(&b) - oracle).abs() < 1e-15);
        assert!((contrastive_loss(&b) - 0.1525).abs() < 1e-12);
    }

    #[test]
    fn batch_validation() {
        assert!(matches!(PairBatch::<f64>::new(vec![], 1.0), Err(Error::Usage(_))));
        let a = [0.0];
        assert!(matches!(
            PairBatch::new(vec![DescriptorPair::new(&a[..], &a[..], true)], 0.0),
            Err(Error::Usage(_))
        ));
        let b = [0.0, 1.0];
        assert!(PairBatch::new(vec![DescriptorPair::new(&a[..], &b[..], true)], 1.0).is_err());
    }

    #[test]
    fn gradient_flat_regions() {
        let z = [0.0, 0.0];
        let f = [2.0, 0.0];
        let b = PairBatch::new(vec![DescriptorPair::new(&z[..], &f[..], false)], 1.0).unwrap();
        let g = loss_grad(&b);
        assert!(g[0].0.iter().chain(&g[0].1).all(|&v| v == 0.0));

        let p = [0.3, -0.1];
        let b = PairBatch::new(vec![DescriptorPair::new(&p[..], &p[..], true)], 1.0).unwrap();
        let g = loss_grad(&b);
        assert!(g[0].0.iter().chain(&g[0].1).all(|&v| v == 0.0));

        let b = PairBatch::new(vec![DescriptorPair::new(&p[..], &p[..], false)], 1.0).unwrap();
        let g = loss_grad(&b);
        assert!(g[0].0.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_pair_is_half_its_term() {
        let a = [0.1, 0.2, 0.3];
        let b = [0.4, -0.2, 0.0];
        let d = pair_distance(&a, &b).unwrap();
        for is_match in [true, false] {
            let batch = PairBatch::new(vec![DescriptorPair::new(&a[..], &b[..], is_match)], 1.0).unwrap();
            assert!((contrastive_loss(&batch) - pair_term(d, is_match, 1.0) / 2.0).abs() < 1e-15);
        }
    }
}
