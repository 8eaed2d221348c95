//! Patch ingestion and dataset handling.
//!
//! - [`ubc`]: the UBC patch-dataset directory layout (bitmap mosaics, `info.txt`,
//!   pair files).
//! - [`bmp`]: minimal 8-bit grayscale BMP codec used by the mosaic loader.
//! - [`preprocess`]: resampling and normalization of 64×64 patches into
//!   network input vectors.
//! - [`synthetic`]: deterministic prototype-plus-noise generator for desk runs.
//! - [`interchange`]: the binary `SPDS` file holding preprocessed vectors and
//!   pair indices.

pub mod bmp;
pub mod interchange;
pub mod preprocess;
pub mod synthetic;
pub mod ubc;

pub use interchange::{read_dataset, write_dataset};
pub use preprocess::{preprocess, Normalization, PreprocessConfig};
pub use synthetic::{generate_synthetic, SyntheticConfig};
pub use ubc::{load_pair_file, load_ubc_patches, Patch, PATCH_SIDE};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Indices of two vectors in a [`Dataset`] plus the match label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairIndex {
    pub a: usize,
    pub b: usize,
    pub is_match: bool,
}

impl PairIndex {
    pub fn new(a: usize, b: usize, is_match: bool) -> Self {
        Self { a, b, is_match }
    }
}

/// Two patch vectors and their match label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPair<'a, T> {
    pub a: &'a [T],
    pub b: &'a [T],
    pub is_match: bool,
}

/// Preprocessed patch vectors of a common dimension plus a pair list over them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    dim: usize,
    vectors: Vec<T>,
    pairs: Vec<PairIndex>,
}

impl<T: Scalar> Dataset<T> {
    /// `vectors` is the row-major concatenation of all patch vectors.
    pub fn new(dim: usize, vectors: Vec<T>, pairs: Vec<PairIndex>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Input("dataset dimension must be positive".into()));
        }
        if !vectors.len().is_multiple_of(dim) {
            return Err(Error::Input(format!(
                "{} values do not split into vectors of dimension {dim}",
                vectors.len()
            )));
        }
        let n = vectors.len() / dim;
        if let Some((k, p)) = pairs.iter().enumerate().find(|(_, p)| p.a >= n || p.b >= n) {
            return Err(Error::Input(format!(
                "pair {k} references vector ({}, {}) but only {n} exist",
                p.a, p.b
            )));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("dataset contains non-finite values".into()));
        }
        Ok(Self { dim, vectors, pairs })
    }

    pub fn from_rows(dim: usize, rows: &[Vec<T>], pairs: Vec<PairIndex>) -> Result<Self> {
        if let Some((k, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(Error::dim(dim, r.len(), format!("vector {k}")));
        }
        Self::new(dim, rows.concat(), pairs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vector(&self, i: usize) -> &[T] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vectors(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.vectors.chunks_exact(self.dim)
    }

    pub fn raw_vectors(&self) -> &[T] {
        &self.vectors
    }

    pub fn pairs(&self) -> &[PairIndex] {
        &self.pairs
    }

    pub fn n_match(&self) -> usize {
        self.pairs.iter().filter(|p| p.is_match).count()
    }

    pub fn labeled_pairs(&self) -> Vec<LabeledPair<'_, T>> {
        self.pairs
            .iter()
            .map(|p| LabeledPair {
                a: self.vector(p.a),
                b: self.vector(p.b),
                is_match: p.is_match,
            })
            .collect()
    }

    /// Both members of every pair, in pair order.
    pub fn pair_members(&self) -> Vec<&[T]> {
        self.pairs
            .iter()
            .flat_map(|p| [self.vector(p.a), self.vector(p.b)])
            .collect()
    }

    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        Dataset {
            dim: self.dim,
            vectors: crate::scalar::cast_slice(&self.vectors),
            pairs: self.pairs.clone(),
        }
    }
}
