//! Per-neuron activation frequency over a profiling set.
//!
//! A RELU neuron is active on an input when its output is strictly positive.
//! Counts are kept as integers; frequencies are formed by a single division.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataio::LabeledPair;
use crate::error::{Error, Result};
use crate::network::{Activation, Network};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerActivity {
    pub layer_index: usize,
    pub counts: Vec<u64>,
}

/// Activation counts for every RELU layer; LINEAR layers have no entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivationProfile {
    pub sample_count: u64,
    pub layers: Vec<LayerActivity>,
}

impl ActivationProfile {
    fn empty_for<T: Scalar>(net: &Network<T>) -> Self {
        Self {
            sample_count: 0,
            layers: net
                .layers()
                .iter()
                .enumerate()
                .filter(|(_, l)| l.activation() == Activation::Relu)
                .map(|(k, l)| LayerActivity {
                    layer_index: k,
                    counts: vec![0; l.out_width()],
                })
                .collect(),
        }
    }

    pub fn layer(&self, layer_index: usize) -> Option<&LayerActivity> {
        self.layers.iter().find(|l| l.layer_index == layer_index)
    }

    pub fn frequencies(&self, layer_index: usize) -> Option<Vec<f64>> {
        let n = self.sample_count as f64;
        self.layer(layer_index)
            .map(|l| l.counts.iter().map(|&c| c as f64 / n).collect())
    }

    pub fn neuron_count(&self) -> usize {
        self.layers.iter().map(|l| l.counts.len()).sum()
    }

    /// Builds a profile directly from frequencies over `sample_count` samples.
    /// Each frequency is rounded to the nearest count.
    pub fn from_frequencies(sample_count: u64, layers: Vec<(usize, Vec<f64>)>) -> Result<Self> {
        if sample_count == 0 {
            return Err(Error::Usage("profile needs at least one sample".into()));
        }
        let layers = layers
            .into_iter()
            .map(|(layer_index, freqs)| {
                let counts = freqs
                    .iter()
                    .map(|&f| {
                        if (0.0..=1.0).contains(&f) {
                            Ok((f * sample_count as f64).round() as u64)
                        } else {
                            Err(Error::Input(format!("frequency {f} outside [0, 1]")))
                        }
                    })
                    .collect::<Result<_>>()?;
                Ok(LayerActivity { layer_index, counts })
            })
            .collect::<Result<_>>()?;
        Ok(Self { sample_count, layers })
    }

    /// Profile of the concatenated input sets.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        let same_shape = self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.layer_index == b.layer_index && a.counts.len() == b.counts.len());
        if !same_shape {
            return Err(Error::Structural("profiles cover different layers".into()));
        }
        Ok(Self {
            sample_count: self.sample_count + other.sample_count,
            layers: self
                .layers
                .iter()
                .zip(&other.layers)
                .map(|(a, b)| LayerActivity {
                    layer_index: a.layer_index,
                    counts: a.counts.iter().zip(&b.counts).map(|(x, y)| x + y).collect(),
                })
                .collect(),
        })
    }

    /// `# samples=<N>` then `layer_index neuron_index count frequency` per neuron.
    pub fn to_text(&self) -> String {
        let mut out = format!("# samples={}\n", self.sample_count);
        let n = self.sample_count as f64;
        for l in &self.layers {
            for (j, &c) in l.counts.iter().enumerate() {
                writeln!(out, "{} {} {} {:.6}", l.layer_index, j, c, c as f64 / n).unwrap();
            }
        }
        out
    }
}

pub fn profile<T: Scalar>(net: &Network<T>, inputs: &[&[T]]) -> Result<ActivationProfile> {
    if inputs.is_empty() {
        return Err(Error::Usage("profiling needs at least one input".into()));
    }
    let mut prof = ActivationProfile::empty_for(net);
    for x in inputs {
        let trace = net.forward(x)?;
        for layer in &mut prof.layers {
            for (c, &a) in layer.counts.iter_mut().zip(&trace.activations()[layer.layer_index]) {
                if a > T::zero() {
                    *c += 1;
                }
            }
        }
    }
    prof.sample_count = inputs.len() as u64;
    Ok(prof)
}

/// Profiles both members of every pair (two samples per pair).
pub fn profile_pairs<T: Scalar>(net: &Network<T>, pairs: &[LabeledPair<'_, T>]) -> Result<ActivationProfile> {
    let inputs: Vec<&[T]> = pairs.iter().flat_map(|p| [p.a, p.b]).collect();
    profile(net, &inputs)
}

/// Neurons with frequency strictly below `threshold`, over all profiled layers
/// or only `layer_index`. Returns `(count, count / neurons considered)`.
pub fn frequency_histogram(
    prof: &ActivationProfile,
    threshold: f64,
    layer_index: Option<usize>,
) -> Result<(usize, f64)> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Usage(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    let layers: Vec<&LayerActivity> = match layer_index {
        Some(k) => vec![prof
            .layer(k)
            .ok_or_else(|| Error::Usage(format!("layer {k} is not profiled")))?],
        None => prof.layers.iter().collect(),
    };
    let n = prof.sample_count as f64;
    let total: usize = layers.iter().map(|l| l.counts.len()).sum();
    let below = layers
        .iter()
        .flat_map(|l| &l.counts)
        .filter(|&&c| (c as f64 / n) < threshold)
        .count();
    let fraction = if total == 0 { 0.0 } else { below as f64 / total as f64 };
    Ok((below, fraction))
}
