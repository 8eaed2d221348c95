//! Mini-batch SGD on the contrastive loss.
//!
//! Every epoch visits the pairs in a fresh permutation drawn from
//! `shuffle_seed`; the final short batch is kept. Both members of a pair go
//! through the same network and their gradients are summed.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::LabeledPair;
use crate::error::{Error, Result};
use crate::loss::{contrastive_loss, loss_grad, DescriptorPair, PairBatch, DEFAULT_MARGIN};
use crate::network::{Gradients, Network};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub margin: f64,
    pub shuffle_seed: u64,
    /// Classical momentum coefficient in `[0, 1)`.
    pub momentum: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 20,
            batch_size: 32,
            margin: DEFAULT_MARGIN,
            shuffle_seed: 0,
            momentum: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be ≥ 0, got {}", self.learning_rate)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be ≥ 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be ≥ 1".into()));
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return Err(Error::Config(format!("margin must be positive, got {}", self.margin)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    /// Mean contrastive loss over each epoch's batches, weighted by batch size.
    pub epoch_losses: Vec<f64>,
    pub validation_losses: Option<Vec<f64>>,
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

impl TrainRecord {
    pub fn final_loss(&self) -> Option<f64> {
        self.epoch_losses.last().copied()
    }
}

fn check_pairs<T: Scalar>(net: &Network<T>, pairs: &[LabeledPair<'_, T>]) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::Input("no training pairs".into()));
    }
    let w = net.input_width();
    for (n, p) in pairs.iter().enumerate() {
        if p.a.len() != w || p.b.len() != w {
            return Err(Error::dim(w, p.a.len().max(p.b.len()), format!("pair {n} vs network input")));
        }
    }
    Ok(())
}

/// Contrastive loss of the whole set under the current parameters.
pub fn dataset_loss<T: Scalar>(net: &Network<T>, pairs: &[LabeledPair<'_, T>], margin: f64) -> Result<f64> {
    check_pairs(net, pairs)?;
    let descs: Vec<(Vec<T>, Vec<T>)> = pairs
        .iter()
        .map(|p| Ok((net.describe(p.a)?, net.describe(p.b)?)))
        .collect::<Result<_>>()?;
    let batch = PairBatch::new(
        descs
            .iter()
            .zip(pairs)
            .map(|((a, b), p)| DescriptorPair::new(a, b, p.is_match))
            .collect(),
        margin,
    )?;
    Ok(contrastive_loss(&batch))
}

pub fn train<T: Scalar>(
    net: Network<T>,
    pairs: &[LabeledPair<'_, T>],
    cfg: &TrainConfig,
) -> Result<(Network<T>, TrainRecord)> {
    train_with_validation(net, pairs, None, cfg)
}

pub fn train_with_validation<T: Scalar>(
    mut net: Network<T>,
    pairs: &[LabeledPair<'_, T>],
    validation: Option<&[LabeledPair<'_, T>]>,
    cfg: &TrainConfig,
) -> Result<(Network<T>, TrainRecord)> {
    cfg.validate()?;
    check_pairs(&net, pairs)?;
    if let Some(v) = validation {
        check_pairs(&net, v)?;
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut velocity = (cfg.momentum > 0.0).then(|| Gradients::zeros_like(&net));
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut validation_losses = validation.map(|_| Vec::with_capacity(cfg.epochs));

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let traces: Vec<_> = chunk
                .iter()
                .map(|&i| Ok((net.forward(pairs[i].a)?, net.forward(pairs[i].b)?)))
                .collect::<Result<_>>()?;
            let batch = PairBatch::new(
                traces
                    .iter()
                    .zip(chunk)
                    .map(|((ta, tb), &i)| DescriptorPair::new(ta.descriptor(), tb.descriptor(), pairs[i].is_match))
                    .collect(),
                cfg.margin,
            )?;
            let loss = contrastive_loss(&batch);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, batch: batch_idx });
            }
            weighted += loss * chunk.len() as f64;

            let mut grads = Gradients::zeros_like(&net);
            for ((ta, tb), (ga, gb)) in traces.iter().zip(loss_grad(&batch)) {
                net.accumulate_gradients(&mut grads, ta, &ga)?;
                net.accumulate_gradients(&mut grads, tb, &gb)?;
            }
            if !grads.is_finite() {
                return Err(Error::Divergence { epoch, batch: batch_idx });
            }
            match velocity.as_mut() {
                Some(v) => {
                    for (vi, gi) in v.iter_mut().zip(grads.iter()) {
                        *vi = cfg.momentum * *vi + gi;
                    }
                    net.apply_step(v, cfg.learning_rate);
                }
                None => net.apply_step(&grads, cfg.learning_rate),
            }
            if !net.is_finite() {
                return Err(Error::Divergence { epoch, batch: batch_idx });
            }
        }
        epoch_losses.push(weighted / pairs.len() as f64);
        if let (Some(v), Some(out)) = (validation, validation_losses.as_mut()) {
            out.push(dataset_loss(&net, v, cfg.margin)?);
        }
    }

    Ok((
        net,
        TrainRecord {
            epoch_losses,
            validation_losses,
            wall_clock_secs: start.elapsed().as_secs_f64(),
        },
    ))
}
