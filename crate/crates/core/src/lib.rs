//! Siamese local-descriptor learning with activation-frequency pruning.
//!
//! A dense feed-forward [`Network`] maps a preprocessed patch to a descriptor.
//! Two copies sharing the same parameters are trained on labeled pairs with the
//! contrastive loss ([`loss`]). The [`profiler`] counts how often each RELU
//! neuron fires over a profiling set, and the [`pruner`] removes neurons that
//! fire less often than a threshold, retraining between rounds. The
//! [`evaluator`] reports the false positive rate at 95% recall.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`). Parameters are
//! stored in the scalar type while every dot product and gradient accumulates
//! in `f64`. The command-line pipeline uses the `f32` aliases below, which
//! serialize bit-exactly; the `f64` aliases are intended for gradient checks.

pub mod cli;
pub mod config;
pub mod dataio;
pub mod error;
pub mod evaluator;
pub mod loss;
pub mod model;
pub mod network;
pub mod pipeline;
pub mod profiler;
pub mod pruner;
pub mod scalar;
pub mod trainer;

pub use error::{Error, Result};
pub use evaluator::{error_at_95, score_pairs, EvalReport, RocPoint, Score};
pub use loss::{contrastive_loss, loss_grad, pair_distance, DescriptorPair, PairBatch};
pub use network::{Activation, ForwardTrace, Gradients, Layer, LayerSpec, Network};
pub use profiler::{frequency_histogram, profile, ActivationProfile};
pub use pruner::{adaptive_loop, prune, select_prunable, LoopConfig, LoopOutcome, PruneReport, PruneSelection};
pub use scalar::Scalar;
pub use trainer::{train, TrainConfig, TrainRecord};
pub use dataio::{Dataset, LabeledPair, PairIndex};

/// Single-precision network, the type the pipeline trains and saves.
pub type Network32 = Network<f32>;
/// Double-precision network.
pub type Network64 = Network<f64>;
pub type Layer32 = Layer<f32>;
pub type Layer64 = Layer<f64>;
pub type Dataset32 = Dataset<f32>;
pub type Dataset64 = Dataset<f64>;
pub type ForwardTrace32 = ForwardTrace<f32>;
pub type ForwardTrace64 = ForwardTrace<f64>;
