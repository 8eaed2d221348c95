//! Structured neuron removal and the iterative prune/retrain loop.
//!
//! Removing neuron `j` of layer `l` deletes row `j` of `W_l`, entry `j` of
//! `b_l`, and column `j` of `W_{l+1}` when a next layer exists. Surviving
//! parameters are copied unchanged.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataio::LabeledPair;
use crate::error::{Error, Result};
use crate::evaluator::{evaluate, EvalReport};
use crate::network::{Layer, Network};
use crate::profiler::{profile_pairs, ActivationProfile};
use crate::scalar::Scalar;
use crate::trainer::{train, TrainConfig};

pub const DEFAULT_THRESHOLD: f64 = 0.01;

/// Neuron indices to remove, keyed by layer index. Index lists are sorted and
/// unique; layers without removals are absent.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneSelection {
    layers: BTreeMap<usize, Vec<usize>>,
    pub warnings: Vec<String>,
}

impl PruneSelection {
    pub fn new(layers: BTreeMap<usize, Vec<usize>>) -> Self {
        let layers = layers
            .into_iter()
            .map(|(k, mut v)| {
                v.sort_unstable();
                v.dedup();
                (k, v)
            })
            .filter(|(_, v)| !v.is_empty())
            .collect();
        Self {
            layers,
            warnings: Vec::new(),
        }
    }

    pub fn layer(&self, layer_index: usize) -> &[usize] {
        self.layers.get(&layer_index).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[usize])> + '_ {
        self.layers.iter().map(|(&k, v)| (k, v.as_slice()))
    }

    pub fn total(&self) -> usize {
        self.layers.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn validate<T: Scalar>(&self, net: &Network<T>) -> Result<()> {
        for (&k, idx) in &self.layers {
            let layer = net
                .layers()
                .get(k)
                .ok_or_else(|| Error::Structural(format!("selection names layer {k}, network has {}", net.layers().len())))?;
            if let Some(&bad) = idx.iter().find(|&&j| j >= layer.out_width()) {
                return Err(Error::Structural(format!(
                    "neuron {bad} out of range for layer {k} of width {}",
                    layer.out_width()
                )));
            }
            if idx.len() >= layer.out_width() {
                return Err(Error::Structural(format!(
                    "selection would remove all {} neurons of layer {k}",
                    layer.out_width()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerPruneStats {
    pub name: String,
    pub width_before: usize,
    pub width_after: usize,
    pub removed_count: usize,
}

impl LayerPruneStats {
    pub fn removed_ratio(&self) -> f64 {
        self.removed_count as f64 / self.width_before as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub iteration: usize,
    pub layers: Vec<LayerPruneStats>,
}

impl PruneReport {
    pub fn total_removed(&self) -> usize {
        self.layers.iter().map(|l| l.removed_count).sum()
    }

    /// Table with columns `name before after removed_ratio_percent`.
    pub fn to_text(&self) -> String {
        let mut out = format!("# iteration={}\nname before after removed_ratio_percent\n", self.iteration);
        for l in &self.layers {
            writeln!(
                out,
                "{} {} {} {:.1}",
                l.name,
                l.width_before,
                l.width_after,
                l.removed_ratio() * 100.0
            )
            .unwrap();
        }
        out
    }
}

pub fn layer_name(layer_index: usize) -> String {
    format!("FC{}", layer_index + 1)
}

/// Neurons whose frequency is strictly below `threshold`, in every profiled
/// layer. If a whole layer falls below, its most active neuron (lowest index
/// on ties) is kept and a warning is recorded.
pub fn select_prunable(prof: &ActivationProfile, threshold: f64) -> Result<PruneSelection> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Usage(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    if prof.sample_count == 0 {
        return Err(Error::Usage("profile has no samples".into()));
    }
    let n = prof.sample_count as f64;
    let mut layers = BTreeMap::new();
    let mut warnings = Vec::new();
    for l in &prof.layers {
        let mut below: Vec<usize> = l
            .counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| (c as f64 / n) < threshold)
            .map(|(j, _)| j)
            .collect();
        if !below.is_empty() && below.len() == l.counts.len() {
            let keep = l
                .counts
                .iter()
                .enumerate()
                .fold(0, |best, (j, &c)| if c > l.counts[best] { j } else { best });
            below.retain(|&j| j != keep);
            warnings.push(format!(
                "layer {} has no neuron at or above the threshold; keeping neuron {keep}",
                l.layer_index
            ));
        }
        if !below.is_empty() {
            layers.insert(l.layer_index, below);
        }
    }
    let mut sel = PruneSelection::new(layers);
    sel.warnings = warnings;
    Ok(sel)
}

fn keep_mask(width: usize, removed: &[usize]) -> Vec<bool> {
    let mut keep = vec![true; width];
    for &j in removed {
        keep[j] = false;
    }
    keep
}

pub fn prune<T: Scalar>(net: &Network<T>, sel: &PruneSelection) -> Result<(Network<T>, PruneReport)> {
    prune_at(net, sel, 0)
}

pub(crate) fn prune_at<T: Scalar>(
    net: &Network<T>,
    sel: &PruneSelection,
    iteration: usize,
) -> Result<(Network<T>, PruneReport)> {
    sel.validate(net)?;
    let masks: Vec<Vec<bool>> = net
        .layers()
        .iter()
        .enumerate()
        .map(|(k, l)| keep_mask(l.out_width(), sel.layer(k)))
        .collect();
    let mut layers = Vec::with_capacity(net.layers().len());
    let mut stats = Vec::with_capacity(net.layers().len());
    for (k, layer) in net.layers().iter().enumerate() {
        let rows = &masks[k];
        let cols: Vec<bool> = if k == 0 {
            vec![true; layer.in_width()]
        } else {
            masks[k - 1].clone()
        };
        let in_width = cols.iter().filter(|&&c| c).count();
        let out_width = rows.iter().filter(|&&r| r).count();
        let mut weights = Vec::with_capacity(in_width * out_width);
        let mut biases = Vec::with_capacity(out_width);
        for (j, row) in layer.weights().chunks_exact(layer.in_width()).enumerate() {
            if !rows[j] {
                continue;
            }
            weights.extend(row.iter().zip(&cols).filter(|(_, &c)| c).map(|(&w, _)| w));
            biases.push(layer.biases()[j]);
        }
        layers.push(Layer::new(in_width, out_width, layer.activation(), weights, biases)?);
        stats.push(LayerPruneStats {
            name: layer_name(k),
            width_before: layer.out_width(),
            width_after: out_width,
            removed_count: layer.out_width() - out_width,
        });
    }
    Ok((
        Network::from_layers(layers)?,
        PruneReport {
            iteration,
            layers: stats,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub threshold: f64,
    pub max_iterations: usize,
    pub retrain: TrainConfig,
    /// Largest allowed Error@95% increase, in percentage points.
    pub rollback_tolerance: f64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            max_iterations: 5,
            retrain: TrainConfig {
                epochs: 5,
                ..TrainConfig::default()
            },
            rollback_tolerance: 1.0,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!("threshold must lie in (0, 1), got {}", self.threshold)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max iterations must be ≥ 1".into()));
        }
        if self.rollback_tolerance.is_nan() || self.rollback_tolerance < 0.0 {
            return Err(Error::Config(format!(
                "rollback tolerance must be ≥ 0, got {}",
                self.rollback_tolerance
            )));
        }
        self.retrain.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Nothing fell below the threshold.
    Converged,
    MaxIterations,
    /// The retrained pruned network lost too much accuracy and was discarded.
    RolledBack,
}

#[derive(Debug, Clone)]
pub struct LoopOutcome<T> {
    pub network: Network<T>,
    /// Evaluation of the input network before any pruning.
    pub baseline: EvalReport,
    /// One entry per iteration, including a rolled-back one.
    pub prune_reports: Vec<PruneReport>,
    pub eval_reports: Vec<EvalReport>,
    pub stop: StopReason,
    pub rolled_back_at: Option<usize>,
}

impl<T: Scalar> LoopOutcome<T> {
    pub fn final_eval(&self) -> &EvalReport {
        match self.rolled_back_at {
            Some(k) if k > 0 => &self.eval_reports[k - 1],
            Some(_) => &self.baseline,
            None => self.eval_reports.last().unwrap_or(&self.baseline),
        }
    }
}

/// Repeats profile → select → prune → retrain → evaluate on an already
/// trained network.
///
/// Stops when a selection is empty, after `max_iterations`, or when the
/// retrained network's Error@95% exceeds either the previous accepted value
/// or the baseline by more than `rollback_tolerance` points; in the last case
/// the previous network is returned.
pub fn adaptive_loop<T: Scalar>(
    net: Network<T>,
    train_pairs: &[LabeledPair<'_, T>],
    val_pairs: &[LabeledPair<'_, T>],
    cfg: &LoopConfig,
) -> Result<LoopOutcome<T>> {
    cfg.validate()?;
    if train_pairs.is_empty() || val_pairs.is_empty() {
        return Err(Error::Input("adaptive loop needs training and validation pairs".into()));
    }
    let baseline = evaluate(&net, val_pairs, false)?;
    let mut current = net;
    let mut current_err = baseline.error_at_95;
    let mut prune_reports = Vec::new();
    let mut eval_reports = Vec::new();
    let mut stop = StopReason::MaxIterations;
    let mut rolled_back_at = None;

    for iteration in 0..cfg.max_iterations {
        let prof = profile_pairs(&current, val_pairs)?;
        let sel = select_prunable(&prof, cfg.threshold)?;
        if sel.is_empty() {
            let (_, report) = prune_at(&current, &sel, iteration)?;
            prune_reports.push(report);
            eval_reports.push(eval_reports.last().cloned().unwrap_or_else(|| baseline.clone()));
            stop = StopReason::Converged;
            break;
        }
        let (candidate, report) = prune_at(&current, &sel, iteration)?;
        let retrain = TrainConfig {
            shuffle_seed: cfg.retrain.shuffle_seed.wrapping_add(iteration as u64),
            ..cfg.retrain
        };
        let (candidate, _) = train(candidate, train_pairs, &retrain)?;
        let ev = evaluate(&candidate, val_pairs, false)?;
        prune_reports.push(report);
        let reference = current_err.min(baseline.error_at_95);
        let rejected = (ev.error_at_95 - reference) * 100.0 > cfg.rollback_tolerance + 1e-9;
        current_err = if rejected { current_err } else { ev.error_at_95 };
        eval_reports.push(ev);
        if rejected {
            stop = StopReason::RolledBack;
            rolled_back_at = Some(iteration);
            break;
        }
        current = candidate;
    }

    Ok(LoopOutcome {
        network: current,
        baseline,
        prune_reports,
        eval_reports,
        stop,
        rolled_back_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Activation, LayerSpec};

    fn profile_of(freqs: Vec<(usize, Vec<f64>)>) -> ActivationProfile {
        ActivationProfile::from_frequencies(1000, freqs).unwrap()
    }

    #[test]
    fn selects_strictly_below() {
        let sel = select_prunable(&profile_of(vec![(0, vec![0.0, 0.5, 0.005])]), 0.01).unwrap();
        assert_eq!(sel.layer(0), &[0, 2]);
        let sel = select_prunable(&profile_of(vec![(0, vec![0.01, 0.5])]), 0.01).unwrap();
        assert!(sel.is_empty());
        assert!(select_prunable(&profile_of(vec![]), 1.5).is_err());
    }

    #[test]
    fn keeps_one_neuron_in_dead_layer() {
        let sel = select_prunable(&profile_of(vec![(1, vec![0.001, 0.004, 0.002])]), 0.01).unwrap();
        assert_eq!(sel.layer(1), &[0, 2]);
        assert_eq!(sel.warnings.len(), 1);
    }

    #[test]
    fn removes_rows_and_downstream_columns() {
        let l0 = Layer::new(2, 3, Activation::Relu, vec![1., 2., 3., 4., 5., 6.], vec![0.1, 0.2, 0.3]).unwrap();
        let l1 = Layer::new(3, 2, Activation::Relu, vec![7., 8., 9., 10., 11., 12.], vec![0.4, 0.5]).unwrap();
        let net = Network::<f64>::from_layers(vec![l0, l1]).unwrap();
        let sel = PruneSelection::new(BTreeMap::from([(0, vec![1]), (1, vec![0])]));
        let (p, report) = prune(&net, &sel).unwrap();
        assert_eq!(p.layers()[0].weights(), &[1., 2., 5., 6.]);
        assert_eq!(p.layers()[0].biases(), &[0.1, 0.3]);
        assert_eq!(p.layers()[1].weights(), &[10., 12.]);
        assert_eq!(p.layers()[1].biases(), &[0.5]);
        assert_eq!(p.descriptor_width(), 1);
        assert_eq!(report.total_removed(), 2);
        assert_eq!(
            report.to_text(),
            "# iteration=0\nname before after removed_ratio_percent\nFC1 3 2 33.3\nFC2 2 1 50.0\n"
        );
    }

    #[test]
    fn empty_selection_is_identity() {
        let net = Network::<f32>::init(&LayerSpec::chain(&[3, 4, 2], Activation::Relu), 1).unwrap();
        let (p, report) = prune(&net, &PruneSelection::default()).unwrap();
        assert_eq!(p, net);
        assert!(report.layers.iter().all(|l| l.removed_ratio() == 0.0));
    }

    #[test]
    fn invalid_selections() {
        let net = Network::<f32>::init(&LayerSpec::chain(&[3, 2, 2], Activation::Relu), 1).unwrap();
        let all = PruneSelection::new(BTreeMap::from([(0, vec![0, 1])]));
        assert!(matches!(prune(&net, &all), Err(Error::Structural(_))));
        let oob = PruneSelection::new(BTreeMap::from([(1, vec![5])]));
        assert!(prune(&net, &oob).is_err());
        let layer = PruneSelection::new(BTreeMap::from([(4, vec![0])]));
        assert!(prune(&net, &layer).is_err());
    }

    #[test]
    fn reselecting_after_prune_is_revalidated() {
        let net = Network::<f32>::init(&LayerSpec::chain(&[3, 3, 2], Activation::Relu), 1).unwrap();
        let sel = PruneSelection::new(BTreeMap::from([(0, vec![2])]));
        let (p, _) = prune(&net, &sel).unwrap();
        assert!(prune(&p, &sel).is_err());
    }
}
