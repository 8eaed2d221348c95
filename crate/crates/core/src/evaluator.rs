//! Matching evaluation: false positive rate at 95% recall.
//!
//! A pair is predicted to match when its descriptor distance is `≤ t`. The
//! operating threshold `t*` is the match distance at the ceiling index
//! `⌈0.95 · n_match⌉` of the ascending match distances, which is the smallest
//! threshold whose recall reaches 95%. No interpolation is done.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataio::LabeledPair;
use crate::error::{Error, Result};
use crate::loss::pair_distance;
use crate::network::Network;
use crate::scalar::Scalar;

/// Recall target as an integer percentage, so the index is computed exactly.
const RECALL_PERCENT: usize = 95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub distance: f64,
    pub is_match: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Fraction in `[0, 1]`.
    pub error_at_95: f64,
    pub threshold_used: f64,
    pub n_match: usize,
    pub n_nonmatch: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub source: Option<String>,
    #[serde(skip)]
    pub roc: Option<Vec<RocPoint>>,
}

impl EvalReport {
    pub fn error_percent(&self) -> f64 {
        self.error_at_95 * 100.0
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(src) = &self.source {
            writeln!(out, "source={src}").unwrap();
        }
        writeln!(out, "error_at_95_percent={:.2}", self.error_percent()).unwrap();
        writeln!(out, "threshold={:.6}", self.threshold_used).unwrap();
        writeln!(out, "n_match={}", self.n_match).unwrap();
        writeln!(out, "n_nonmatch={}", self.n_nonmatch).unwrap();
        out
    }
}

pub fn roc_csv(points: &[RocPoint]) -> String {
    let mut out = String::from("threshold,tpr,fpr\n");
    for p in points {
        writeln!(out, "{:.6},{:.6},{:.6}", p.threshold, p.tpr, p.fpr).unwrap();
    }
    out
}

pub fn score_pairs<T: Scalar>(net: &Network<T>, pairs: &[LabeledPair<'_, T>]) -> Result<Vec<Score>> {
    if pairs.is_empty() {
        return Err(Error::Input("no pairs to score".into()));
    }
    pairs
        .iter()
        .map(|p| {
            let a = net.describe(p.a)?;
            let b = net.describe(p.b)?;
            Ok(Score {
                distance: pair_distance(&a, &b)?,
                is_match: p.is_match,
            })
        })
        .collect()
}

fn split_sorted(scores: &[Score]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut pos: Vec<f64> = scores.iter().filter(|s| s.is_match).map(|s| s.distance).collect();
    let mut neg: Vec<f64> = scores.iter().filter(|s| !s.is_match).map(|s| s.distance).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Usage(format!(
            "need both match and non-match pairs (got {} and {})",
            pos.len(),
            neg.len()
        )));
    }
    if scores.iter().any(|s| !s.distance.is_finite()) {
        return Err(Error::Input("non-finite distance in scores".into()));
    }
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    Ok((pos, neg))
}

/// Number of sorted values `≤ t`.
fn count_le(sorted: &[f64], t: f64) -> usize {
    sorted.partition_point(|&v| v <= t)
}

pub fn error_at_95(scores: &[Score]) -> Result<EvalReport> {
    let (pos, neg) = split_sorted(scores)?;
    let rank = (RECALL_PERCENT * pos.len()).div_ceil(100);
    let threshold = pos[rank - 1];
    let false_pos = count_le(&neg, threshold);
    Ok(EvalReport {
        error_at_95: false_pos as f64 / neg.len() as f64,
        threshold_used: threshold,
        n_match: pos.len(),
        n_nonmatch: neg.len(),
        source: None,
        roc: None,
    })
}

/// One operating point per distinct distance, ascending.
pub fn roc_points(scores: &[Score]) -> Result<Vec<RocPoint>> {
    let (pos, neg) = split_sorted(scores)?;
    let mut all: Vec<f64> = scores.iter().map(|s| s.distance).collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    Ok(all
        .into_iter()
        .map(|t| RocPoint {
            threshold: t,
            tpr: count_le(&pos, t) as f64 / pos.len() as f64,
            fpr: count_le(&neg, t) as f64 / neg.len() as f64,
        })
        .collect())
}

pub fn evaluate<T: Scalar>(
    net: &Network<T>,
    pairs: &[LabeledPair<'_, T>],
    with_roc: bool,
) -> Result<EvalReport> {
    let scores = score_pairs(net, pairs)?;
    let mut report = error_at_95(&scores)?;
    if with_roc {
        report.roc = Some(roc_points(&scores)?);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(m: &[f64], n: &[f64]) -> Vec<Score> {
        m.iter()
            .map(|&d| Score { distance: d, is_match: true })
            .chain(n.iter().map(|&d| Score { distance: d, is_match: false }))
            .collect()
    }

    #[test]
    fn perfect_separation() {
        let r = error_at_95(&scores(&[0.1; 10], &[0.9; 10])).unwrap();
        assert_eq!(r.error_at_95, 0.0);
        assert_eq!(r.threshold_used, 0.1);
    }

    #[test]
    fn all_tied() {
        let r = error_at_95(&scores(&[0.4; 3], &[0.4; 7])).unwrap();
        assert_eq!(r.error_at_95, 1.0);
        assert_eq!(r.threshold_used, 0.4);
    }

    #[test]
    fn worked_example() {
        let r = error_at_95(&scores(&[0.1, 0.2, 0.3, 0.4, 0.5], &[0.25, 0.35, 0.9, 1.0])).unwrap();
        assert_eq!(r.threshold_used, 0.5);
        assert_eq!(r.error_at_95, 0.5);
        assert_eq!((r.n_match, r.n_nonmatch), (5, 4));
    }

    #[test]
    fn ceiling_index_is_exact() {
        // 20 matches: rank 19, not 20
        let m: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        let r = error_at_95(&scores(&m, &[19.5])).unwrap();
        assert_eq!(r.threshold_used, 19.0);
        assert_eq!(r.error_at_95, 0.0);
        // 100 matches: rank 95
        let m: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(error_at_95(&scores(&m, &[0.0])).unwrap().threshold_used, 95.0);
    }

    #[test]
    fn one_sided_input_is_usage_error() {
        assert!(matches!(error_at_95(&scores(&[0.1], &[])), Err(Error::Usage(_))));
        assert!(matches!(error_at_95(&scores(&[], &[0.1])), Err(Error::Usage(_))));
    }

    #[test]
    fn roc_and_text() {
        let s = scores(&[0.1, 0.3], &[0.2, 0.3]);
        let roc = roc_points(&s).unwrap();
        assert_eq!(roc.len(), 3);
        assert_eq!(roc[2], RocPoint { threshold: 0.3, tpr: 1.0, fpr: 1.0 });
        assert_eq!(roc_csv(&roc[..1]), "threshold,tpr,fpr\n0.100000,0.500000,0.000000\n");
        let r = error_at_95(&s).unwrap();
        assert_eq!(
            r.to_text(),
            "error_at_95_percent=100.00\nthreshold=0.300000\nn_match=2\nn_nonmatch=2\n"
        );
    }
}
