//! The seven multi-label evaluation metrics.
//!
//! Tie policy everywhere: a tied pair contributes 0.5 and ranks are
//! mid-ranks. Per-sample metrics skip samples whose truth row is all-0 or
//! all-1; per-label metrics skip labels whose truth column is all-0 or
//! all-1. Skips are reported in the `MetricsReport`.
//!
//! `oracle` holds brute-force reference implementations computed by a
//! different route than the fast paths here; the test suites assert the two
//! agree to 1e-12.

pub mod oracle;

use crate::error::{Error, Result};
use crate::tensor::Tensor2;
use serde::{Deserialize, Serialize};

/// Scores (any monotone score; typically sigmoid probabilities) paired with
/// binary ground truth over an evaluation node set.
#[derive(Debug, Clone)]
pub struct EvalBatch {
    pub scores: Tensor2,
    pub truth: Tensor2,
}

impl EvalBatch {
    pub fn new(scores: Tensor2, truth: Tensor2) -> Result<Self> {
        if !scores.same_shape(&truth) {
            return Err(Error::ShapeMismatch(format!(
                "scores {}x{} vs truth {}x{}",
                scores.rows, scores.cols, truth.rows, truth.cols
            )));
        }
        if truth.data.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidConfig("truth must be binary".into()));
        }
        Ok(EvalBatch { scores, truth })
    }

    pub fn num_samples(&self) -> usize {
        self.scores.rows
    }

    pub fn num_labels(&self) -> usize {
        self.scores.cols
    }

    fn column(&self, c: usize) -> (Vec<f64>, Vec<bool>) {
        let m = self.num_samples();
        let mut s = Vec::with_capacity(m);
        let mut t = Vec::with_capacity(m);
        for i in 0..m {
            s.push(self.scores.get(i, c));
            t.push(self.truth.get(i, c) == 1.0);
        }
        (s, t)
    }

    /// Labels whose truth column is all-0 or all-1 in this batch.
    pub fn degenerate_labels(&self) -> Vec<usize> {
        (0..self.num_labels())
            .filter(|&c| {
                let pos = (0..self.num_samples())
                    .filter(|&i| self.truth.get(i, c) == 1.0)
                    .count();
                pos == 0 || pos == self.num_samples()
            })
            .collect()
    }
}

/// All seven metric values in [0,1], with degeneracy diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricsReport {
    pub ranking_loss: f64,
    pub hamming_loss: f64,
    pub macro_auc: f64,
    pub micro_auc: f64,
    pub macro_ap: f64,
    pub micro_ap: f64,
    pub lrap: f64,
    /// Labels excluded from the macro averages (all-0 or all-1 columns).
    pub skipped_labels: Vec<usize>,
    /// Samples excluded from ranking loss (all-0 or all-1 rows).
    pub skipped_ranking_samples: usize,
    /// Samples excluded from LRAP (no positive label).
    pub skipped_lrap_samples: usize,
}

impl MetricsReport {
    pub const METRIC_NAMES: [&'static str; 7] = [
        "ranking_loss",
        "hamming_loss",
        "macro_auc",
        "micro_auc",
        "macro_ap",
        "micro_ap",
        "lrap",
    ];

    pub fn values(&self) -> [f64; 7] {
        [
            self.ranking_loss,
            self.hamming_loss,
            self.macro_auc,
            self.micro_auc,
            self.macro_ap,
            self.micro_ap,
            self.lrap,
        ]
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        Self::METRIC_NAMES
            .iter()
            .position(|&n| n == name)
            .map(|i| self.values()[i])
    }

    /// True when `candidate` improves on `incumbent` for this metric
    /// (ranking and hamming loss are lower-better).
    pub fn is_improvement(name: &str, candidate: f64, incumbent: f64) -> bool {
        match name {
            "ranking_loss" | "hamming_loss" => candidate < incumbent,
            _ => candidate > incumbent,
        }
    }

    pub fn worst_value(name: &str) -> f64 {
        match name {
            "ranking_loss" | "hamming_loss" => f64::INFINITY,
            _ => f64::NEG_INFINITY,
        }
    }
}

/// Mid-ranks of `scores` in descending order, 1-based. Tied scores share the
/// average of the positions they occupy.
fn descending_mid_ranks(scores: &[f64]) -> Vec<f64> {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // positions i+1 ..= j+1 share the mid-rank
        let mid = (i + j + 2) as f64 / 2.0;
        for k in i..=j {
            ranks[order[k]] = mid;
        }
        i = j + 1;
    }
    ranks
}

/// Mann-Whitney AUC with 0.5 tie credit, via the mid-rank sum identity.
/// Returns None when there is no positive or no negative.
fn auc_with_ties(scores: &[f64], truth: &[bool]) -> Option<f64> {
    let pos = truth.iter().filter(|&&t| t).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    // ascending mid-ranks: flip the descending ones
    let n = truth.len() as f64;
    let desc = descending_mid_ranks(scores);
    let rank_sum: f64 = desc
        .iter()
        .zip(truth)
        .filter(|(_, &t)| t)
        .map(|(&r, _)| n + 1.0 - r)
        .sum();
    let p = pos as f64;
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * neg as f64))
}

/// Tie-grouped average precision: every positive j contributes
/// |{pos k: s_k >= s_j}| / |{k: s_k >= s_j}|, averaged over positives.
/// None when there is no positive or no negative.
fn average_precision(scores: &[f64], truth: &[bool]) -> Option<f64> {
    let pos = truth.iter().filter(|&&t| t).count();
    if pos == 0 || pos == truth.len() {
        return None;
    }
    let mut total = 0.0;
    for (j, &t) in truth.iter().enumerate() {
        if !t {
            continue;
        }
        let sj = scores[j];
        let mut tp = 0usize;
        let mut count = 0usize;
        for (k, &tk) in truth.iter().enumerate() {
            if scores[k] >= sj {
                count += 1;
                if tk {
                    tp += 1;
                }
            }
        }
        total += tp as f64 / count as f64;
    }
    Some(total / pos as f64)
}

/// Mean over non-degenerate samples of the fraction of mis-ordered
/// positive/negative label pairs (ties count 0.5).
pub fn ranking_loss(batch: &EvalBatch) -> Result<f64> {
    let mut total = 0.0;
    let mut used = 0usize;
    for i in 0..batch.num_samples() {
        let truth: Vec<bool> = (0..batch.num_labels())
            .map(|c| batch.truth.get(i, c) == 1.0)
            .collect();
        let scores: Vec<f64> = (0..batch.num_labels())
            .map(|c| batch.scores.get(i, c))
            .collect();
        if let Some(auc) = auc_with_ties(&scores, &truth) {
            total += 1.0 - auc;
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::DegenerateMetric(
            "ranking loss: every sample is all-0 or all-1".into(),
        ));
    }
    Ok(total / used as f64)
}

/// Fraction of entries where (score >= threshold) disagrees with truth.
pub fn hamming_loss(batch: &EvalBatch, threshold: f64) -> f64 {
    let wrong = batch
        .scores
        .data
        .iter()
        .zip(&batch.truth.data)
        .filter(|(&s, &t)| ((s >= threshold) as u8 as f64) != t)
        .count();
    wrong as f64 / batch.scores.data.len() as f64
}

/// Unweighted mean of per-label AUC over non-degenerate labels.
pub fn macro_auc(batch: &EvalBatch) -> Result<f64> {
    let mut total = 0.0;
    let mut used = 0usize;
    for c in 0..batch.num_labels() {
        let (s, t) = batch.column(c);
        if let Some(auc) = auc_with_ties(&s, &t) {
            total += auc;
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::DegenerateMetric("macro AUC: all labels degenerate".into()));
    }
    Ok(total / used as f64)
}

/// AUC over the flattened entries.
pub fn micro_auc(batch: &EvalBatch) -> Result<f64> {
    let truth: Vec<bool> = batch.truth.data.iter().map(|&v| v == 1.0).collect();
    auc_with_ties(&batch.scores.data, &truth)
        .ok_or_else(|| Error::DegenerateMetric("micro AUC: needs a positive and a negative".into()))
}

/// Unweighted mean of per-label average precision over non-degenerate labels.
pub fn macro_ap(batch: &EvalBatch) -> Result<f64> {
    let mut total = 0.0;
    let mut used = 0usize;
    for c in 0..batch.num_labels() {
        let (s, t) = batch.column(c);
        if let Some(ap) = average_precision(&s, &t) {
            total += ap;
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::DegenerateMetric("macro AP: all labels degenerate".into()));
    }
    Ok(total / used as f64)
}

/// Average precision over the flattened entries.
pub fn micro_ap(batch: &EvalBatch) -> Result<f64> {
    let truth: Vec<bool> = batch.truth.data.iter().map(|&v| v == 1.0).collect();
    average_precision(&batch.scores.data, &truth)
        .ok_or_else(|| Error::DegenerateMetric("micro AP: needs a positive and a negative".into()))
}

/// Label ranking average precision: per positive label j,
/// |{positive k: rank_k <= rank_j}| / rank_j with descending mid-ranks,
/// averaged within and then across samples with at least one positive.
pub fn lrap(batch: &EvalBatch) -> Result<f64> {
    let mut total = 0.0;
    let mut used = 0usize;
    for i in 0..batch.num_samples() {
        let scores: Vec<f64> = (0..batch.num_labels())
            .map(|c| batch.scores.get(i, c))
            .collect();
        let positives: Vec<usize> = (0..batch.num_labels())
            .filter(|&c| batch.truth.get(i, c) == 1.0)
            .collect();
        if positives.is_empty() {
            continue;
        }
        // sort once, then sweep tie groups: every label in a group shares the
        // same at-or-above counts (ties credit the whole group)
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
        let is_pos = |k: usize| batch.truth.get(i, k) == 1.0;
        let mut sample = 0.0;
        let mut seen = 0usize;
        let mut seen_pos = 0usize;
        let mut g = 0;
        while g < order.len() {
            let mut end = g + 1;
            while end < order.len() && scores[order[end]] == scores[order[g]] {
                end += 1;
            }
            let group_pos = order[g..end].iter().filter(|&&k| is_pos(k)).count();
            seen += end - g;
            seen_pos += group_pos;
            sample += group_pos as f64 * seen_pos as f64 / seen as f64;
            g = end;
        }
        total += sample / positives.len() as f64;
        used += 1;
    }
    if used == 0 {
        return Err(Error::DegenerateMetric("lrap: no sample has a positive label".into()));
    }
    Ok(total / used as f64)
}

/// All seven metrics on one batch. Values stay in [0,1]; table-facing x100
/// scaling is applied at the reporting layer.
pub fn compute_all(batch: &EvalBatch) -> Result<MetricsReport> {
    let skipped_labels = batch.degenerate_labels();
    let skipped_ranking_samples = (0..batch.num_samples())
        .filter(|&i| {
            let pos = (0..batch.num_labels())
                .filter(|&c| batch.truth.get(i, c) == 1.0)
                .count();
            pos == 0 || pos == batch.num_labels()
        })
        .count();
    let skipped_lrap_samples = (0..batch.num_samples())
        .filter(|&i| (0..batch.num_labels()).all(|c| batch.truth.get(i, c) == 0.0))
        .count();
    Ok(MetricsReport {
        ranking_loss: ranking_loss(batch)?,
        hamming_loss: hamming_loss(batch, 0.5),
        macro_auc: macro_auc(batch)?,
        micro_auc: micro_auc(batch)?,
        macro_ap: macro_ap(batch)?,
        micro_ap: micro_ap(batch)?,
        lrap: lrap(batch)?,
        skipped_labels,
        skipped_ranking_samples,
        skipped_lrap_samples,
    })
}
