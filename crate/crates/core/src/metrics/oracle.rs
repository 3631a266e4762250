//! Brute-force reference metrics. Same tie policy as the fast paths (0.5
//! credit, mid-ranks) but computed by exhaustive pair enumeration and
//! explicit precision/recall sweeps, so agreement is a real cross-check.

use crate::metrics::EvalBatch;

/// Pairwise AUC: over all (positive, negative) pairs, count wins and half
/// ties. None if either side is empty.
pub fn auc_pairwise(scores: &[f64], truth: &[bool]) -> Option<f64> {
    let mut wins = 0.0;
    let mut pairs = 0usize;
    for (i, &ti) in truth.iter().enumerate() {
        if !ti {
            continue;
        }
        for (j, &tj) in truth.iter().enumerate() {
            if tj {
                continue;
            }
            pairs += 1;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    if pairs == 0 {
        None
    } else {
        Some(wins / pairs as f64)
    }
}

/// Per-sample discordant-pair fraction averaged over non-degenerate samples.
pub fn ranking_loss(batch: &EvalBatch) -> Option<f64> {
    let mut total = 0.0;
    let mut used = 0usize;
    for i in 0..batch.num_samples() {
        let mut bad = 0.0;
        let mut pairs = 0usize;
        for p in 0..batch.num_labels() {
            if batch.truth.get(i, p) != 1.0 {
                continue;
            }
            for n in 0..batch.num_labels() {
                if batch.truth.get(i, n) != 0.0 {
                    continue;
                }
                pairs += 1;
                let sp = batch.scores.get(i, p);
                let sn = batch.scores.get(i, n);
                if sn > sp {
                    bad += 1.0;
                } else if sn == sp {
                    bad += 0.5;
                }
            }
        }
        if pairs > 0 {
            total += bad / pairs as f64;
            used += 1;
        }
    }
    if used == 0 {
        None
    } else {
        Some(total / used as f64)
    }
}

pub fn hamming_loss(batch: &EvalBatch, threshold: f64) -> f64 {
    let mut wrong = 0usize;
    let mut count = 0usize;
    for i in 0..batch.num_samples() {
        for c in 0..batch.num_labels() {
            let predicted = batch.scores.get(i, c) >= threshold;
            let truth = batch.truth.get(i, c) == 1.0;
            if predicted != truth {
                wrong += 1;
            }
            count += 1;
        }
    }
    wrong as f64 / count as f64
}

pub fn macro_auc(batch: &EvalBatch) -> Option<f64> {
    let mut total = 0.0;
    let mut used = 0usize;
    for c in 0..batch.num_labels() {
        let scores: Vec<f64> = (0..batch.num_samples())
            .map(|i| batch.scores.get(i, c))
            .collect();
        let truth: Vec<bool> = (0..batch.num_samples())
            .map(|i| batch.truth.get(i, c) == 1.0)
            .collect();
        if let Some(a) = auc_pairwise(&scores, &truth) {
            total += a;
            used += 1;
        }
    }
    if used == 0 {
        None
    } else {
        Some(total / used as f64)
    }
}

pub fn micro_auc(batch: &EvalBatch) -> Option<f64> {
    let truth: Vec<bool> = batch.truth.data.iter().map(|&v| v == 1.0).collect();
    auc_pairwise(&batch.scores.data, &truth)
}

/// Average precision by an explicit descending sweep over distinct score
/// thresholds: AP = sum over groups of (R_k - R_{k-1}) * P_k, all tied items
/// entering in one step.
pub fn average_precision_sweep(scores: &[f64], truth: &[bool]) -> Option<f64> {
    let pos = truth.iter().filter(|&&t| t).count();
    if pos == 0 || pos == truth.len() {
        return None;
    }
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for &t in &thresholds {
        let mut tp = 0usize;
        let mut predicted = 0usize;
        for (k, &tk) in truth.iter().enumerate() {
            if scores[k] >= t {
                predicted += 1;
                if tk {
                    tp += 1;
                }
            }
        }
        let precision = tp as f64 / predicted as f64;
        let recall = tp as f64 / pos as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Some(ap)
}

pub fn macro_ap(batch: &EvalBatch) -> Option<f64> {
    let mut total = 0.0;
    let mut used = 0usize;
    for c in 0..batch.num_labels() {
        let scores: Vec<f64> = (0..batch.num_samples())
            .map(|i| batch.scores.get(i, c))
            .collect();
        let truth: Vec<bool> = (0..batch.num_samples())
            .map(|i| batch.truth.get(i, c) == 1.0)
            .collect();
        if let Some(a) = average_precision_sweep(&scores, &truth) {
            total += a;
            used += 1;
        }
    }
    if used == 0 {
        None
    } else {
        Some(total / used as f64)
    }
}

pub fn micro_ap(batch: &EvalBatch) -> Option<f64> {
    let truth: Vec<bool> = batch.truth.data.iter().map(|&v| v == 1.0).collect();
    average_precision_sweep(&batch.scores.data, &truth)
}

/// LRAP with mid-ranks computed by direct comparison counting:
/// rank_j = |{k: s_k > s_j}| + (|{k: s_k = s_j}| + 1) / 2.
pub fn lrap(batch: &EvalBatch) -> Option<f64> {
    let mut total = 0.0;
    let mut used = 0usize;
    for i in 0..batch.num_samples() {
        let c = batch.num_labels();
        let scores: Vec<f64> = (0..c).map(|j| batch.scores.get(i, j)).collect();
        let pos: Vec<usize> = (0..c).filter(|&j| batch.truth.get(i, j) == 1.0).collect();
        if pos.is_empty() {
            continue;
        }
        let mut sample = 0.0;
        for &j in &pos {
            let at_or_above = scores.iter().filter(|&&s| s >= scores[j]).count();
            let pos_at_or_above = pos.iter().filter(|&&k| scores[k] >= scores[j]).count();
            sample += pos_at_or_above as f64 / at_or_above as f64;
        }
        total += sample / pos.len() as f64;
        used += 1;
    }
    if used == 0 {
        None
    } else {
        Some(total / used as f64)
    }
}
