use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::scoring::ScoredSpan;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Scores `>= threshold` are flagged; `+inf` for the origin.
    pub threshold: f64,
    pub fp: usize,
    pub tp: usize,
    pub fpr: f64,
    pub tpr: f64,
}

/// Threshold sweep from `(0,0)` to `(1,1)`, one step per distinct score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub n_pos: usize,
    pub n_neg: usize,
}

pub fn roc(scored: &[ScoredSpan]) -> Result<RocCurve> {
    let scores: Vec<f64> = scored.iter().map(|s| s.score).collect();
    let labels: Vec<bool> = scored.iter().map(|s| s.label != 0).collect();
    roc_from_scores(&scores, &labels)
}

pub fn roc_from_scores(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(invalid("scores and labels differ in length"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(invalid("NaN score"));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(invalid(alloc::format!(
            "ROC needs both classes (found {n_pos} positive, {n_neg} negative)"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (np, nn) = (n_pos as f64, n_neg as f64);
    let mut points = Vec::with_capacity(order.len() + 1);
    points.push(RocPoint { threshold: f64::INFINITY, fp: 0, tp: 0, fpr: 0.0, tpr: 0.0 });
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let thr = scores[order[i]];
        while i < order.len() && scores[order[i]] == thr {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint { threshold: thr, fp, tp, fpr: fp as f64 / nn, tpr: tp as f64 / np });
    }
    Ok(RocCurve { points, n_pos, n_neg })
}

/// Trapezoidal area. Tied scores form one diagonal step, which credits
/// positive/negative ties with one half.
pub fn auc(curve: &RocCurve) -> f64 {
    let mut twice_area: u128 = 0;
    for w in curve.points.windows(2) {
        let dfp = (w[1].fp - w[0].fp) as u128;
        twice_area += dfp * (w[0].tp + w[1].tp) as u128;
    }
    twice_area as f64 / (2.0 * curve.n_pos as f64 * curve.n_neg as f64)
}

/// Highest recall over sweep points whose FPR does not exceed `cap`; no
/// interpolation between points.
pub fn recall_at_fpr(curve: &RocCurve, cap: f64) -> f64 {
    curve.points.iter().filter(|p| p.fpr <= cap).map(|p| p.tpr).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub auc: f64,
    pub recall_at_fpr_0_1: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

pub fn metrics(scored: &[ScoredSpan]) -> Result<MethodMetrics> {
    let curve = roc(scored)?;
    Ok(MethodMetrics {
        auc: auc(&curve),
        recall_at_fpr_0_1: recall_at_fpr(&curve, 0.1),
        n_pos: curve.n_pos,
        n_neg: curve.n_neg,
    })
}

/// Pooled metrics for every method in a score table.
pub fn evaluate(table: &[ScoredSpan]) -> Result<BTreeMap<String, MethodMetrics>> {
    let mut by_method: BTreeMap<String, Vec<ScoredSpan>> = BTreeMap::new();
    for row in table {
        by_method.entry(row.method.clone()).or_default().push(row.clone());
    }
    by_method
        .into_iter()
        .map(|(m, rows)| {
            let mm = metrics(&rows).map_err(|e| invalid(alloc::format!("method {m}: {e}")))?;
            Ok((m, mm))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn auc_of(scores: &[f64], labels: &[bool]) -> f64 {
        auc(&roc_from_scores(scores, labels).unwrap())
    }

    #[test]
    fn separated_and_tied_extremes() {
        assert_eq!(auc_of(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]), 1.0);
        assert_eq!(auc_of(&[0.5; 6], &[true, false, true, false, false, true]), 0.5);
    }

    #[test]
    fn pairwise_hand_case() {
        // pos {0.9, 0.4}, neg {0.8, 0.1}: pairs won 3 of 4
        assert_eq!(auc_of(&[0.9, 0.4, 0.8, 0.1], &[true, true, false, false]), 0.75);
    }

    #[test]
    fn endpoints_are_exact() {
        let c = roc_from_scores(&[0.3, 0.1, 0.7], &[true, false, false]).unwrap();
        let first = c.points.first().unwrap();
        let last = c.points.last().unwrap();
        assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        assert!(c.points.windows(2).all(|w| w[0].fpr <= w[1].fpr && w[0].tpr <= w[1].tpr));
    }

    #[test]
    fn recall_cases() {
        let sep = roc_from_scores(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!(recall_at_fpr(&sep, 0.0), 1.0);
        let inv = roc_from_scores(&[0.1, 0.2, 0.8, 0.9], &[true, true, false, false]).unwrap();
        assert_eq!(recall_at_fpr(&inv, 0.1), 0.0);
        // ten negatives 0.05..0.95, positives spread around them
        let mut scores: Vec<f64> = (0..10).map(|i| 0.05 + 0.1 * i as f64).collect();
        let mut labels = vec![false; 10];
        scores.extend([0.99, 0.97, 0.90, 0.5]);
        labels.extend([true; 4]);
        let c = roc_from_scores(&scores, &labels).unwrap();
        // admitting only the top negative (0.95) lets 0.99, 0.97, 0.90 through
        assert_eq!(recall_at_fpr(&c, 0.1), 0.75);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(roc_from_scores(&[0.1, 0.2], &[true, true]).is_err());
    }
}
