use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::activation::bce_with_logit;
use crate::error::{bail, Result};

/// Mann–Whitney AUC with average ranks, so each tied positive/negative pair
/// counts one half. `None` when either class is missing. Labels at or above
/// 0.5 count as positive.
pub fn auc(scores: &[f64], labels: &[f64]) -> Option<f64> {
    if scores.len() != labels.len() {
        return None;
    }
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut positives = 0usize;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share their mean.
        let mean_rank = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            if labels[k] >= 0.5 {
                rank_sum += mean_rank;
                positives += 1;
            }
        }
        i = j + 1;
    }
    let negatives = n - positives;
    if positives == 0 || negatives == 0 {
        return None;
    }
    let p = positives as f64;
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}

pub fn mse(predictions: &[f64], labels: &[f64]) -> Option<f64> {
    if predictions.is_empty() || predictions.len() != labels.len() {
        return None;
    }
    let sum: f64 = predictions.iter().zip(labels).map(|(p, y)| (p - y) * (p - y)).sum();
    Some(sum / predictions.len() as f64)
}

/// Mean binary cross-entropy of logits.
pub fn logloss(logits: &[f64], labels: &[f64]) -> Option<f64> {
    if logits.is_empty() || logits.len() != labels.len() {
        return None;
    }
    let sum: f64 = logits.iter().zip(labels).map(|(&z, &y)| bce_with_logit(z, y)).sum();
    Some(sum / logits.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Auc,
    Mse,
}

/// One task evaluated on the samples of one group it serves. Series are
/// indexed like [`MetricsReport::epochs`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub name: String,
    pub label: String,
    pub group: String,
    pub metric: MetricKind,
    pub train: Vec<Option<f64>>,
    pub test: Vec<Option<f64>>,
    /// MSE for regression heads, log loss for binary heads.
    pub train_error: Vec<Option<f64>>,
    pub test_error: Vec<Option<f64>>,
    pub train_count: usize,
    pub test_count: usize,
}

/// Sample-weighted error of every task cell sharing a group and label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMetrics {
    pub group: String,
    pub label: String,
    pub train_error: Vec<Option<f64>>,
    pub test_error: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSeries {
    pub group: String,
    pub label: String,
    /// `test_error − train_error` per evaluation.
    pub gap: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub arch: String,
    pub seed: u64,
    /// Content hash of the experiment configuration; empty when unknown.
    pub config_digest: String,
    pub optimizer_steps: u64,
    /// Mean batch loss per epoch.
    pub train_loss: Vec<f64>,
    /// Epochs (1-based) at which evaluations were taken.
    pub epochs: Vec<usize>,
    pub tasks: Vec<TaskMetrics>,
    pub regions: Vec<RegionMetrics>,
    pub gaps: Vec<GapSeries>,
}

impl MetricsReport {
    pub fn region(&self, group: &str, label: &str) -> Option<&RegionMetrics> {
        self.regions.iter().find(|r| r.group == group && r.label == label)
    }

    pub fn gap(&self, group: &str, label: &str) -> Option<&GapSeries> {
        self.gaps.iter().find(|g| g.group == group && g.label == label)
    }

    pub fn task(&self, name: &str, group: &str) -> Option<&TaskMetrics> {
        self.tasks.iter().find(|t| t.name == name && t.group == group)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverfitRow {
    pub group: String,
    pub label: String,
    pub epoch: usize,
    /// `(baseline − model) / baseline` on training error.
    pub train_impr: Option<f64>,
    pub test_impr: Option<f64>,
    pub model_gap: Option<f64>,
    pub baseline_gap: Option<f64>,
}

fn improvement(baseline: Option<f64>, model: Option<f64>) -> Option<f64> {
    match (baseline, model) {
        (Some(b), Some(m)) if b != 0.0 => Some((b - m) / b),
        _ => None,
    }
}

/// Relative error improvements of `report` over `baseline` per group,
/// label and evaluation, plus both models' test−train gaps.
pub fn overfit_report(report: &MetricsReport, baseline: &MetricsReport) -> Result<Vec<OverfitRow>> {
    if report.epochs != baseline.epochs {
        bail!(Contract, "reports were evaluated at different epochs");
    }
    if report.regions.len() != baseline.regions.len() {
        bail!(Contract, "reports cover different regions");
    }
    let mut rows = Vec::new();
    for r in &report.regions {
        let Some(b) = baseline.region(&r.group, &r.label) else {
            bail!(Contract, "baseline has no region {}/{}", r.group, r.label);
        };
        for (k, &epoch) in report.epochs.iter().enumerate() {
            let gap = |m: &RegionMetrics| match (m.train_error[k], m.test_error[k]) {
                (Some(a), Some(b)) => Some(b - a),
                _ => None,
            };
            rows.push(OverfitRow {
                group: r.group.clone(),
                label: r.label.clone(),
                epoch,
                train_impr: improvement(b.train_error[k], r.train_error[k]),
                test_impr: improvement(b.test_error[k], r.test_error[k]),
                model_gap: gap(r),
                baseline_gap: gap(b),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[0.0, 0.0, 1.0, 1.0]), Some(1.0));
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &[0.0, 0.0, 1.0, 1.0]), Some(0.0));
        assert_eq!(auc(&[0.5, 0.5], &[0.0, 1.0]), Some(0.5));
        assert_eq!(auc(&[0.1, 0.2], &[1.0, 1.0]), None);
    }

    fn region(train: f64, test: f64) -> MetricsReport {
        MetricsReport {
            arch: "x".into(),
            seed: 0,
            config_digest: String::new(),
            optimizer_steps: 0,
            train_loss: vec![],
            epochs: vec![1],
            tasks: vec![],
            regions: vec![RegionMetrics {
                group: "New".into(),
                label: "cmpl".into(),
                train_error: vec![Some(train)],
                test_error: vec![Some(test)],
            }],
            gaps: vec![],
        }
    }

    #[test]
    fn improvements() {
        let rows = overfit_report(&region(0.05, 0.09), &region(0.05, 0.10)).unwrap();
        assert!((rows[0].test_impr.unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(rows[0].train_impr, Some(0.0));
        let same = overfit_report(&region(0.05, 0.1), &region(0.05, 0.1)).unwrap();
        assert_eq!((same[0].train_impr, same[0].test_impr), (Some(0.0), Some(0.0)));
        let zero = overfit_report(&region(0.05, 0.1), &region(0.0, 0.1)).unwrap();
        assert_eq!(zero[0].train_impr, None);
    }
}
