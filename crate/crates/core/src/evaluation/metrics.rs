use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// How performance is scored against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerformanceKind {
    /// Fraction of decisions equal to the 0/1 truth.
    Accuracy,
    /// Area under the ROC curve of scores against 0/1 truth.
    Auc,
    /// Negative mean squared error of values.
    NegMse,
}

/// How behavioral alignment with the human is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorKind {
    /// Fraction of decisions equal to the human's.
    Agreement,
    /// Kendall-style concordance between predicted and human scores.
    Concordance,
}

fn same_length(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Dimension { expected: a, got: b });
    }
    if a == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

/// Performance metric. `predictions` are decisions for accuracy, scores for
/// AUC and values for negative MSE.
pub fn phi_p(predictions: &[f64], truth: &[f64], kind: PerformanceKind) -> Result<f64> {
    same_length(predictions.len(), truth.len())?;
    match kind {
        PerformanceKind::Accuracy => Ok(agreement(predictions, truth)),
        PerformanceKind::Auc => auc(predictions, truth),
        PerformanceKind::NegMse => Ok(-predictions
            .iter()
            .zip(truth)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / predictions.len() as f64),
    }
}

/// Behavioral metric against the human's decisions or scores.
pub fn phi_b(predictions: &[f64], human: &[f64], kind: BehaviorKind) -> Result<f64> {
    same_length(predictions.len(), human.len())?;
    match kind {
        BehaviorKind::Agreement => Ok(agreement(predictions, human)),
        BehaviorKind::Concordance => concordance(predictions, human),
    }
}

fn agreement(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64
}

/// AUC from average ranks (Mann-Whitney), so tied scores count one half.
pub fn auc(scores: &[f64], truth: &[f64]) -> Result<f64> {
    same_length(scores.len(), truth.len())?;
    if let Some(t) = truth.iter().find(|t| **t != 0.0 && **t != 1.0) {
        return Err(Error::InvalidArgument(format!("AUC needs 0/1 truth, got {t}")));
    }
    let n_pos = truth.iter().filter(|t| **t == 1.0).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidArgument("AUC is undefined when truth has a single class".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument("AUC scores must be finite".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && scores[order[end + 1]] == scores[order[start]] {
            end += 1;
        }
        // Ranks are 1-based; the group shares the mean of ranks start+1..=end+1.
        let avg = (start + end) as f64 / 2.0 + 1.0;
        rank_sum += order[start..=end].iter().filter(|&&i| truth[i] == 1.0).count() as f64 * avg;
        start = end + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Kendall's tau-a: `sum_{i<j} sign(a_i - a_j) * sign(b_i - b_j) / C(n, 2)`.
/// Pairs tied in either input contribute zero. A single item scores 1.
pub fn concordance(a: &[f64], b: &[f64]) -> Result<f64> {
    same_length(a.len(), b.len())?;
    let n = a.len();
    if n == 1 {
        return Ok(1.0);
    }
    let sign = |v: f64| {
        if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        }
    };
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += sign(a[i] - a[j]) * sign(b[i] - b[j]);
        }
    }
    Ok(total / (n * (n - 1) / 2) as f64)
}
