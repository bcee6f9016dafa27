//! Classification and regression metrics.
//!
//! Per-class scores come from the confusion matrix: with `TP`, `FP`, `FN`
//! counted for each class, the Jaccard index is `TP / (TP + FP + FN)` and
//! F1 is `2TP / (2TP + FP + FN)`. A class that never occurs and is never
//! predicted has a zero denominator; it scores 1.0 and is flagged.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// `counts[t][p]` = samples of true class `t` predicted as `p`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub k: usize,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if k == 0 || counts.iter().any(|r| r.len() != k) {
            return Err(invalid("confusion matrix must be square and non-empty"));
        }
        Ok(Self { k, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn true_positives(&self, c: usize) -> u64 {
        self.counts[c][c]
    }

    pub fn false_positives(&self, c: usize) -> u64 {
        (0..self.k).map(|t| self.counts[t][c]).sum::<u64>() - self.counts[c][c]
    }

    pub fn false_negatives(&self, c: usize) -> u64 {
        self.counts[c].iter().sum::<u64>() - self.counts[c][c]
    }

    /// Classes that are absent from both truth and predictions.
    pub fn empty_classes(&self) -> Vec<bool> {
        (0..self.k)
            .map(|c| self.true_positives(c) + self.false_positives(c) + self.false_negatives(c) == 0)
            .collect()
    }

    /// Element-wise sum of two matrices over the same classes.
    pub fn merge(&self, other: &ConfusionMatrix) -> Result<ConfusionMatrix> {
        if self.k != other.k {
            return Err(invalid("cannot merge confusion matrices of different sizes"));
        }
        let counts = self
            .counts
            .iter()
            .zip(&other.counts)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        Ok(ConfusionMatrix { k: self.k, counts })
    }

    fn require_samples(&self) -> Result<()> {
        if self.total() == 0 {
            return Err(Error::InvalidState("confusion matrix holds no samples".into()));
        }
        Ok(())
    }
}

pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(invalid(format!(
            "label length mismatch: {} true vs {} predicted",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(invalid("no labels to compare"));
    }
    let mut counts = vec![vec![0u64; k]; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= k || p >= k {
            return Err(invalid(format!("label out of range [0, {k}): ({t}, {p})")));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { k, counts })
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    cm.require_samples()?;
    let trace: u64 = (0..cm.k).map(|c| cm.counts[c][c]).sum();
    Ok(trace as f64 / cm.total() as f64)
}

fn per_class(cm: &ConfusionMatrix, tp_weight: u64) -> Result<Vec<f64>> {
    cm.require_samples()?;
    Ok((0..cm.k)
        .map(|c| {
            let tp = cm.true_positives(c);
            let denom = tp_weight * tp + cm.false_positives(c) + cm.false_negatives(c);
            if denom == 0 {
                1.0
            } else {
                (tp_weight * tp) as f64 / denom as f64
            }
        })
        .collect())
}

pub fn jaccard_per_class(cm: &ConfusionMatrix) -> Result<Vec<f64>> {
    per_class(cm, 1)
}

pub fn f1_per_class(cm: &ConfusionMatrix) -> Result<Vec<f64>> {
    per_class(cm, 2)
}

/// Population variance (divides by the number of classes).
pub fn jaccard_variance(j: &[f64]) -> Result<f64> {
    if j.is_empty() {
        return Err(invalid("variance of an empty vector"));
    }
    if j.iter().all(|v| *v == j[0]) {
        return Ok(0.0);
    }
    let n = j.len() as f64;
    let mean = j.iter().sum::<f64>() / n;
    Ok(j.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n)
}

/// Sample Pearson correlation coefficient.
pub fn pearson_r(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() {
        return Err(invalid(format!(
            "length mismatch: {} vs {}",
            y.len(),
            y_hat.len()
        )));
    }
    if y.len() < 2 {
        return Err(invalid("pearson_r needs at least two points"));
    }
    let n = y.len() as f64;
    let my = y.iter().sum::<f64>() / n;
    let mh = y_hat.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in y.iter().zip(y_hat) {
        let (da, db) = (a - my, b - mh);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput(
            "pearson_r is undefined when an input has zero variance".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() || y.is_empty() {
        return Err(invalid("rmse needs two non-empty vectors of equal length"));
    }
    let mse = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64;
    Ok(mse.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub jaccard: Vec<f64>,
    pub jaccard_variance: f64,
    pub jaccard_min: f64,
    pub f1: Vec<f64>,
    pub empty_class_flags: Vec<bool>,
}

impl ClassificationReport {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Result<Self> {
        let jaccard = jaccard_per_class(cm)?;
        Ok(Self {
            accuracy: accuracy(cm)?,
            jaccard_variance: jaccard_variance(&jaccard)?,
            jaccard_min: jaccard.iter().copied().fold(f64::INFINITY, f64::min),
            f1: f1_per_class(cm)?,
            empty_class_flags: cm.empty_classes(),
            jaccard,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    /// `None` when either input has zero variance.
    pub pearson_r: Option<f64>,
    pub rmse: f64,
}

impl RegressionReport {
    pub fn from_predictions(y: &[f64], y_hat: &[f64]) -> Result<Self> {
        let rmse = rmse(y, y_hat)?;
        let pearson_r = if y.len() < 2 {
            None
        } else {
            match pearson_r(y, y_hat) {
                Ok(r) => Some(r),
                Err(Error::DegenerateInput(_)) => None,
                Err(e) => return Err(e),
            }
        };
        Ok(Self { pearson_r, rmse })
    }
}
