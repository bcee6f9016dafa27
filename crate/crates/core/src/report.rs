//! Run reports: per-fold predictions, metrics and timings, plus the pooled
//! aggregate. Reports embed enough raw material (confusion matrices and
//! prediction vectors) for every aggregate to be recomputed.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{AugmentationSpec, TaskKind};
use crate::error::{invalid, io_err, Error, Result};
use crate::metrics::{confusion_matrix, ClassificationReport, ConfusionMatrix, RegressionReport};
use crate::search::{SearchMode, SelectionReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Protocol {
    PredefinedSplit,
    Kfold { k: usize },
    AugmentedKfold { k: usize, augmentation: AugmentationSpec },
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Protocol::PredefinedSplit => write!(f, "predefined split"),
            Protocol::Kfold { k } => write!(f, "{k}-fold"),
            Protocol::AugmentedKfold { k, augmentation } => write!(
                f,
                "{k}-fold, training folds x{} with {}% noise",
                augmentation.duplication_factor,
                augmentation.noise_fraction * 100.0
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Predictions {
    Labels { truth: Vec<usize>, predicted: Vec<usize> },
    Values { truth: Vec<f64>, predicted: Vec<f64> },
}

impl Predictions {
    pub fn len(&self) -> usize {
        match self {
            Predictions::Labels { truth, .. } => truth.len(),
            Predictions::Values { truth, .. } => truth.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Metrics {
    Classification(ClassificationReport),
    Regression(RegressionReport),
}

impl Metrics {
    pub fn classification(&self) -> Option<&ClassificationReport> {
        match self {
            Metrics::Classification(r) => Some(r),
            Metrics::Regression(_) => None,
        }
    }

    pub fn regression(&self) -> Option<&RegressionReport> {
        match self {
            Metrics::Regression(r) => Some(r),
            Metrics::Classification(_) => None,
        }
    }

    /// Largest absolute difference between corresponding fields, or `None`
    /// when the two reports are structurally different.
    fn max_difference(&self, other: &Metrics) -> Option<f64> {
        let close = |a: f64, b: f64| (a - b).abs();
        let vec_diff = |a: &[f64], b: &[f64]| {
            (a.len() == b.len()).then(|| a.iter().zip(b).map(|(x, y)| close(*x, *y)).fold(0.0, f64::max))
        };
        match (self, other) {
            (Metrics::Classification(a), Metrics::Classification(b)) => {
                if a.empty_class_flags != b.empty_class_flags {
                    return None;
                }
                let d = [
                    close(a.accuracy, b.accuracy),
                    close(a.jaccard_variance, b.jaccard_variance),
                    close(a.jaccard_min, b.jaccard_min),
                    vec_diff(&a.jaccard, &b.jaccard)?,
                    vec_diff(&a.f1, &b.f1)?,
                ];
                Some(d.into_iter().fold(0.0, f64::max))
            }
            (Metrics::Regression(a), Metrics::Regression(b)) => {
                let r = match (a.pearson_r, b.pearson_r) {
                    (Some(x), Some(y)) => close(x, y),
                    (None, None) => 0.0,
                    _ => return None,
                };
                Some(r.max(close(a.rmse, b.rmse)))
            }
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub fold: usize,
    /// Rows the model was fitted on (after any augmentation).
    pub train_rows: usize,
    pub test_indices: Vec<usize>,
    pub predictions: Predictions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
    pub metrics: Metrics,
    /// Wall-clock seconds spent in model fitting (search plus final fit).
    pub training_seconds: f64,
    pub selection: SelectionReport,
}

impl FoldRecord {
    pub fn new(
        fold: usize,
        train_rows: usize,
        test_indices: Vec<usize>,
        predictions: Predictions,
        n_classes: Option<usize>,
        training_seconds: f64,
        selection: SelectionReport,
    ) -> Result<Self> {
        let (confusion, metrics) = fold_metrics(&predictions, n_classes)?;
        Ok(Self {
            fold,
            train_rows,
            test_indices,
            predictions,
            confusion,
            metrics,
            training_seconds,
            selection,
        })
    }
}

fn fold_metrics(p: &Predictions, n_classes: Option<usize>) -> Result<(Option<ConfusionMatrix>, Metrics)> {
    match p {
        Predictions::Labels { truth, predicted } => {
            let k = n_classes.ok_or_else(|| invalid("label predictions need a class count"))?;
            let cm = confusion_matrix(truth, predicted, k)?;
            let r = ClassificationReport::from_confusion(&cm)?;
            Ok((Some(cm), Metrics::Classification(r)))
        }
        Predictions::Values { truth, predicted } => Ok((
            None,
            Metrics::Regression(RegressionReport::from_predictions(truth, predicted)?),
        )),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: String,
    pub task: TaskKind,
    pub mode: SearchMode,
    pub protocol: Protocol,
    pub seed: u64,
    pub ensemble_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<String>>,
    pub folds: Vec<FoldRecord>,
    pub aggregate: Metrics,
    /// Sum of per-fold fitting time; excludes loading and evaluation.
    pub training_seconds: f64,
}

impl RunReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dataset: impl Into<String>,
        task: TaskKind,
        mode: SearchMode,
        protocol: Protocol,
        seed: u64,
        ensemble_size: usize,
        classes: Option<Vec<String>>,
        folds: Vec<FoldRecord>,
    ) -> Result<Self> {
        let aggregate = pooled_metrics(&folds, classes.as_ref().map(Vec::len))?;
        Ok(Self {
            dataset: dataset.into(),
            task,
            mode,
            protocol,
            seed,
            ensemble_size,
            training_seconds: folds.iter().map(|f| f.training_seconds).sum(),
            classes,
            folds,
            aggregate,
        })
    }

    /// Total number of test predictions across folds.
    pub fn n_predictions(&self) -> usize {
        self.folds.iter().map(|f| f.predictions.len()).sum()
    }

    /// Recomputes every fold's metrics and the aggregate from the stored
    /// predictions and checks them against the stored values.
    pub fn check_consistency(&self, tolerance: f64) -> Result<()> {
        let n_classes = self.classes.as_ref().map(Vec::len);
        for f in &self.folds {
            let (cm, metrics) = fold_metrics(&f.predictions, n_classes)?;
            if cm != f.confusion {
                return Err(Error::InvalidState(format!(
                    "fold {}: stored confusion matrix does not match predictions",
                    f.fold
                )));
            }
            match metrics.max_difference(&f.metrics) {
                Some(d) if d <= tolerance => {}
                _ => {
                    return Err(Error::InvalidState(format!(
                        "fold {}: stored metrics do not match predictions",
                        f.fold
                    )))
                }
            }
        }
        let pooled = pooled_metrics(&self.folds, n_classes)?;
        match pooled.max_difference(&self.aggregate) {
            Some(d) if d <= tolerance => Ok(()),
            Some(d) => Err(Error::InvalidState(format!(
                "aggregate metrics differ from recomputed values by {d:e}"
            ))),
            None => Err(Error::InvalidState("aggregate metrics have the wrong shape".into())),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    /// Plain-text summary table.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "dataset   {}", self.dataset);
        let _ = writeln!(out, "protocol  {} ({} mode, {} members, seed {})", self.protocol, self.mode, self.ensemble_size, self.seed);
        let _ = writeln!(out, "samples   {}", self.n_predictions());
        let _ = writeln!(out, "training  {:.3} s", self.training_seconds);
        out.push_str(&format_metrics(&self.aggregate, self.classes.as_deref()));
        out
    }
}

/// Pooled metrics: merged confusion matrix for classification, concatenated
/// predictions for regression.
fn pooled_metrics(folds: &[FoldRecord], n_classes: Option<usize>) -> Result<Metrics> {
    if folds.is_empty() {
        return Err(invalid("report has no folds"));
    }
    match &folds[0].predictions {
        Predictions::Labels { .. } => {
            let k = n_classes.ok_or_else(|| invalid("label predictions need a class list"))?;
            let (mut truth, mut predicted) = (Vec::new(), Vec::new());
            for f in folds {
                let Predictions::Labels { truth: t, predicted: p } = &f.predictions else {
                    return Err(invalid("mixed prediction kinds across folds"));
                };
                truth.extend_from_slice(t);
                predicted.extend_from_slice(p);
            }
            let cm = confusion_matrix(&truth, &predicted, k)?;
            Ok(Metrics::Classification(ClassificationReport::from_confusion(&cm)?))
        }
        Predictions::Values { .. } => {
            let (mut truth, mut predicted) = (Vec::new(), Vec::new());
            for f in folds {
                let Predictions::Values { truth: t, predicted: p } = &f.predictions else {
                    return Err(invalid("mixed prediction kinds across folds"));
                };
                truth.extend_from_slice(t);
                predicted.extend_from_slice(p);
            }
            Ok(Metrics::Regression(RegressionReport::from_predictions(&truth, &predicted)?))
        }
    }
}

/// Human-readable rendering of a metrics block.
pub fn format_metrics(metrics: &Metrics, classes: Option<&[String]>) -> String {
    let mut out = String::new();
    match metrics {
        Metrics::Classification(r) => {
            let _ = writeln!(out, "accuracy          {:.4}", r.accuracy);
            let _ = writeln!(out, "jaccard variance  {:.6}", r.jaccard_variance);
            let _ = writeln!(out, "jaccard min       {:.4}", r.jaccard_min);
            let _ = writeln!(out, "{:<20} {:>8} {:>8}", "class", "jaccard", "f1");
            for (i, (j, f1)) in r.jaccard.iter().zip(&r.f1).enumerate() {
                let name = classes
                    .and_then(|c| c.get(i))
                    .cloned()
                    .unwrap_or_else(|| i.to_string());
                let flag = if r.empty_class_flags[i] { "  (absent)" } else { "" };
                let _ = writeln!(out, "{name:<20} {j:>8.4} {f1:>8.4}{flag}");
            }
        }
        Metrics::Regression(r) => {
            match r.pearson_r {
                Some(p) => {
                    let _ = writeln!(out, "pearson r         {p:.4}");
                }
                None => {
                    let _ = writeln!(out, "pearson r         undefined (zero variance)");
                }
            }
            let _ = writeln!(out, "rmse              {:.6}", r.rmse);
        }
    }
    out
}
