//! Evaluation protocols: a predefined train/test split, and k-fold
//! cross-validation with optional augmentation of the training folds.
//!
//! Timings cover model fitting only. Class indices in reports refer to a
//! codec built from the labels of the whole dataset, so folds that miss a
//! class still pool into one confusion matrix.

use std::time::Instant;

use crate::data::{augment_duplicate_noise, kfold_split, AugmentationSpec, Dataset, TaskKind, Targets};
use crate::ensemble::{derive_member_seed, LabelCodec};
use crate::error::{invalid, Result};
use crate::report::{FoldRecord, Predictions, Protocol, RunReport};
use crate::search::{fit_automl, AutoMlSettings};

fn global_codec(targets: &[&Targets]) -> Result<Option<LabelCodec>> {
    let mut labels: Vec<&str> = Vec::new();
    for t in targets {
        match t {
            Targets::Labels(v) => labels.extend(v.iter().map(String::as_str)),
            Targets::Values(_) => return Ok(None),
        }
    }
    LabelCodec::from_labels(&labels).map(Some)
}

fn check_task(data: &Dataset, settings: &AutoMlSettings) -> Result<()> {
    if data.targets.task() != settings.task {
        return Err(invalid(format!(
            "{} targets given for a {} run",
            data.targets.task(),
            settings.task
        )));
    }
    Ok(())
}

/// Fits on `train` and scores on `test`.
fn fit_and_score(
    fold: usize,
    train: &Dataset,
    test: &Dataset,
    test_indices: Vec<usize>,
    codec: Option<&LabelCodec>,
    settings: &AutoMlSettings,
) -> Result<FoldRecord> {
    let start = Instant::now();
    let (model, selection) = fit_automl(&train.features, &train.targets, settings)?;
    let training_seconds = start.elapsed().as_secs_f64();

    let predictions = match (&test.targets, codec) {
        (Targets::Labels(truth), Some(codec)) => Predictions::Labels {
            truth: codec.indices(truth)?,
            predicted: codec.indices(&model.predict_labels(&test.features)?)?,
        },
        (Targets::Values(truth), None) => Predictions::Values {
            truth: truth.clone(),
            predicted: model.predict_regression(&test.features)?,
        },
        _ => return Err(invalid("target kind does not match the task")),
    };
    FoldRecord::new(
        fold,
        train.n_rows(),
        test_indices,
        predictions,
        codec.map(LabelCodec::len),
        training_seconds,
        selection,
    )
}

pub fn run_predefined_split(
    dataset: &str,
    train: &Dataset,
    test: &Dataset,
    settings: &AutoMlSettings,
) -> Result<RunReport> {
    check_task(train, settings)?;
    check_task(test, settings)?;
    if train.features.cols() != test.features.cols() {
        return Err(invalid(format!(
            "train has {} features but test has {}",
            train.features.cols(),
            test.features.cols()
        )));
    }
    let codec = global_codec(&[&train.targets, &test.targets])?;
    let fold = fit_and_score(0, train, test, (0..test.n_rows()).collect(), codec.as_ref(), settings)?;
    RunReport::new(
        dataset,
        settings.task,
        settings.mode,
        Protocol::PredefinedSplit,
        settings.seed,
        settings.ensemble_size,
        codec.map(|c| c.classes().to_vec()),
        vec![fold],
    )
}

/// Outer k-fold cross-validation. With `augment`, each training part (never
/// the test part) is expanded by [`augment_duplicate_noise`] before fitting.
pub fn run_kfold(
    dataset: &str,
    data: &Dataset,
    k: usize,
    augment: Option<AugmentationSpec>,
    settings: &AutoMlSettings,
) -> Result<RunReport> {
    check_task(data, settings)?;
    let plan = kfold_split(data.n_rows(), k, settings.seed)?;
    let codec = global_codec(&[&data.targets])?;
    if settings.task == TaskKind::Classification && codec.as_ref().map_or(0, LabelCodec::len) < 2 {
        return Err(invalid("classification needs at least two distinct classes"));
    }
    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let test_idx = plan.test_indices(f);
        let mut train = data.select(&plan.train_indices(f));
        if let Some(spec) = &augment {
            let seed = derive_member_seed(settings.seed ^ 0xA076_1D64_78BD_642F, f as u64);
            train = match &train.targets {
                Targets::Labels(v) => {
                    let (x, y) = augment_duplicate_noise(&train.features, v, spec, seed)?;
                    Dataset::new(x, Targets::Labels(y))?
                }
                Targets::Values(v) => {
                    let (x, y) = augment_duplicate_noise(&train.features, v, spec, seed)?;
                    Dataset::new(x, Targets::Values(y))?
                }
            };
        }
        let test = data.select(&test_idx);
        folds.push(fit_and_score(f, &train, &test, test_idx, codec.as_ref(), settings)?);
    }
    let protocol = match augment {
        Some(augmentation) => Protocol::AugmentedKfold { k, augmentation },
        None => Protocol::Kfold { k },
    };
    RunReport::new(
        dataset,
        settings.task,
        settings.mode,
        protocol,
        settings.seed,
        settings.ensemble_size,
        codec.map(|c| c.classes().to_vec()),
        folds,
    )
}
