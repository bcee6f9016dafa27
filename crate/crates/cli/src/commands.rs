use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde_json::json;
use xaml_core::benchmark::{run_suite, BenchmarkSettings, Suite};
use xaml_core::data::{load_csv, load_for_pipeline, read_header, targets_from_table};
use xaml_core::metrics::confusion_matrix;
use xaml_core::persist::{self, SavedModel};
use xaml_core::protocol::run_kfold;
use xaml_core::report::{format_metrics, Metrics};
use xaml_core::search::{fit_automl, HiddenLayerSettings};
use xaml_core::synthetic;
use xaml_core::{
    AugmentationSpec, AutoMlSettings, ClassificationReport, Dataset, EnsembleModel, FeaturePipeline, LabelCodec,
    RegressionReport, TableSchema, TaskKind, Targets,
};

use crate::{BenchmarkArgs, CvArgs, EvaluateArgs, GenerateArgs, GeneratorArg, PredictArgs, SearchArgs, SuiteArg, TrainArgs};

fn settings(task: TaskKind, s: &SearchArgs) -> Result<AutoMlSettings> {
    if !(s.weight_scale > 0.0 && s.weight_scale.is_finite()) {
        bail!("--weight-scale must be a positive number");
    }
    Ok(AutoMlSettings {
        ensemble_size: s.ensemble_size,
        seed: s.seed,
        hidden: HiddenLayerSettings {
            weight_scale: s.weight_scale,
            ..HiddenLayerSettings::default()
        },
        ..AutoMlSettings::new(task, s.mode.into())
    })
}

fn load_dataset(data: &Path, schema: &Path, task: TaskKind) -> Result<(Dataset, FeaturePipeline)> {
    let schema = TableSchema::from_json_file(schema)?;
    let table = load_csv(data, &schema)?;
    Ok(Dataset::from_table(&table, task)?)
}

fn dataset_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn train(a: &TrainArgs) -> Result<ExitCode> {
    let task = a.task.into();
    let settings = settings(task, &a.search)?;
    let (data, pipeline) = load_dataset(&a.data, &a.schema, task)?;

    let start = Instant::now();
    let (model, selection) = fit_automl(&data.features, &data.targets, &settings)?;
    let training_seconds = start.elapsed().as_secs_f64();

    let saved = SavedModel {
        model,
        mode: Some(settings.mode),
        features: Some(pipeline),
    };
    persist::save(&saved, &a.out)?;

    if let Some(path) = &a.report {
        let report = json!({
            "dataset": dataset_name(&a.data),
            "task": task,
            "mode": settings.mode,
            "seed": settings.seed,
            "ensemble_size": settings.ensemble_size,
            "rows": data.n_rows(),
            "features": data.features.cols(),
            "training_seconds": training_seconds,
            "training_metrics": training_metrics(&saved.model, &data)?,
            "selection": selection,
        });
        write_json(path, &report)?;
    }
    println!(
        "trained {} ensemble: {} members, {} neurons, alpha {:e}, {} candidates, {:.3} s -> {}",
        task,
        saved.model.members().len(),
        selection.chosen.neurons,
        selection.chosen.alpha,
        selection.results.len(),
        training_seconds,
        a.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

/// Fit quality on the training data itself.
fn training_metrics(model: &EnsembleModel, data: &Dataset) -> Result<Metrics> {
    score(model, &data.features, &data.targets).map(|(m, _)| m)
}

/// Scores predictions against targets. Labels the model never saw are
/// appended to the class list so they count as errors.
fn score(model: &EnsembleModel, x: &xaml_core::Matrix, targets: &Targets) -> Result<(Metrics, Option<Vec<String>>)> {
    match (model.task(), targets) {
        (TaskKind::Classification, Targets::Labels(truth)) => {
            let codec = model.codec().expect("classification models carry a codec");
            let mut classes = codec.classes().to_vec();
            for t in truth {
                if !classes.contains(t) {
                    classes.push(t.clone());
                }
            }
            let extended = LabelCodec::new(classes.clone())?;
            let t = extended.indices(truth)?;
            let p = extended.indices(&model.predict_labels(x)?)?;
            let cm = confusion_matrix(&t, &p, classes.len())?;
            Ok((Metrics::Classification(ClassificationReport::from_confusion(&cm)?), Some(classes)))
        }
        (TaskKind::Regression, Targets::Values(truth)) => {
            let p = model.predict_regression(x)?;
            Ok((Metrics::Regression(RegressionReport::from_predictions(truth, &p)?), None))
        }
        (task, _) => bail!("target column does not match the model's {task} task"),
    }
}

fn model_pipeline(saved: &SavedModel, header: &[String]) -> FeaturePipeline {
    // Models written by the library alone carry no pipeline; treat every
    // column as numeric in that case.
    saved
        .features
        .clone()
        .unwrap_or_else(|| FeaturePipeline::numeric(header, None))
}

pub fn predict(a: &PredictArgs) -> Result<ExitCode> {
    let saved = persist::load(&a.model)?;
    let header = read_header(&a.data)?;
    let pipeline = model_pipeline(&saved, &header);
    let table = load_for_pipeline(&a.data, &pipeline)?;
    let x = pipeline.transform(&table)?;
    let model = &saved.model;

    let mut w = csv::Writer::from_path(&a.out).with_context(|| format!("cannot write {}", a.out.display()))?;
    w.write_record(["prediction"])?;
    match model.task() {
        TaskKind::Classification => {
            for label in model.predict_labels(&x)? {
                w.write_record([label])?;
            }
        }
        TaskKind::Regression => {
            for v in model.predict_regression(&x)? {
                w.write_record([format!("{v:?}")])?;
            }
        }
    }
    w.flush()?;
    println!("wrote {} predictions to {}", x.rows(), a.out.display());
    Ok(ExitCode::SUCCESS)
}

pub fn evaluate(a: &EvaluateArgs) -> Result<ExitCode> {
    let saved = persist::load(&a.model)?;
    let schema = TableSchema::from_json_file(&a.schema)?;
    let target = schema.target().name.clone();
    let header = read_header(&a.data)?;
    let features: Vec<String> = header.iter().filter(|h| **h != target).cloned().collect();
    let mut pipeline = model_pipeline(&saved, &features);
    pipeline.target = Some(target.clone());
    let table = load_for_pipeline(&a.data, &pipeline)?;
    if table.target().is_none() {
        bail!("{}: target column '{target}' not found", a.data.display());
    }
    let x = pipeline.transform(&table)?;
    let targets = targets_from_table(&table, saved.model.task())?;
    let (metrics, classes) = score(&saved.model, &x, &targets)?;

    println!("rows              {}", x.rows());
    print!("{}", format_metrics(&metrics, classes.as_deref()));
    if let Some(path) = &a.report {
        let report = json!({
            "model": a.model.display().to_string(),
            "dataset": dataset_name(&a.data),
            "task": saved.model.task(),
            "rows": x.rows(),
            "classes": classes,
            "metrics": metrics,
        });
        write_json(path, &report)?;
    }
    Ok(ExitCode::SUCCESS)
}

pub fn cv(a: &CvArgs) -> Result<ExitCode> {
    let task = a.task.into();
    let settings = settings(task, &a.search)?;
    let (data, _) = load_dataset(&a.data, &a.schema, task)?;
    let augment = a.augment.then(AugmentationSpec::default);
    let report = run_kfold(&dataset_name(&a.data), &data, a.folds, augment, &settings)?;
    print!("{}", report.summary());
    if let Some(path) = &a.report {
        report.save(path)?;
    }
    Ok(ExitCode::SUCCESS)
}

pub fn benchmark(a: &BenchmarkArgs) -> Result<ExitCode> {
    let suite = match a.suite {
        SuiteArg::Har => Suite::Har,
        SuiteArg::Parkinsons => Suite::Parkinsons,
        SuiteArg::Qsar => Suite::Qsar,
        SuiteArg::Cnae9 => Suite::Cnae9,
        SuiteArg::Movies => Suite::Movies,
        SuiteArg::Synthetic => Suite::Synthetic,
    };
    let base = settings(TaskKind::Classification, &a.search)?;
    let bench = BenchmarkSettings {
        ensemble_size: base.ensemble_size,
        hidden: base.hidden,
        ..BenchmarkSettings::new(base.mode, base.seed)
    };
    if suite != Suite::Synthetic && a.data_dir.is_none() {
        bail!(
            "--data-dir is required for the {suite} suite (expected files: {})",
            suite.expected_files().join(", ")
        );
    }
    let report = run_suite(suite, a.data_dir.as_deref(), &bench)?;
    print!("{}", report.summary());
    if let Some(path) = &a.report {
        report.save(path)?;
    }
    Ok(if a.strict && !report.passed() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

pub fn generate(a: &GenerateArgs) -> Result<ExitCode> {
    let data = match a.kind {
        GeneratorArg::TwoGaussians => synthetic::two_gaussians(a.rows, a.seed),
        GeneratorArg::Blobs => synthetic::imbalanced_blobs(a.rows, a.seed),
        GeneratorArg::Sine => synthetic::sine(a.rows, a.seed),
        GeneratorArg::Noise => synthetic::pure_noise(a.rows, 5, a.seed),
    };
    synthetic::write_csv(&data, &a.out)?;
    if let Some(path) = &a.schema_out {
        std::fs::write(path, synthetic::schema_json(data.features.cols()))
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    println!("wrote {} rows to {}", data.n_rows(), a.out.display());
    Ok(ExitCode::SUCCESS)
}
