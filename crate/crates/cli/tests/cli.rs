use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn xaml(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xaml")).args(args).output().expect("binary runs")
}

fn bundled(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name).display().to_string()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn train(dir: &Path, name: &str) -> (PathBuf, PathBuf, Output) {
    let model = dir.join(format!("{name}.json"));
    let report = dir.join(format!("{name}.report.json"));
    let out = xaml(&[
        "train",
        "--data",
        &bundled("two_gaussians.csv"),
        "--schema",
        &bundled("two_gaussians.schema.json"),
        "--task",
        "classification",
        "--mode",
        "fast",
        "--seed",
        "3",
        "--out",
        path_str(&model),
        "--report",
        path_str(&report),
    ]);
    (model, report, out)
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn train_writes_model_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let (model, report, out) = train(dir.path(), "m");
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(model.is_file());
    let r = read_json(&report);
    assert_eq!(r["selection"]["results"].as_array().unwrap().len(), 20);
    assert!(r["training_seconds"].as_f64().unwrap() > 0.0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().count(), 1);
    let m = read_json(&model);
    assert_eq!(m["format_version"], 1);
    assert_eq!(m["members"].as_array().unwrap().len(), 7);
}

#[test]
fn training_twice_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let (a, _, _) = train(dir.path(), "a");
    let (b, _, _) = train(dir.path(), "b");
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn usage_errors_exit_2() {
    let out = xaml(&["train", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("Usage"));
    assert_eq!(xaml(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(xaml(&["cv", "--task", "clustering"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1_with_one_line() {
    let out = xaml(&[
        "train",
        "--data",
        "/nonexistent/file.csv",
        "--schema",
        &bundled("two_gaussians.schema.json"),
        "--task",
        "classification",
        "--out",
        "/tmp/never.json",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr(&out).trim_end().lines().count(), 1);
}

#[test]
fn evaluate_on_training_data() {
    let dir = tempfile::tempdir().unwrap();
    let (model, _, _) = train(dir.path(), "m");
    let metrics = dir.path().join("metrics.json");
    let out = xaml(&[
        "evaluate",
        "--model",
        path_str(&model),
        "--data",
        &bundled("two_gaussians.csv"),
        "--schema",
        &bundled("two_gaussians.schema.json"),
        "--report",
        path_str(&metrics),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let m = read_json(&metrics);
    assert!(m["metrics"]["accuracy"].as_f64().unwrap() >= 0.98);
    assert!(m["metrics"]["jaccard"].is_array());
    assert!(String::from_utf8_lossy(&out.stdout).contains("accuracy"));
}

#[test]
fn predict_writes_one_row_per_input() {
    let dir = tempfile::tempdir().unwrap();
    let (model, _, _) = train(dir.path(), "m");
    // Features only, no target column.
    let input = dir.path().join("x.csv");
    std::fs::write(&input, "x1,x2\n2.1,1.9\n-2.0,-2.2\n0.5,0.4\n").unwrap();
    let preds = dir.path().join("p.csv");
    let out = xaml(&["predict", "--model", path_str(&model), "--data", path_str(&input), "--out", path_str(&preds)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&preds).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines, vec!["prediction", "pos", "neg", "pos"]);
    // A file that still has the target column works too.
    let out = xaml(&["predict", "--model", path_str(&model), "--data", &bundled("two_gaussians.csv"), "--out", path_str(&preds)]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(std::fs::read_to_string(&preds).unwrap().lines().count(), 401);
}

#[test]
fn wrong_width_is_a_shape_error() {
    let dir = tempfile::tempdir().unwrap();
    let (model, _, _) = train(dir.path(), "m");
    let wide = dir.path().join("wide.csv");
    std::fs::write(&wide, "x1,x2,x3,y\n1,2,3,pos\n").unwrap();
    let out = xaml(&[
        "evaluate",
        "--model",
        path_str(&model),
        "--data",
        path_str(&wide),
        "--schema",
        &bundled("two_gaussians.schema.json"),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("shape mismatch") && err.contains("expected 2") && err.contains("3 non-target"), "{err}");
}

fn cv(dir: &Path, augment: bool) -> serde_json::Value {
    let data = dir.join("small.csv");
    let schema = dir.join("small.schema.json");
    let out = xaml(&[
        "generate",
        "--kind",
        "blobs",
        "--rows",
        "100",
        "--out",
        path_str(&data),
        "--schema-out",
        path_str(&schema),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = dir.join("cv.json");
    let mut args = vec![
        "cv",
        "--data",
        path_str(&data),
        "--schema",
        path_str(&schema),
        "--task",
        "classification",
        "--folds",
        "5",
        "--ensemble-size",
        "3",
        "--report",
        path_str(&report),
    ];
    if augment {
        args.push("--augment");
    }
    let out = xaml(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    read_json(&report)
}

#[test]
fn cv_predicts_every_sample_once() {
    let dir = tempfile::tempdir().unwrap();
    let r = cv(dir.path(), false);
    let mut seen = vec![0; 100];
    let mut correct = 0;
    for f in r["folds"].as_array().unwrap() {
        for i in f["test_indices"].as_array().unwrap() {
            seen[i.as_u64().unwrap() as usize] += 1;
        }
        let p = &f["predictions"];
        let truth = p["truth"].as_array().unwrap();
        let pred = p["predicted"].as_array().unwrap();
        correct += truth.iter().zip(pred).filter(|(t, q)| t == q).count();
        assert_eq!(f["train_rows"], 80);
    }
    assert!(seen.iter().all(|c| *c == 1));
    let acc = r["aggregate"]["accuracy"].as_f64().unwrap();
    assert_eq!(acc, correct as f64 / 100.0);
}

#[test]
fn cv_augment_doubles_training_rows() {
    let dir = tempfile::tempdir().unwrap();
    let r = cv(dir.path(), true);
    for f in r["folds"].as_array().unwrap() {
        assert_eq!(f["train_rows"], 160);
        assert_eq!(f["test_indices"].as_array().unwrap().len(), 20);
    }
    assert_eq!(r["protocol"]["kind"], "augmented-kfold");
}

#[test]
fn synthetic_benchmark_runs_offline() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("bench.json");
    let out = xaml(&["benchmark", "--suite", "synthetic", "--report", path_str(&report), "--strict"]);
    assert!(out.status.success(), "{}\n{}", stderr(&out), String::from_utf8_lossy(&out.stdout));
    let r = read_json(&report);
    let runs = r["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 3);
    let cls = &runs[1]["report"]["aggregate"];
    for key in ["accuracy", "jaccard", "jaccard_variance", "jaccard_min", "f1"] {
        assert!(!cls[key].is_null(), "missing {key}");
    }
    assert!(runs[2]["report"]["aggregate"]["pearson_r"].as_f64().is_some());
    for run in runs {
        assert!(run["report"]["training_seconds"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn missing_dataset_lists_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = xaml(&["benchmark", "--suite", "qsar", "--data-dir", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("qsar_oral_toxicity.csv"));
    let out = xaml(&["benchmark", "--suite", "har"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("X_train.txt"));
}

#[test]
fn threads_flag_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let (a, _, _) = train(dir.path(), "a");
    let b = dir.path().join("b.json");
    let out = xaml(&[
        "--threads",
        "1",
        "train",
        "--data",
        &bundled("two_gaussians.csv"),
        "--schema",
        &bundled("two_gaussians.schema.json"),
        "--task",
        "classification",
        "--seed",
        "3",
        "--out",
        path_str(&b),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}
