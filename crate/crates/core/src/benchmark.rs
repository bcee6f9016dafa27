//! Benchmark suites over the public datasets, plus an offline synthetic suite.
//!
//! Dataset files are never downloaded: they must be placed in a data
//! directory by the user. If that directory contains a `MANIFEST.sha256` file
//! (the `sha256sum` output format), every listed file used by a suite is
//! verified before loading.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{load_csv, AugmentationSpec, Dataset, TableSchema, TaskKind, Targets};
use crate::error::{invalid, io_err, Error, Result};
use crate::linalg::Matrix;
use crate::protocol::{run_kfold, run_predefined_split};
use crate::report::{Metrics, RunReport};
use crate::search::{AutoMlSettings, HiddenLayerSettings, SearchMode};
use crate::synthetic;

pub const MANIFEST_FILE: &str = "MANIFEST.sha256";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Har,
    Parkinsons,
    Qsar,
    Cnae9,
    Movies,
    Synthetic,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Har,
        Suite::Parkinsons,
        Suite::Qsar,
        Suite::Cnae9,
        Suite::Movies,
        Suite::Synthetic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Har => "har",
            Suite::Parkinsons => "parkinsons",
            Suite::Qsar => "qsar",
            Suite::Cnae9 => "cnae9",
            Suite::Movies => "movies",
            Suite::Synthetic => "synthetic",
        }
    }

    /// Files the suite reads, relative to the data directory.
    pub fn expected_files(self) -> &'static [&'static str] {
        match self {
            Suite::Har => &["train/X_train.txt", "train/y_train.txt", "test/X_test.txt", "test/y_test.txt"],
            Suite::Parkinsons => &["pd_speech_features.csv"],
            Suite::Qsar => &["qsar_oral_toxicity.csv"],
            Suite::Cnae9 => &["CNAE-9.data"],
            Suite::Movies => &["movies.csv", "movies.schema.json"],
            Suite::Synthetic => &[],
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s.to_ascii_lowercase())
            .ok_or_else(|| invalid(format!("unknown suite '{s}' (expected har, parkinsons, qsar, cnae9, movies or synthetic)")))
    }
}

/// One target a run is compared against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub metric: String,
    pub value: f64,
    /// Published figure, when there is one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
    /// The run passes when `value >= floor` (or `> floor` when `strict`).
    pub floor: f64,
    #[serde(default)]
    pub strict: bool,
    pub passed: bool,
}

impl Check {
    fn new(metric: &str, value: f64, reference: Option<f64>, floor: f64, strict: bool) -> Self {
        let passed = if strict { value > floor } else { value >= floor };
        Self {
            metric: metric.to_owned(),
            value,
            reference,
            floor,
            strict,
            passed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRun {
    pub report: RunReport,
    pub checks: Vec<Check>,
}

impl BenchmarkRun {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub suite: Suite,
    pub mode: SearchMode,
    pub seed: u64,
    pub runs: Vec<BenchmarkRun>,
}

impl BenchmarkReport {
    pub fn passed(&self) -> bool {
        self.runs.iter().all(BenchmarkRun::passed)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(io_err(path))
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for run in &self.runs {
            out.push_str(&run.report.summary());
            for c in &run.checks {
                let reference = c.reference.map(|r| format!(", published {r:.4}")).unwrap_or_default();
                let op = if c.strict { ">" } else { ">=" };
                out.push_str(&format!(
                    "check     {} = {:.4} (floor {op} {}{reference}): {}\n",
                    c.metric,
                    c.value,
                    c.floor,
                    if c.passed { "pass" } else { "FAIL" }
                ));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct BenchmarkSettings {
    pub mode: SearchMode,
    pub seed: u64,
    pub ensemble_size: usize,
    pub hidden: HiddenLayerSettings,
    pub folds: usize,
}

impl BenchmarkSettings {
    pub fn new(mode: SearchMode, seed: u64) -> Self {
        Self {
            mode,
            seed,
            ensemble_size: crate::ensemble::DEFAULT_ENSEMBLE_SIZE,
            hidden: HiddenLayerSettings::default(),
            folds: 5,
        }
    }

    fn automl(&self, task: TaskKind) -> AutoMlSettings {
        AutoMlSettings {
            ensemble_size: self.ensemble_size,
            seed: self.seed,
            hidden: self.hidden,
            ..AutoMlSettings::new(task, self.mode)
        }
    }
}

/// Runs a suite. `data_dir` is required for every suite except `synthetic`.
pub fn run_suite(suite: Suite, data_dir: Option<&Path>, settings: &BenchmarkSettings) -> Result<BenchmarkReport> {
    let runs = match suite {
        Suite::Synthetic => run_synthetic(settings)?,
        _ => {
            let dir = data_dir.ok_or_else(|| Error::MissingDataset {
                dir: PathBuf::from("<none>"),
                expected: suite.expected_files().join(", "),
            })?;
            vec![run_external(suite, dir, settings)?]
        }
    };
    Ok(BenchmarkReport {
        suite,
        mode: settings.mode,
        seed: settings.seed,
        runs,
    })
}

fn accuracy_of(report: &RunReport) -> Result<f64> {
    report
        .aggregate
        .classification()
        .map(|r| r.accuracy)
        .ok_or_else(|| Error::InvalidState("expected classification metrics".into()))
}

fn pearson_of(report: &RunReport) -> f64 {
    // An undefined correlation (constant predictions) counts as no correlation.
    report.aggregate.regression().and_then(|r| r.pearson_r).unwrap_or(0.0)
}

fn run_external(suite: Suite, dir: &Path, settings: &BenchmarkSettings) -> Result<BenchmarkRun> {
    let root = resolve_root(suite, dir)?;
    verify_manifest(suite, &root)?;
    let accurate = settings.mode == SearchMode::Accurate;
    let k = settings.folds;
    let augment = Some(AugmentationSpec::default());
    match suite {
        Suite::Har => {
            let (train, test) = load_har(&root)?;
            let report = run_predefined_split("har", &train, &test, &settings.automl(TaskKind::Classification))?;
            let acc = accuracy_of(&report)?;
            Ok(BenchmarkRun {
                checks: vec![Check::new("accuracy", acc, Some(0.9626), 0.93, false)],
                report,
            })
        }
        Suite::Parkinsons => {
            let data = load_parkinsons(&root)?;
            let report = run_kfold("parkinsons", &data, k, augment, &settings.automl(TaskKind::Classification))?;
            let reference = if accurate { 0.9233 } else { 0.9088 };
            let acc = accuracy_of(&report)?;
            Ok(BenchmarkRun {
                checks: vec![Check::new("accuracy", acc, Some(reference), 0.85, false)],
                report,
            })
        }
        Suite::Qsar => {
            let data = load_qsar(&root)?;
            let report = run_kfold("qsar", &data, k, None, &settings.automl(TaskKind::Classification))?;
            let reference = if accurate { 0.9394 } else { 0.937 };
            let Some(cls) = report.aggregate.classification() else {
                return Err(Error::InvalidState("expected classification metrics".into()));
            };
            let checks = vec![
                Check::new("accuracy", cls.accuracy, Some(reference), 0.90, false),
                Check::new("jaccard_min", cls.jaccard_min, None, 0.0, true),
            ];
            Ok(BenchmarkRun { checks, report })
        }
        Suite::Cnae9 => {
            let data = load_cnae9(&root)?;
            let report = run_kfold("cnae9", &data, k, augment, &settings.automl(TaskKind::Classification))?;
            let acc = accuracy_of(&report)?;
            Ok(BenchmarkRun {
                checks: vec![Check::new("accuracy", acc, Some(0.7721), 0.7721, false)],
                report,
            })
        }
        Suite::Movies => {
            let data = load_movies(&root)?;
            let report = run_kfold("movies", &data, k, None, &settings.automl(TaskKind::Regression))?;
            let r = pearson_of(&report);
            Ok(BenchmarkRun {
                checks: vec![Check::new("pearson_r", r, Some(0.82), 0.70, false)],
                report,
            })
        }
        Suite::Synthetic => unreachable!("handled by run_synthetic"),
    }
}

fn run_synthetic(settings: &BenchmarkSettings) -> Result<Vec<BenchmarkRun>> {
    let k = settings.folds;
    let mut runs = Vec::new();

    let gauss = synthetic::two_gaussians(200, settings.seed);
    let report = run_kfold("two-gaussians", &gauss, k, None, &settings.automl(TaskKind::Classification))?;
    let acc = accuracy_of(&report)?;
    runs.push(BenchmarkRun {
        checks: vec![Check::new("accuracy", acc, None, 0.98, false)],
        report,
    });

    let blobs = synthetic::imbalanced_blobs(300, settings.seed);
    let report = run_kfold(
        "imbalanced-blobs",
        &blobs,
        k,
        Some(AugmentationSpec::default()),
        &settings.automl(TaskKind::Classification),
    )?;
    let Some(cls) = report.aggregate.classification() else {
        return Err(Error::InvalidState("expected classification metrics".into()));
    };
    let checks = vec![
        Check::new("accuracy", cls.accuracy, None, 0.90, false),
        Check::new("jaccard_min", cls.jaccard_min, None, 0.0, true),
    ];
    runs.push(BenchmarkRun { checks, report });

    let sine = synthetic::sine(200, settings.seed);
    let report = run_kfold("sine", &sine, k, None, &settings.automl(TaskKind::Regression))?;
    let r = pearson_of(&report);
    runs.push(BenchmarkRun {
        checks: vec![Check::new("pearson_r", r, None, 0.99, false)],
        report,
    });
    Ok(runs)
}

/// HAR archives unpack into `UCI HAR Dataset/`; accept that folder or its
/// contents placed directly in the data directory.
fn resolve_root(suite: Suite, dir: &Path) -> Result<PathBuf> {
    let mut candidates = vec![dir.to_path_buf()];
    if suite == Suite::Har {
        candidates.push(dir.join("UCI HAR Dataset"));
    }
    for root in &candidates {
        if suite.expected_files().iter().all(|f| root.join(f).is_file()) {
            return Ok(root.clone());
        }
    }
    let missing: Vec<&str> = suite
        .expected_files()
        .iter()
        .copied()
        .filter(|f| !dir.join(f).is_file())
        .collect();
    Err(Error::MissingDataset {
        dir: dir.to_path_buf(),
        expected: missing.join(", "),
    })
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(io_err(path))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(io_err(path))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Parses `sha256sum` output: `<hex digest> [ *]<relative path>` per line.
pub fn parse_manifest(text: &str) -> Result<HashMap<String, String>> {
    let mut entries = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (digest, name) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| Error::Format(format!("{MANIFEST_FILE} line {}: expected '<sha256> <file>'", i + 1)))?;
        let name = name.trim_start().trim_start_matches('*');
        if digest.len() != 64 || !digest.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(Error::Format(format!("{MANIFEST_FILE} line {}: bad digest", i + 1)));
        }
        entries.insert(name.to_owned(), digest.to_ascii_lowercase());
    }
    Ok(entries)
}

fn verify_manifest(suite: Suite, root: &Path) -> Result<()> {
    let path = root.join(MANIFEST_FILE);
    if !path.is_file() {
        return Ok(());
    }
    let manifest = parse_manifest(&std::fs::read_to_string(&path).map_err(io_err(&path))?)?;
    for name in suite.expected_files() {
        if let Some(expected) = manifest.get(*name) {
            let file = root.join(name);
            let actual = sha256_file(&file)?;
            if &actual != expected {
                return Err(Error::Checksum {
                    file,
                    expected: expected.clone(),
                    actual,
                });
            }
        }
    }
    Ok(())
}

fn parse_number(path: &Path, row: usize, column: usize, field: &str) -> Result<f64> {
    match field.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            path: path.to_path_buf(),
            row,
            column: column.to_string(),
            message: format!("expected a finite number, found '{}'", field.trim()),
        }),
    }
}

/// Reads a delimited file without a header into string records. `None`
/// splits on runs of whitespace.
fn read_records(path: &Path, delimiter: Option<u8>, skip_rows: usize) -> Result<Vec<(usize, Vec<String>)>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut out: Vec<(usize, Vec<String>)> = Vec::new();
    match delimiter {
        None => {
            for (i, line) in text.lines().enumerate().skip(skip_rows) {
                if !line.trim().is_empty() {
                    out.push((i + 1, line.split_whitespace().map(str::to_owned).collect()));
                }
            }
        }
        Some(d) => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(false)
                .delimiter(d)
                .flexible(true)
                .from_reader(text.as_bytes());
            for (i, rec) in reader.records().enumerate().skip(skip_rows) {
                let rec = rec.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
                if rec.len() == 1 && rec[0].trim().is_empty() {
                    continue;
                }
                out.push((i + 1, rec.iter().map(str::to_owned).collect()));
            }
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset(path.to_path_buf()));
    }
    let width = out[0].1.len();
    if let Some((line, rec)) = out.iter().find(|(_, r)| r.len() != width) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            row: *line,
            column: String::new(),
            message: format!("expected {width} fields, found {}", rec.len()),
        });
    }
    Ok(out)
}

/// Splits records into a numeric feature matrix and a label column.
/// `label_col` may be negative to count from the end; `drop` lists further
/// columns to ignore.
fn split_labeled(path: &Path, records: &[(usize, Vec<String>)], label_col: isize, drop: &[usize]) -> Result<Dataset> {
    let width = records[0].1.len();
    let label_idx = if label_col < 0 { width as isize + label_col } else { label_col } as usize;
    let keep: Vec<usize> = (0..width).filter(|c| *c != label_idx && !drop.contains(c)).collect();
    let mut values = Vec::with_capacity(records.len() * keep.len());
    let mut labels = Vec::with_capacity(records.len());
    for (line, rec) in records {
        for &c in &keep {
            values.push(parse_number(path, *line, c + 1, &rec[c])?);
        }
        labels.push(normalize_label(&rec[label_idx]));
    }
    Dataset::new(
        Matrix::from_row_major(records.len(), keep.len(), values)?,
        Targets::Labels(labels),
    )
}

/// Integer-valued labels such as "1" and "1.0" are the same class.
fn normalize_label(raw: &str) -> String {
    let t = raw.trim();
    match t.parse::<f64>() {
        Ok(v) if v.fract() == 0.0 && v.abs() < 1e15 => format!("{}", v as i64),
        _ => t.to_owned(),
    }
}

fn load_numeric_matrix(path: &Path) -> Result<Matrix> {
    let records = read_records(path, None, 0)?;
    let cols = records[0].1.len();
    let mut values = Vec::with_capacity(records.len() * cols);
    for (line, rec) in &records {
        for (c, field) in rec.iter().enumerate() {
            values.push(parse_number(path, *line, c + 1, field)?);
        }
    }
    Matrix::from_row_major(records.len(), cols, values)
}

fn load_label_file(path: &Path, names: &HashMap<String, String>) -> Result<Vec<String>> {
    Ok(read_records(path, None, 0)?
        .into_iter()
        .map(|(_, rec)| {
            let id = normalize_label(&rec[0]);
            names.get(&id).cloned().unwrap_or(id)
        })
        .collect())
}

/// Human Activity Recognition: the archive's own train/test split. Labels are
/// mapped through `activity_labels.txt` when present.
pub fn load_har(root: &Path) -> Result<(Dataset, Dataset)> {
    let names_path = root.join("activity_labels.txt");
    let names: HashMap<String, String> = if names_path.is_file() {
        read_records(&names_path, None, 0)?
            .into_iter()
            .filter(|(_, r)| r.len() >= 2)
            .map(|(_, r)| (normalize_label(&r[0]), r[1].clone()))
            .collect()
    } else {
        HashMap::new()
    };
    let part = |split: &str| -> Result<Dataset> {
        let x = load_numeric_matrix(&root.join(split).join(format!("X_{split}.txt")))?;
        let y = load_label_file(&root.join(split).join(format!("y_{split}.txt")), &names)?;
        Dataset::new(x, Targets::Labels(y))
    };
    Ok((part("train")?, part("test")?))
}

/// Parkinson's speech features: two header rows, an `id` column first and the
/// `class` column last.
pub fn load_parkinsons(root: &Path) -> Result<Dataset> {
    let path = root.join("pd_speech_features.csv");
    let all = read_records(&path, Some(b','), 0)?;
    // Locate the row holding the column names; it names both `id` and `class`.
    let header_row = all
        .iter()
        .take(3)
        .position(|(_, r)| r.iter().any(|f| f.trim() == "class") && r.iter().any(|f| f.trim() == "id"))
        .ok_or_else(|| Error::HeaderMismatch {
            path: path.clone(),
            message: "no header row naming 'id' and 'class'".into(),
        })?;
    let header = &all[header_row].1;
    let id = header.iter().position(|f| f.trim() == "id").expect("checked above");
    let class = header.iter().position(|f| f.trim() == "class").expect("checked above");
    split_labeled(&path, &all[header_row + 1..], class as isize, &[id])
}

/// QSAR oral toxicity: semicolon-separated, no header, label last.
pub fn load_qsar(root: &Path) -> Result<Dataset> {
    let path = root.join("qsar_oral_toxicity.csv");
    split_labeled(&path, &read_records(&path, Some(b';'), 0)?, -1, &[])
}

/// CNAE-9: comma-separated, no header, class first.
pub fn load_cnae9(root: &Path) -> Result<Dataset> {
    let path = root.join("CNAE-9.data");
    split_labeled(&path, &read_records(&path, Some(b','), 0)?, 0, &[])
}

/// Movie revenue: a prepared CSV described by `movies.schema.json`.
pub fn load_movies(root: &Path) -> Result<Dataset> {
    let schema = TableSchema::from_json_file(&root.join("movies.schema.json"))?;
    let table = load_csv(&root.join("movies.csv"), &schema)?;
    Ok(Dataset::from_table(&table, TaskKind::Regression)?.0)
}

/// Name and value of the headline figure in a metrics block.
pub fn headline(metrics: &Metrics) -> (&'static str, f64) {
    match metrics {
        Metrics::Classification(r) => ("accuracy", r.accuracy),
        Metrics::Regression(r) => ("pearson_r", r.pearson_r.unwrap_or(0.0)),
    }
}
