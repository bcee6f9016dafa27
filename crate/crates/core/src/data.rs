//! Data ingestion and evaluation-protocol mechanics.
//!
//! CSV loading against a declared schema, one-hot encoding with rare-category
//! discarding, z-score standardization, seeded k-fold planning, and the
//! duplicate-with-noise augmentation used for small benchmark sets.

use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ensemble::LabelCodec;
use crate::error::{invalid, io_err, Error, Result};
use crate::linalg::Matrix;

/// Floor applied to per-feature standard deviations.
pub const STD_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Classification,
    Regression,
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TaskKind::Classification => "classification",
            TaskKind::Regression => "regression",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Target,
    Ignore,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Categorical only: categories seen fewer times are dropped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_frequency: Option<usize>,
    /// Categorical only: split each cell into several categories on this string.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separator: Option<String>,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Self {
            name: name.into(),
            kind,
            min_frequency: None,
            separator: None,
        }
    }
}

/// Ordered column declarations for a CSV file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableSchema {
    pub columns: Vec<ColumnSpec>,
}

impl TableSchema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let schema = Self { columns };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_columns(true)
    }

    fn validate_columns(&self, require_target: bool) -> Result<()> {
        let targets = self.columns.iter().filter(|c| c.kind == ColumnKind::Target).count();
        if targets > 1 || (require_target && targets == 0) {
            return Err(invalid(format!(
                "schema must declare exactly one target column, found {targets}"
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(invalid(format!("duplicate column name '{}'", c.name)));
            }
            if c.min_frequency == Some(0) {
                return Err(invalid(format!("column '{}': min_frequency must be >= 1", c.name)));
            }
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let schema: TableSchema = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn target(&self) -> &ColumnSpec {
        self.columns
            .iter()
            .find(|c| c.kind == ColumnKind::Target)
            .expect("validated schema has a target")
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Text(Vec<String>),
}

#[derive(Clone, Debug)]
pub struct RawColumn {
    pub spec: ColumnSpec,
    pub data: ColumnData,
}

/// Typed columns read from a CSV file.
#[derive(Clone, Debug)]
pub struct RawTable {
    pub path: PathBuf,
    pub columns: Vec<RawColumn>,
    /// 1-based source line of each data row.
    pub lines: Vec<u64>,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.lines.len()
    }

    pub fn column(&self, name: &str) -> Option<&RawColumn> {
        self.columns.iter().find(|c| c.spec.name == name)
    }

    pub fn target(&self) -> Option<&RawColumn> {
        self.columns.iter().find(|c| c.spec.kind == ColumnKind::Target)
    }
}

/// Reads the header row of a CSV file.
pub fn read_header(path: &Path) -> Result<Vec<String>> {
    let mut reader = csv_reader(path)?;
    let header = reader
        .headers()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    Ok(header.iter().map(str::to_owned).collect())
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

/// Loads a comma-separated file whose header must list exactly the schema's
/// column names, in order.
///
/// Numeric cells must parse as finite numbers; empty cells are errors except
/// in categorical columns that declare a separator.
pub fn load_csv(path: &Path, schema: &TableSchema) -> Result<RawTable> {
    schema.validate()?;
    load_with_schema(path, schema)
}

/// Loads a file for an already fitted pipeline. The target column is
/// optional; any column the pipeline does not know is a shape error.
pub fn load_for_pipeline(path: &Path, pipeline: &FeaturePipeline) -> Result<RawTable> {
    let header = read_header(path)?;
    let schema = pipeline.schema_for_header(&header)?;
    schema.validate_columns(false)?;
    load_with_schema(path, &schema)
}

fn load_with_schema(path: &Path, schema: &TableSchema) -> Result<RawTable> {
    let mut reader = csv_reader(path)?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_owned)
        .collect();
    let expected = schema.names();
    if header != expected {
        return Err(Error::HeaderMismatch {
            path: path.to_owned(),
            message: format!("expected [{}], found [{}]", expected.join(", "), header.join(", ")),
        });
    }

    let mut columns: Vec<RawColumn> = schema
        .columns
        .iter()
        .map(|spec| RawColumn {
            spec: spec.clone(),
            data: match spec.kind {
                ColumnKind::Numeric => ColumnData::Numeric(Vec::new()),
                _ => ColumnData::Text(Vec::new()),
            },
        })
        .collect();
    let mut lines = Vec::new();

    for record in reader.records() {
        let record = record.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse {
                path: path.to_owned(),
                row,
                column: String::new(),
                message: e.to_string(),
            }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        for (col, cell) in columns.iter_mut().zip(record.iter()) {
            let parse_err = |message: String| Error::Parse {
                path: path.to_owned(),
                row: line as usize,
                column: col.spec.name.clone(),
                message,
            };
            if cell.is_empty() && !(col.spec.kind == ColumnKind::Categorical && col.spec.separator.is_some()) && col.spec.kind != ColumnKind::Ignore {
                return Err(parse_err("missing value".into()));
            }
            match &mut col.data {
                ColumnData::Numeric(v) => {
                    let x: f64 = cell
                        .parse()
                        .map_err(|_| parse_err(format!("cannot parse '{cell}' as a number")))?;
                    if !x.is_finite() {
                        return Err(parse_err(format!("non-finite value '{cell}'")));
                    }
                    v.push(x);
                }
                ColumnData::Text(v) => v.push(cell.to_owned()),
            }
        }
        lines.push(line);
    }
    if lines.is_empty() {
        return Err(Error::EmptyDataset(path.to_owned()));
    }
    Ok(RawTable {
        path: path.to_owned(),
        columns,
        lines,
    })
}

/// One-hot encodes a categorical column.
///
/// Categories occurring fewer than `min_frequency` times are dropped and their
/// rows get all-zero indicators. Kept categories are ordered by first
/// appearance.
pub fn one_hot_encode(values: &[String], min_frequency: usize) -> Result<(Matrix, Vec<String>)> {
    let lists: Vec<Vec<&str>> = values.iter().map(|v| vec![v.as_str()]).collect();
    one_hot_encode_multi(&lists, min_frequency)
}

/// One-hot encoding where each row may carry several categories.
pub fn one_hot_encode_multi(rows: &[Vec<&str>], min_frequency: usize) -> Result<(Matrix, Vec<String>)> {
    if min_frequency == 0 {
        return Err(invalid("min_frequency must be >= 1"));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for row in rows {
        for &v in row {
            let c = counts.entry(v).or_insert(0);
            if *c == 0 {
                order.push(v);
            }
            *c += 1;
        }
    }
    let categories: Vec<String> = order
        .into_iter()
        .filter(|v| counts[v] >= min_frequency)
        .map(str::to_owned)
        .collect();
    Ok((indicators(rows, &categories), categories))
}

fn indicators(rows: &[Vec<&str>], categories: &[String]) -> Matrix {
    let index: HashMap<&str, usize> = categories
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let mut values = vec![0.0; rows.len() * categories.len()];
    for (r, row) in rows.iter().enumerate() {
        for v in row {
            if let Some(&c) = index.get(v) {
                values[r * categories.len() + c] = 1.0;
            }
        }
    }
    Matrix::from_row_major(rows.len(), categories.len(), values).expect("indicator values are finite")
}

fn split_cell<'a>(cell: &'a str, separator: Option<&str>) -> Vec<&'a str> {
    match separator {
        Some(sep) => cell
            .split(sep)
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect(),
        None => vec![cell],
    }
}

/// One input column of a fitted feature pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureColumn {
    Numeric {
        name: String,
    },
    Categorical {
        name: String,
        categories: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        separator: Option<String>,
    },
}

impl FeatureColumn {
    pub fn name(&self) -> &str {
        match self {
            FeatureColumn::Numeric { name } | FeatureColumn::Categorical { name, .. } => name,
        }
    }

    pub fn width(&self) -> usize {
        match self {
            FeatureColumn::Numeric { .. } => 1,
            FeatureColumn::Categorical { categories, .. } => categories.len(),
        }
    }
}

/// Maps raw table columns to the numeric feature matrix. Category lists are
/// frozen at fit time so new data is encoded identically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeaturePipeline {
    pub columns: Vec<FeatureColumn>,
    #[serde(default)]
    pub target: Option<String>,
}

impl FeaturePipeline {
    /// Pipeline that treats every listed column as numeric.
    pub fn numeric(names: &[String], target: Option<String>) -> Self {
        Self {
            columns: names
                .iter()
                .map(|n| FeatureColumn::Numeric { name: n.clone() })
                .collect(),
            target,
        }
    }

    pub fn width(&self) -> usize {
        self.columns.iter().map(FeatureColumn::width).sum()
    }

    pub fn fit(table: &RawTable) -> Result<(Self, Matrix)> {
        let mut columns = Vec::new();
        for col in &table.columns {
            match (col.spec.kind, &col.data) {
                (ColumnKind::Numeric, _) => columns.push(FeatureColumn::Numeric {
                    name: col.spec.name.clone(),
                }),
                (ColumnKind::Categorical, ColumnData::Text(cells)) => {
                    let sep = col.spec.separator.as_deref();
                    let rows: Vec<Vec<&str>> = cells.iter().map(|c| split_cell(c, sep)).collect();
                    let (_, categories) =
                        one_hot_encode_multi(&rows, col.spec.min_frequency.unwrap_or(1))?;
                    columns.push(FeatureColumn::Categorical {
                        name: col.spec.name.clone(),
                        categories,
                        separator: col.spec.separator.clone(),
                    });
                }
                _ => {}
            }
        }
        if columns.is_empty() {
            return Err(invalid("schema declares no feature columns"));
        }
        let pipeline = Self {
            columns,
            target: table.target().map(|t| t.spec.name.clone()),
        };
        let x = pipeline.transform(table)?;
        Ok((pipeline, x))
    }

    pub fn transform(&self, table: &RawTable) -> Result<Matrix> {
        let n = table.n_rows();
        let mut blocks = Vec::with_capacity(self.columns.len());
        for fc in &self.columns {
            let col = table.column(fc.name()).ok_or_else(|| Error::ShapeMismatch {
                expected: format!("feature column '{}'", fc.name()),
                actual: format!("columns [{}]", column_names(table).join(", ")),
            })?;
            let block = match (fc, &col.data) {
                (FeatureColumn::Numeric { .. }, ColumnData::Numeric(v)) => Matrix::column(v)?,
                (FeatureColumn::Categorical { categories, separator, .. }, ColumnData::Text(cells)) => {
                    let rows: Vec<Vec<&str>> = cells
                        .iter()
                        .map(|c| split_cell(c, separator.as_deref()))
                        .collect();
                    indicators(&rows, categories)
                }
                _ => {
                    return Err(invalid(format!(
                        "column '{}' has the wrong kind for this pipeline",
                        fc.name()
                    )))
                }
            };
            debug_assert_eq!(block.rows(), n);
            blocks.push(block);
        }
        Matrix::hstack(&blocks)
    }

    /// Builds a load schema for a file header: pipeline columns keep their
    /// kind, the target column (when present) is read as the target, and any
    /// other column is rejected.
    pub fn schema_for_header(&self, header: &[String]) -> Result<TableSchema> {
        let mut columns = Vec::with_capacity(header.len());
        for name in header {
            if let Some(fc) = self.columns.iter().find(|c| c.name() == name) {
                columns.push(match fc {
                    FeatureColumn::Numeric { .. } => ColumnSpec::new(name.clone(), ColumnKind::Numeric),
                    FeatureColumn::Categorical { separator, .. } => ColumnSpec {
                        separator: separator.clone(),
                        ..ColumnSpec::new(name.clone(), ColumnKind::Categorical)
                    },
                });
            } else if self.target.as_deref() == Some(name.as_str()) {
                columns.push(ColumnSpec::new(name.clone(), ColumnKind::Target));
            } else {
                columns.push(ColumnSpec::new(name.clone(), ColumnKind::Ignore));
            }
        }
        let expected: Vec<&str> = self.columns.iter().map(FeatureColumn::name).collect();
        let present = columns.iter().filter(|c| expected.contains(&c.name.as_str())).count();
        let extra: Vec<&str> = columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Ignore)
            .map(|c| c.name.as_str())
            .collect();
        if present != expected.len() || !extra.is_empty() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} feature columns [{}]", expected.len(), expected.join(", ")),
                actual: format!(
                    "{} non-target columns [{}]",
                    header.len() - usize::from(columns.iter().any(|c| c.kind == ColumnKind::Target)),
                    header
                        .iter()
                        .filter(|h| self.target.as_deref() != Some(h.as_str()))
                        .cloned()
                        .collect::<Vec<_>>()
                        .join(", ")
                ),
            });
        }
        Ok(TableSchema { columns })
    }
}

fn column_names(table: &RawTable) -> Vec<&str> {
    table.columns.iter().map(|c| c.spec.name.as_str()).collect()
}

/// Targets as read from a table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Targets {
    Labels(Vec<String>),
    Values(Vec<f64>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Labels(v) => v.len(),
            Targets::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, indices: &[usize]) -> Targets {
        match self {
            Targets::Labels(v) => Targets::Labels(indices.iter().map(|&i| v[i].clone()).collect()),
            Targets::Values(v) => Targets::Values(indices.iter().map(|&i| v[i]).collect()),
        }
    }

    pub fn task(&self) -> TaskKind {
        match self {
            Targets::Labels(_) => TaskKind::Classification,
            Targets::Values(_) => TaskKind::Regression,
        }
    }
}

/// A numeric feature matrix with aligned targets.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub features: Matrix,
    pub targets: Targets,
}

impl Dataset {
    pub fn new(features: Matrix, targets: Targets) -> Result<Self> {
        if features.rows() != targets.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} targets", features.rows()),
                actual: format!("{} targets", targets.len()),
            });
        }
        Ok(Self { features, targets })
    }

    pub fn n_rows(&self) -> usize {
        self.features.rows()
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            targets: self.targets.select(indices),
        }
    }

    /// Encodes a loaded table, fitting a fresh feature pipeline.
    pub fn from_table(table: &RawTable, task: TaskKind) -> Result<(Dataset, FeaturePipeline)> {
        let (pipeline, features) = FeaturePipeline::fit(table)?;
        let targets = targets_from_table(table, task)?;
        Ok((Dataset::new(features, targets)?, pipeline))
    }
}

/// Reads the target column as labels or as numbers depending on the task.
pub fn targets_from_table(table: &RawTable, task: TaskKind) -> Result<Targets> {
    let target = table
        .target()
        .ok_or_else(|| invalid(format!("{}: no target column", table.path.display())))?;
    let ColumnData::Text(cells) = &target.data else {
        unreachable!("target columns are read as text")
    };
    match task {
        TaskKind::Classification => Ok(Targets::Labels(cells.clone())),
        TaskKind::Regression => cells
            .iter()
            .zip(&table.lines)
            .map(|(c, &line)| {
                c.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        path: table.path.clone(),
                        row: line as usize,
                        column: target.spec.name.clone(),
                        message: format!("cannot parse target '{c}' as a number"),
                    })
            })
            .collect::<Result<Vec<_>>>()
            .map(Targets::Values),
    }
}

/// Identifies the data a statistic was fitted on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub rows: usize,
    pub cols: usize,
    pub fingerprint: u64,
}

impl Provenance {
    pub fn of(x: &Matrix) -> Self {
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        x.shape().hash(&mut hasher);
        for v in x.iter() {
            v.to_bits().hash(&mut hasher);
        }
        Self {
            rows: x.rows(),
            cols: x.cols(),
            fingerprint: hasher.finish(),
        }
    }
}

/// Per-feature means and (floored) population standard deviations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalerStats {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub provenance: Provenance,
}

impl ScalerStats {
    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    /// Fails unless these statistics were fitted on exactly `x`.
    pub fn check_fitted_on(&self, x: &Matrix) -> Result<()> {
        if self.provenance != Provenance::of(x) {
            return Err(Error::InvalidState(format!(
                "scaler was fitted on a different row set ({} rows, fingerprint {:016x})",
                self.provenance.rows, self.provenance.fingerprint
            )));
        }
        Ok(())
    }
}

fn column_moments(x: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let n = x.rows() as f64;
    (0..x.cols())
        .map(|j| {
            let col = x.inner().column(j);
            let first = col[0];
            if col.iter().all(|&v| v == first) {
                return (first, 0.0);
            }
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            (mean, var.sqrt())
        })
        .unzip()
}

pub fn standardize_fit(x: &Matrix) -> Result<ScalerStats> {
    if x.rows() == 0 {
        return Err(invalid("cannot fit a scaler on zero rows"));
    }
    let (means, stds) = column_moments(x);
    Ok(ScalerStats {
        means,
        stds: stds.into_iter().map(|s| s.max(STD_FLOOR)).collect(),
        provenance: Provenance::of(x),
    })
}

fn check_width(x: &Matrix, stats: &ScalerStats) -> Result<()> {
    if x.cols() != stats.n_features() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} features", stats.n_features()),
            actual: format!("{} features", x.cols()),
        });
    }
    Ok(())
}

/// `(x − mean) / std` per column, using the stored statistics.
pub fn standardize_apply(x: &Matrix, stats: &ScalerStats) -> Result<Matrix> {
    check_width(x, stats)?;
    let mut out = x.inner().clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let (m, s) = (stats.means[j], stats.stds[j]);
        col.apply(|v| *v = (*v - m) / s);
    }
    Ok(Matrix::from_inner(out))
}

pub fn standardize_invert(z: &Matrix, stats: &ScalerStats) -> Result<Matrix> {
    check_width(z, stats)?;
    let mut out = z.inner().clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let (m, s) = (stats.means[j], stats.stds[j]);
        col.apply(|v| *v = *v * s + m);
    }
    Ok(Matrix::from_inner(out))
}

/// Assignment of `n` samples to `k` folds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n: usize,
    pub k: usize,
    pub assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.assignment[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.assignment[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seeded shuffle followed by round-robin fold assignment.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || k > n {
        return Err(invalid(format!("need 2 <= k <= n for k-fold, got k = {k}, n = {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = pos % k;
    }
    Ok(FoldPlan { n, k, assignment })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSpec {
    pub duplication_factor: usize,
    /// Noise half-width as a fraction of each feature's standard deviation.
    pub noise_fraction: f64,
}

impl Default for AugmentationSpec {
    fn default() -> Self {
        Self {
            duplication_factor: 2,
            noise_fraction: 0.001,
        }
    }
}

impl AugmentationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.duplication_factor == 0 {
            return Err(invalid("duplication_factor must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.noise_fraction) {
            return Err(invalid(format!(
                "noise_fraction must be in [0, 1), got {}",
                self.noise_fraction
            )));
        }
        Ok(())
    }
}

/// Appends `duplication_factor − 1` copies of the rows, each feature value
/// perturbed by a uniform draw in `±noise_fraction · σⱼ`. The original rows
/// come first and are untouched; targets are repeated unchanged.
pub fn augment_duplicate_noise<T: Clone>(
    x: &Matrix,
    y: &[T],
    spec: &AugmentationSpec,
    seed: u64,
) -> Result<(Matrix, Vec<T>)> {
    spec.validate()?;
    if x.rows() != y.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} targets", x.rows()),
            actual: format!("{} targets", y.len()),
        });
    }
    if spec.duplication_factor == 1 || x.rows() == 0 {
        return Ok((x.clone(), y.to_vec()));
    }
    let (_, sigmas) = column_moments(x);
    let half_widths: Vec<f64> = sigmas.iter().map(|s| s * spec.noise_fraction).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = x.to_row_major();
    let original = values.clone();
    let cols = x.cols();
    for _ in 1..spec.duplication_factor {
        for (i, v) in original.iter().enumerate() {
            let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            values.push(v + half_widths[i % cols] * (2.0 * u - 1.0));
        }
    }
    let targets = y.iter().cloned().cycle().take(y.len() * spec.duplication_factor).collect();
    Ok((
        Matrix::from_row_major(x.rows() * spec.duplication_factor, cols, values)?,
        targets,
    ))
}

/// Targets in the form the solver consumes.
#[derive(Clone, Debug)]
pub struct EncodedTargets {
    /// One-hot `N × k` for classification, `N × 1` for regression.
    pub matrix: Matrix,
    pub codec: Option<LabelCodec>,
}

pub fn encode_targets(targets: &Targets, task: TaskKind) -> Result<EncodedTargets> {
    match (targets, task) {
        (Targets::Labels(labels), TaskKind::Classification) => {
            let codec = LabelCodec::from_labels(labels)?;
            if codec.len() < 2 {
                return Err(invalid("classification needs at least two distinct classes"));
            }
            Ok(EncodedTargets {
                matrix: codec.one_hot(labels)?,
                codec: Some(codec),
            })
        }
        (Targets::Values(values), TaskKind::Regression) => Ok(EncodedTargets {
            matrix: Matrix::column(values)?,
            codec: None,
        }),
        (t, task) => Err(invalid(format!(
            "{} targets given for a {task} task",
            t.task()
        ))),
    }
}
