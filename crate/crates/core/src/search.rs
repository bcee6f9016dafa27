//! Grid search over (neurons, alpha) with inner k-fold cross-validation.
//!
//! Two grid densities are offered. Fast mode crosses 5 neuron counts with 4
//! regularization strengths (20 points); accurate mode crosses 20 with 10
//! (200 points). Neuron counts are log-spaced integers between 16 and
//! `min(1024, ⌊0.8 · n_train⌋)`; alphas are log-spaced over `[1e-8, 1e2]`.
//!
//! Each candidate is scored by a single machine per inner fold (accuracy for
//! classification, negative RMSE for regression). The winning candidate is
//! then refitted as a full ensemble on all of the training data.
//!
//! Within one fold every candidate with the same neuron count shares the
//! same random hidden layer, so the hidden-layer matrix and its Gram matrix
//! are built once per (neuron count, fold) and reused across alphas.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{encode_targets, standardize_apply, standardize_fit, kfold_split, TaskKind, Targets};
use crate::elm::{hidden_map, init_hidden_layer, Activation, ElmConfig};
use crate::ensemble::{derive_member_seed, train_ensemble, EnsembleModel, DEFAULT_ENSEMBLE_SIZE};
use crate::error::{invalid, Error, Result};
use crate::linalg::{Matrix, RidgeSystem};

pub const MIN_NEURONS: usize = 16;
pub const MAX_NEURONS: usize = 1024;
/// Neuron counts are capped at this fraction of the training-set size.
pub const NEURON_CAP_FRACTION: f64 = 0.8;
pub const ALPHA_MIN: f64 = 1e-8;
pub const ALPHA_MAX: f64 = 1e2;
pub const DEFAULT_INNER_FOLDS: usize = 5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    #[default]
    Fast,
    Accurate,
}

impl SearchMode {
    /// (neuron axis length, alpha axis length)
    pub fn axis_sizes(self) -> (usize, usize) {
        match self {
            SearchMode::Fast => (5, 4),
            SearchMode::Accurate => (20, 10),
        }
    }

    pub fn grid_size(self) -> usize {
        let (n, a) = self.axis_sizes();
        n * a
    }
}

impl fmt::Display for SearchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SearchMode::Fast => "fast",
            SearchMode::Accurate => "accurate",
        })
    }
}

impl FromStr for SearchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(SearchMode::Fast),
            "accurate" => Ok(SearchMode::Accurate),
            other => Err(invalid(format!("unknown search mode '{other}' (fast|accurate)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub neurons: usize,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub candidate: Candidate,
    pub fold_scores: Vec<f64>,
    pub mean_score: f64,
    pub fit_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub mode: SearchMode,
    pub grid: Vec<Candidate>,
    pub results: Vec<CandidateResult>,
    pub chosen: Candidate,
    /// Grid evaluation only.
    pub selection_seconds: f64,
    /// Final ensemble fit only.
    pub final_fit_seconds: f64,
    pub total_seconds: f64,
}

/// `count` values log-spaced from `lo` to `hi` inclusive.
fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == count - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

/// Upper neuron bound for a training set of `n_train` rows.
pub fn neuron_cap(n_train: usize) -> usize {
    let by_size = (NEURON_CAP_FRACTION * n_train as f64).floor() as usize;
    MAX_NEURONS.min(by_size).max(1)
}

/// Log-spaced integer neuron counts.
///
/// Rounding can collide at the low end; collisions are pushed apart one
/// step at a time so the axis keeps `count` distinct values whenever the
/// integer range allows it. When the range is narrower than `count`,
/// repeated values remain.
pub fn neuron_axis(count: usize, n_train: usize) -> Vec<usize> {
    let hi = neuron_cap(n_train);
    let lo = MIN_NEURONS.min(hi);
    let mut axis: Vec<usize> = log_space(lo as f64, hi as f64, count)
        .into_iter()
        .map(|v| (v.round() as usize).clamp(lo, hi))
        .collect();
    if hi - lo + 1 >= count {
        for i in 1..count {
            axis[i] = axis[i].max(axis[i - 1] + 1);
        }
        axis[count - 1] = axis[count - 1].min(hi);
        for i in (0..count - 1).rev() {
            axis[i] = axis[i].min(axis[i + 1] - 1);
        }
    }
    axis
}

pub fn alpha_axis(count: usize) -> Vec<f64> {
    log_space(ALPHA_MIN, ALPHA_MAX, count)
}

/// Cartesian product of the neuron and alpha axes, neurons varying slowest.
pub fn build_grid(mode: SearchMode, n_train: usize, n_features: usize) -> Result<Vec<Candidate>> {
    if n_train < 2 {
        return Err(invalid(format!("grid search needs at least 2 rows, got {n_train}")));
    }
    if n_features == 0 {
        return Err(invalid("grid search needs at least one feature"));
    }
    let (n_neurons, n_alphas) = mode.axis_sizes();
    let alphas = alpha_axis(n_alphas);
    Ok(neuron_axis(n_neurons, n_train)
        .into_iter()
        .flat_map(|neurons| alphas.iter().map(move |&alpha| Candidate { neurons, alpha }))
        .collect())
}

/// Hidden-layer settings held fixed during the search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiddenLayerSettings {
    pub activation: Activation,
    pub weight_scale: f64,
}

impl Default for HiddenLayerSettings {
    fn default() -> Self {
        Self {
            activation: Activation::Tanh,
            weight_scale: 1.0,
        }
    }
}

struct InnerFold {
    train_x: Matrix,
    train_y: Matrix,
    val_x: Matrix,
    val_y: Matrix,
}

fn prepare_folds(x: &Matrix, y: &Matrix, inner_folds: usize, base_seed: u64) -> Result<Vec<InnerFold>> {
    if inner_folds < 2 {
        return Err(invalid(format!("inner_folds must be >= 2, got {inner_folds}")));
    }
    if x.rows() < inner_folds {
        return Err(invalid(format!(
            "{} rows cannot be split into {inner_folds} folds",
            x.rows()
        )));
    }
    if x.rows() != y.rows() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} target rows", x.rows()),
            actual: format!("{} target rows", y.rows()),
        });
    }
    let plan = kfold_split(x.rows(), inner_folds, base_seed)?;
    (0..inner_folds)
        .map(|f| {
            let (tr, va) = (plan.train_indices(f), plan.test_indices(f));
            let raw_train = x.select_rows(&tr);
            let scaler = standardize_fit(&raw_train)?;
            scaler.check_fitted_on(&raw_train)?;
            Ok(InnerFold {
                train_x: standardize_apply(&raw_train, &scaler)?,
                train_y: y.select_rows(&tr),
                val_x: standardize_apply(&x.select_rows(&va), &scaler)?,
                val_y: y.select_rows(&va),
            })
        })
        .collect()
}

fn validation_score(task: TaskKind, truth: &Matrix, pred: &Matrix) -> f64 {
    match task {
        TaskKind::Classification => {
            let hits = truth
                .row_argmax()
                .iter()
                .zip(pred.row_argmax())
                .filter(|(t, p)| **t == *p)
                .count();
            hits as f64 / truth.rows() as f64
        }
        TaskKind::Regression => {
            let mse = truth
                .iter()
                .zip(pred.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / truth.rows() as f64;
            -mse.sqrt()
        }
    }
}

/// Scores every alpha for one (neuron count, fold) pair. Returns
/// `(score, seconds)` per alpha, where the shared setup time is split evenly.
fn score_group(
    fold: &InnerFold,
    fold_index: usize,
    neurons: usize,
    alphas: &[f64],
    task: TaskKind,
    hidden: HiddenLayerSettings,
    base_seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let start = Instant::now();
    let config = ElmConfig {
        neurons,
        alpha: 0.0,
        activation: hidden.activation,
        weight_scale: hidden.weight_scale,
        seed: derive_member_seed(base_seed, fold_index as u64),
    };
    let (w, b) = init_hidden_layer(&config, fold.train_x.cols())?;
    let h_train = hidden_map(&fold.train_x, &w, &b, hidden.activation)?;
    let h_val = hidden_map(&fold.val_x, &w, &b, hidden.activation)?;
    let system = RidgeSystem::new(h_train, fold.train_y.clone())?;
    let setup = start.elapsed().as_secs_f64() / alphas.len() as f64;
    alphas
        .iter()
        .map(|&alpha| {
            let t = Instant::now();
            let beta = system.solve(alpha)?;
            let pred = h_val.matmul(&beta)?;
            Ok((
                validation_score(task, &fold.val_y, &pred),
                setup + t.elapsed().as_secs_f64(),
            ))
        })
        .collect()
}

/// Cross-validates every candidate; results are returned in grid order.
///
/// `x` holds raw (unstandardized) features; each inner fold fits its own
/// scaler on its training part. `y` is one-hot for classification and a
/// single column for regression.
pub fn evaluate_grid(
    x: &Matrix,
    y: &Matrix,
    grid: &[Candidate],
    task: TaskKind,
    inner_folds: usize,
    hidden: HiddenLayerSettings,
    base_seed: u64,
) -> Result<Vec<CandidateResult>> {
    if grid.is_empty() {
        return Err(invalid("empty candidate grid"));
    }
    if let Some(bad) = grid.iter().find(|c| c.neurons == 0 || c.alpha.is_nan() || c.alpha < 0.0) {
        return Err(invalid(format!("invalid candidate {bad:?}")));
    }
    let folds = prepare_folds(x, y, inner_folds, base_seed)?;

    // Candidate indices grouped by neuron count, in order of first appearance.
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for (i, c) in grid.iter().enumerate() {
        match groups.iter_mut().find(|(n, _)| *n == c.neurons) {
            Some((_, members)) => members.push(i),
            None => groups.push((c.neurons, vec![i])),
        }
    }
    let jobs: Vec<(usize, usize)> = (0..groups.len())
        .flat_map(|g| (0..folds.len()).map(move |f| (g, f)))
        .collect();
    let outcomes: Vec<Vec<(f64, f64)>> = jobs
        .par_iter()
        .map(|&(g, f)| {
            let (neurons, members) = &groups[g];
            let alphas: Vec<f64> = members.iter().map(|&i| grid[i].alpha).collect();
            score_group(&folds[f], f, *neurons, &alphas, task, hidden, base_seed)
        })
        .collect::<Result<_>>()?;

    let mut fold_scores = vec![vec![0.0; folds.len()]; grid.len()];
    let mut seconds = vec![0.0; grid.len()];
    for (&(g, f), outcome) in jobs.iter().zip(&outcomes) {
        for (&i, &(score, secs)) in groups[g].1.iter().zip(outcome) {
            fold_scores[i][f] = score;
            seconds[i] += secs;
        }
    }
    Ok(grid
        .iter()
        .zip(fold_scores)
        .zip(seconds)
        .map(|((&candidate, fold_scores), fit_seconds)| CandidateResult {
            candidate,
            mean_score: fold_scores.iter().sum::<f64>() / fold_scores.len() as f64,
            fold_scores,
            fit_seconds,
        })
        .collect())
}

/// Cross-validates a single candidate with the default hidden-layer settings.
pub fn evaluate_candidate(
    x: &Matrix,
    y: &Matrix,
    candidate: Candidate,
    task: TaskKind,
    inner_folds: usize,
    base_seed: u64,
) -> Result<CandidateResult> {
    evaluate_candidate_with(x, y, candidate, task, inner_folds, HiddenLayerSettings::default(), base_seed)
}

pub fn evaluate_candidate_with(
    x: &Matrix,
    y: &Matrix,
    candidate: Candidate,
    task: TaskKind,
    inner_folds: usize,
    hidden: HiddenLayerSettings,
    base_seed: u64,
) -> Result<CandidateResult> {
    let mut out = evaluate_grid(x, y, &[candidate], task, inner_folds, hidden, base_seed)?;
    Ok(out.remove(0))
}

/// Highest mean score; ties prefer fewer neurons, then larger alpha, then
/// earlier grid position.
pub fn select_best(results: &[CandidateResult], _task: TaskKind) -> Result<Candidate> {
    let mut best = results
        .first()
        .ok_or_else(|| invalid("no candidate results to select from"))?;
    for r in &results[1..] {
        let better = r.mean_score > best.mean_score
            || (r.mean_score == best.mean_score
                && (r.candidate.neurons < best.candidate.neurons
                    || (r.candidate.neurons == best.candidate.neurons
                        && r.candidate.alpha > best.candidate.alpha)));
        if better {
            best = r;
        }
    }
    Ok(best.candidate)
}

/// Everything [`fit_automl`] needs besides the data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoMlSettings {
    pub task: TaskKind,
    pub mode: SearchMode,
    pub ensemble_size: usize,
    pub seed: u64,
    pub inner_folds: usize,
    pub hidden: HiddenLayerSettings,
}

impl AutoMlSettings {
    pub fn new(task: TaskKind, mode: SearchMode) -> Self {
        Self {
            task,
            mode,
            ensemble_size: DEFAULT_ENSEMBLE_SIZE,
            seed: 0,
            inner_folds: DEFAULT_INNER_FOLDS,
            hidden: HiddenLayerSettings::default(),
        }
    }
}

/// Selects hyperparameters by grid search, then fits the final ensemble on
/// all of `x_raw`.
pub fn fit_automl(
    x_raw: &Matrix,
    targets: &Targets,
    settings: &AutoMlSettings,
) -> Result<(EnsembleModel, SelectionReport)> {
    let start = Instant::now();
    if x_raw.rows() < 2 || x_raw.cols() == 0 {
        return Err(invalid(format!(
            "need at least 2 rows and 1 feature, got {}x{}",
            x_raw.rows(),
            x_raw.cols()
        )));
    }
    if targets.len() != x_raw.rows() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} targets", x_raw.rows()),
            actual: format!("{} targets", targets.len()),
        });
    }
    if settings.ensemble_size == 0 {
        return Err(invalid("ensemble_size must be >= 1"));
    }
    let encoded = encode_targets(targets, settings.task)?;
    let grid = build_grid(settings.mode, x_raw.rows(), x_raw.cols())?;
    let inner_folds = settings.inner_folds.min(x_raw.rows());
    let results = evaluate_grid(
        x_raw,
        &encoded.matrix,
        &grid,
        settings.task,
        inner_folds,
        settings.hidden,
        settings.seed,
    )?;
    let chosen = select_best(&results, settings.task)?;
    let selection_seconds = start.elapsed().as_secs_f64();

    let fit_start = Instant::now();
    let scaler = standardize_fit(x_raw)?;
    scaler.check_fitted_on(x_raw)?;
    let x = standardize_apply(x_raw, &scaler)?;
    let config = ElmConfig {
        neurons: chosen.neurons,
        alpha: chosen.alpha,
        activation: settings.hidden.activation,
        weight_scale: settings.hidden.weight_scale,
        seed: settings.seed,
    };
    let members = train_ensemble(&x, &encoded.matrix, &config, settings.ensemble_size, settings.seed)?;
    let model = EnsembleModel::new(members, scaler, settings.task, encoded.codec, config, settings.seed)?;
    let final_fit_seconds = fit_start.elapsed().as_secs_f64();

    let report = SelectionReport {
        mode: settings.mode,
        grid,
        results,
        chosen,
        selection_seconds,
        final_fit_seconds,
        total_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(neurons: usize, alpha: f64, score: f64) -> CandidateResult {
        CandidateResult {
            candidate: Candidate { neurons, alpha },
            fold_scores: vec![score],
            mean_score: score,
            fit_seconds: 0.0,
        }
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(build_grid(SearchMode::Fast, 10_000, 561).unwrap().len(), 20);
        assert_eq!(build_grid(SearchMode::Accurate, 10_000, 561).unwrap().len(), 200);
        assert!(build_grid(SearchMode::Fast, 1, 3).is_err());
        assert!(build_grid(SearchMode::Fast, 10, 0).is_err());
    }

    #[test]
    fn grid_axes_are_bounded() {
        let g = build_grid(SearchMode::Fast, 10_000, 5).unwrap();
        let neurons: Vec<usize> = g.iter().map(|c| c.neurons).collect();
        assert_eq!(*neurons.iter().min().unwrap(), 16);
        assert_eq!(*neurons.iter().max().unwrap(), 1024);
        let alphas: Vec<f64> = g.iter().map(|c| c.alpha).collect();
        assert_eq!(alphas[0], 1e-8);
        assert_eq!(alphas[3], 1e2);
        assert_eq!(neuron_axis(5, 10_000), vec![16, 45, 128, 362, 1024]);
    }

    #[test]
    fn small_training_set_caps_neurons() {
        let g = build_grid(SearchMode::Fast, 25, 3).unwrap();
        assert_eq!(g.len(), 20);
        assert!(g.iter().all(|c| c.neurons <= 20));
        let g = build_grid(SearchMode::Accurate, 25, 3).unwrap();
        assert_eq!(g.len(), 200);
        assert!(g.iter().all(|c| c.neurons <= 20 && c.neurons >= 1));
        // a tiny set collapses the axis to a single repeated value
        assert_eq!(neuron_axis(5, 2), vec![1; 5]);
    }

    #[test]
    fn accurate_axis_is_distinct_when_possible() {
        let axis = neuron_axis(20, 10_000);
        assert!(axis.windows(2).all(|w| w[0] < w[1]), "{axis:?}");
        let axis = neuron_axis(20, 60);
        assert!(axis.windows(2).all(|w| w[0] < w[1]), "{axis:?}");
        assert!(*axis.last().unwrap() <= 48);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("fast".parse::<SearchMode>().unwrap(), SearchMode::Fast);
        assert_eq!("accurate".parse::<SearchMode>().unwrap(), SearchMode::Accurate);
        assert!("slow".parse::<SearchMode>().is_err());
        assert_eq!(SearchMode::Accurate.grid_size(), 10 * SearchMode::Fast.grid_size());
    }

    #[test]
    fn select_best_rules() {
        let task = TaskKind::Classification;
        assert!(select_best(&[], task).is_err());
        assert_eq!(select_best(&[result(32, 1.0, 0.5)], task).unwrap().neurons, 32);
        let tied = [result(128, 1.0, 0.9), result(64, 1.0, 0.9)];
        assert_eq!(select_best(&tied, task).unwrap().neurons, 64);
        let tied_alpha = [result(64, 1e-4, 0.9), result(64, 1e-2, 0.9)];
        assert_eq!(select_best(&tied_alpha, task).unwrap().alpha, 1e-2);
        let scores = [result(16, 1.0, 0.8), result(32, 1.0, 0.9), result(64, 1.0, 0.85)];
        assert_eq!(select_best(&scores, task).unwrap().neurons, 32);
        let dup = [result(16, 1.0, 0.7), result(16, 1.0, 0.7)];
        assert_eq!(select_best(&dup, task).unwrap(), dup[0].candidate);
    }

    #[test]
    fn evaluate_requires_enough_rows() {
        let x = Matrix::zeros(3, 2);
        let y = Matrix::zeros(3, 1);
        let c = Candidate { neurons: 2, alpha: 1.0 };
        assert!(evaluate_candidate(&x, &y, c, TaskKind::Regression, 5, 0).is_err());
        assert!(evaluate_candidate(&x, &y, c, TaskKind::Regression, 1, 0).is_err());
    }

    #[test]
    fn mean_score_is_fold_mean() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 10.0, (i % 7) as f64]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y = Matrix::column(&rows.iter().map(|r| r[0].sin() + r[1]).collect::<Vec<_>>()).unwrap();
        let r = evaluate_candidate(&x, &y, Candidate { neurons: 8, alpha: 1e-3 }, TaskKind::Regression, 5, 3)
            .unwrap();
        assert_eq!(r.fold_scores.len(), 5);
        let mean = r.fold_scores.iter().sum::<f64>() / 5.0;
        assert!((mean - r.mean_score).abs() <= 1e-12);
        assert!(r.fold_scores.iter().all(|s| *s <= 0.0));
    }
}
