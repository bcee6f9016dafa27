//! A single extreme learning machine.
//!
//! The hidden layer is drawn once from a seeded generator and never trained;
//! only the output weights are fitted, by one regularized least-squares solve
//! against the hidden-layer output matrix.
//!
//! Hidden weights and biases are i.i.d. uniform on `[-s, s]` where `s` is
//! [`ElmConfig::weight_scale`]. Draws come from ChaCha8 seeded with
//! `seed_from_u64(config.seed)`: first the `n × m` input weights in row-major
//! order, then the `m` biases. Each value is `s · (2u − 1)` with
//! `u = (next_u64 >> 11) · 2⁻⁵³`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{Matrix, RidgeSystem};

/// Hidden-layer nonlinearity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
}

impl Activation {
    pub const ALL: [Activation; 1] = [Activation::Tanh];

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
        }
    }

    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
        }
    }
}

/// Hyperparameters of one machine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElmConfig {
    pub neurons: usize,
    pub alpha: f64,
    pub activation: Activation,
    /// Half-width of the uniform distribution for weights and biases.
    pub weight_scale: f64,
    pub seed: u64,
}

impl Default for ElmConfig {
    fn default() -> Self {
        Self {
            neurons: 64,
            alpha: 1e-6,
            activation: Activation::Tanh,
            weight_scale: 1.0,
            seed: 0,
        }
    }
}

impl ElmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.neurons == 0 {
            return Err(invalid("neurons must be >= 1"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(invalid(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        if !(self.weight_scale > 0.0 && self.weight_scale.is_finite()) {
            return Err(invalid(format!(
                "weight_scale must be finite and > 0, got {}",
                self.weight_scale
            )));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

#[inline]
fn unit_interval(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Draws input weights (`n_inputs × neurons`) and biases (`neurons`).
pub fn init_hidden_layer(config: &ElmConfig, n_inputs: usize) -> Result<(Matrix, Vec<f64>)> {
    config.validate()?;
    if n_inputs == 0 {
        return Err(invalid("n_inputs must be >= 1"));
    }
    let s = config.weight_scale;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut draw = || s * (2.0 * unit_interval(&mut rng) - 1.0);
    let weights: Vec<f64> = (0..n_inputs * config.neurons).map(|_| draw()).collect();
    let biases: Vec<f64> = (0..config.neurons).map(|_| draw()).collect();
    Ok((
        Matrix::from_row_major(n_inputs, config.neurons, weights)?,
        biases,
    ))
}

/// `H[s][j] = g(Σᵢ X[s][i]·W[i][j] + b[j])`.
pub fn hidden_map(x: &Matrix, w: &Matrix, b: &[f64], activation: Activation) -> Result<Matrix> {
    if x.cols() != w.rows() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} input columns", w.rows()),
            actual: format!("{} input columns", x.cols()),
        });
    }
    if b.len() != w.cols() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} biases", w.cols()),
            actual: format!("{} biases", b.len()),
        });
    }
    let mut h = x.inner() * w.inner();
    for (j, mut col) in h.column_iter_mut().enumerate() {
        let bj = b[j];
        col.apply(|v| *v = activation.apply(*v + bj));
    }
    Ok(Matrix::from_inner(h))
}

/// A trained machine: fixed random hidden layer plus fitted output weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElmModel {
    pub input_weights: Matrix,
    pub biases: Vec<f64>,
    pub output_weights: Matrix,
    pub activation: Activation,
}

impl ElmModel {
    /// Assembles a model from parts, checking that the shapes agree.
    pub fn from_parts(
        input_weights: Matrix,
        biases: Vec<f64>,
        output_weights: Matrix,
        activation: Activation,
    ) -> Result<Self> {
        let m = input_weights.cols();
        if biases.len() != m || output_weights.rows() != m {
            return Err(Error::ShapeMismatch {
                expected: format!("{m} biases and {m} output-weight rows"),
                actual: format!(
                    "{} biases and {} output-weight rows",
                    biases.len(),
                    output_weights.rows()
                ),
            });
        }
        if input_weights.rows() == 0 || m == 0 || output_weights.cols() == 0 {
            return Err(invalid("model dimensions must be positive"));
        }
        if biases.iter().any(|b| !b.is_finite()) {
            return Err(invalid("non-finite bias"));
        }
        Ok(Self {
            input_weights,
            biases,
            output_weights,
            activation,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.input_weights.rows()
    }

    pub fn neurons(&self) -> usize {
        self.input_weights.cols()
    }

    pub fn n_outputs(&self) -> usize {
        self.output_weights.cols()
    }

    /// Raw output scores, `N × n_outputs`.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        let h = hidden_map(x, &self.input_weights, &self.biases, self.activation)?;
        h.matmul(&self.output_weights)
    }
}

/// Fits output weights with `ridge_solve(hidden_map(X), Y, alpha)`.
pub fn train_elm(x: &Matrix, y: &Matrix, config: &ElmConfig) -> Result<ElmModel> {
    if x.rows() == 0 {
        return Err(invalid("cannot train on zero rows"));
    }
    if x.rows() != y.rows() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} target rows", x.rows()),
            actual: format!("{} target rows", y.rows()),
        });
    }
    let (w, b) = init_hidden_layer(config, x.cols())?;
    let h = hidden_map(x, &w, &b, config.activation)?;
    let beta = RidgeSystem::new(h, y.clone())?.solve(config.alpha)?;
    ElmModel::from_parts(w, b, beta, config.activation)
}
