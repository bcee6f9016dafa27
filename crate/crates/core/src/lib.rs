//! Extreme learning machine ensembles with automated hyperparameter search.
//!
//! A single [`elm::ElmModel`] is a one-hidden-layer network whose input
//! weights are random and whose output weights come from one regularized
//! least-squares solve ([`linalg::ridge_solve`]). [`search::fit_automl`]
//! picks the neuron count and regularization strength by grid search with
//! inner cross-validation and returns an [`ensemble::EnsembleModel`] of
//! independently seeded members.
//!
//! The [`protocol`] and [`benchmark`] modules run the evaluation protocols
//! (predefined split, k-fold, augmented k-fold) and produce
//! [`report::RunReport`]s; [`persist`] reads and writes model files.

pub mod benchmark;
pub mod data;
pub mod elm;
pub mod ensemble;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod persist;
pub mod protocol;
pub mod report;
pub mod search;
pub mod synthetic;

pub use data::{AugmentationSpec, Dataset, FeaturePipeline, ScalerStats, TableSchema, TaskKind, Targets};
pub use elm::{Activation, ElmConfig, ElmModel};
pub use ensemble::{EnsembleModel, LabelCodec};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use metrics::{ClassificationReport, ConfusionMatrix, RegressionReport};
pub use search::{AutoMlSettings, Candidate, CandidateResult, SearchMode, SelectionReport};
