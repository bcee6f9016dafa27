//! Model files.
//!
//! A model file is a JSON document. Every floating-point payload (member
//! weights, biases, scaler statistics) is stored as base64 of little-endian
//! IEEE-754 doubles in row-major order with an explicit shape, so a save/load
//! round trip reproduces predictions bit for bit.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::data::{FeaturePipeline, Provenance, ScalerStats, TaskKind};
use crate::elm::{Activation, ElmConfig, ElmModel};
use crate::ensemble::{EnsembleModel, LabelCodec};
use crate::error::{io_err, Error, Result};
use crate::linalg::Matrix;
use crate::search::SearchMode;

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Block {
    rows: usize,
    cols: usize,
    data: String,
}

impl Block {
    fn encode(rows: usize, cols: usize, values: &[f64]) -> Self {
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        Self {
            rows,
            cols,
            data: STANDARD.encode(bytes),
        }
    }

    fn from_matrix(m: &Matrix) -> Self {
        Self::encode(m.rows(), m.cols(), &m.to_row_major())
    }

    fn from_vector(v: &[f64]) -> Self {
        Self::encode(1, v.len(), v)
    }

    fn values(&self, what: &str) -> Result<Vec<f64>> {
        let bytes = STANDARD
            .decode(&self.data)
            .map_err(|e| Error::Format(format!("{what}: bad base64 payload: {e}")))?;
        let expected = self.rows * self.cols * 8;
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "{what}: payload has {} bytes, shape {}x{} needs {expected}",
                bytes.len(),
                self.rows,
                self.cols
            )));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format(format!("{what}: non-finite value in payload")));
        }
        Ok(values)
    }

    fn to_matrix(&self, what: &str) -> Result<Matrix> {
        Matrix::from_row_major(self.rows, self.cols, self.values(what)?)
            .map_err(|e| Error::Format(format!("{what}: {e}")))
    }

    fn to_vector(&self, what: &str) -> Result<Vec<f64>> {
        if self.rows != 1 {
            return Err(Error::Format(format!("{what}: expected a single row")));
        }
        self.values(what)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ChosenConfig {
    neurons: usize,
    alpha: f64,
    activation: Activation,
    weight_scale: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScalerRecord {
    means: Block,
    stds: Block,
    provenance: Provenance,
}

#[derive(Debug, Serialize, Deserialize)]
struct MemberRecord {
    input_weights: Block,
    biases: Block,
    output_weights: Block,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format_version: u64,
    task: TaskKind,
    #[serde(default)]
    mode: Option<SearchMode>,
    chosen_config: ChosenConfig,
    base_seed: u64,
    ensemble_size: usize,
    scaler: ScalerRecord,
    #[serde(default)]
    label_codec: Option<LabelCodec>,
    #[serde(default)]
    features: Option<FeaturePipeline>,
    members: Vec<MemberRecord>,
}

/// A model plus the optional metadata stored next to it.
#[derive(Clone, Debug, PartialEq)]
pub struct SavedModel {
    pub model: EnsembleModel,
    pub mode: Option<SearchMode>,
    pub features: Option<FeaturePipeline>,
}

impl SavedModel {
    pub fn new(model: EnsembleModel) -> Self {
        Self {
            model,
            mode: None,
            features: None,
        }
    }
}

pub fn to_json(saved: &SavedModel) -> Result<String> {
    let m = &saved.model;
    let cfg = m.config();
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        task: m.task(),
        mode: saved.mode,
        chosen_config: ChosenConfig {
            neurons: cfg.neurons,
            alpha: cfg.alpha,
            activation: cfg.activation,
            weight_scale: cfg.weight_scale,
        },
        base_seed: m.base_seed(),
        ensemble_size: m.members().len(),
        scaler: ScalerRecord {
            means: Block::from_vector(&m.scaler().means),
            stds: Block::from_vector(&m.scaler().stds),
            provenance: m.scaler().provenance.clone(),
        },
        label_codec: m.codec().cloned(),
        features: saved.features.clone(),
        members: m
            .members()
            .iter()
            .map(|e| MemberRecord {
                input_weights: Block::from_matrix(&e.input_weights),
                biases: Block::from_vector(&e.biases),
                output_weights: Block::from_matrix(&e.output_weights),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).map_err(|e| Error::Format(e.to_string()))
}

pub fn from_json(text: &str) -> Result<SavedModel> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Format(format!("not a model document: {e}")))?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Format("missing format_version".into()))?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let file: ModelFile =
        serde_json::from_value(value).map_err(|e| Error::Format(format!("model document: {e}")))?;
    if file.members.len() != file.ensemble_size {
        return Err(Error::Format(format!(
            "ensemble_size is {} but {} members are stored",
            file.ensemble_size,
            file.members.len()
        )));
    }
    let members = file
        .members
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            ElmModel::from_parts(
                rec.input_weights.to_matrix(&format!("member {i} input weights"))?,
                rec.biases.to_vector(&format!("member {i} biases"))?,
                rec.output_weights.to_matrix(&format!("member {i} output weights"))?,
                file.chosen_config.activation,
            )
            .map_err(|e| Error::Format(format!("member {i}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let scaler = ScalerStats {
        means: file.scaler.means.to_vector("scaler means")?,
        stds: file.scaler.stds.to_vector("scaler stds")?,
        provenance: file.scaler.provenance,
    };
    if scaler.means.len() != scaler.stds.len() || scaler.stds.iter().any(|s| *s <= 0.0) {
        return Err(Error::Format("inconsistent scaler statistics".into()));
    }
    let config = ElmConfig {
        neurons: file.chosen_config.neurons,
        alpha: file.chosen_config.alpha,
        activation: file.chosen_config.activation,
        weight_scale: file.chosen_config.weight_scale,
        seed: file.base_seed,
    };
    let model = EnsembleModel::new(members, scaler, file.task, file.label_codec, config, file.base_seed)
        .map_err(|e| Error::Format(e.to_string()))?;
    if let Some(f) = &file.features {
        if f.width() != model.n_features() {
            return Err(Error::Format(format!(
                "feature pipeline produces {} columns but the model expects {}",
                f.width(),
                model.n_features()
            )));
        }
    }
    Ok(SavedModel {
        model,
        mode: file.mode,
        features: file.features,
    })
}

pub fn save(saved: &SavedModel, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(saved)?).map_err(io_err(path))
}

pub fn load(path: &Path) -> Result<SavedModel> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    from_json(&text)
}

pub fn save_model(model: &EnsembleModel, path: &Path) -> Result<()> {
    save(&SavedModel::new(model.clone()), path)
}

pub fn load_model(path: &Path) -> Result<EnsembleModel> {
    Ok(load(path)?.model)
}
