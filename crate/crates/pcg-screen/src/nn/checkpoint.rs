//! Checkpoint directory layout.
//!
//! `model.json` carries the format version, model and training configs, the
//! ordered tensor table (name, shape, element offset), the handcrafted
//! feature statistics + the indices of the dims the model consumes, and the
//! class weights. `weights.bin` is the concatenated parameter data as
//! row-major little-endian f32 at those offsets.
//!
//! Models written here hold f32-representable values (training quantizes on
//! exit), so save -> load reproduces bit-identical forward outputs.

use std::fs;
use std::path::Path;

use crate::features::FeatureStats;

use super::model::{Model, ModelConfig, TensorLayout};
use super::train::TrainConfig;
use super::NnError;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;
pub const MODEL_JSON: &str = "model.json";
pub const WEIGHTS_BIN: &str = "weights.bin";

/// A trained model plus everything inference needs to reproduce training's
/// input transform.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Model,
    pub train_config: TrainConfig,
    /// Statistics over all 11 handcrafted dims, fit on the training split.
    pub feature_stats: FeatureStats,
    /// Which handcrafted dims (indices into the canonical 11-vector) the
    /// model consumes, in order. Length equals the config's
    /// `handcrafted_dim`.
    pub hand_indices: Vec<usize>,
    pub class_weights: [f64; 2],
}

#[derive(serde::Serialize, serde::Deserialize)]
struct ModelJson {
    format_version: u32,
    model_config: ModelConfig,
    train_config: TrainConfig,
    tensors: Vec<TensorLayout>,
    feature_stats: FeatureStats,
    hand_indices: Vec<usize>,
    class_weights: [f64; 2],
}

impl Checkpoint {
    pub fn save(&self, dir: &Path) -> Result<(), NnError> {
        if self.hand_indices.len() != self.model.config().handcrafted_dim {
            return Err(NnError::CheckpointFormat(format!(
                "{} handcrafted indices but the model consumes {}",
                self.hand_indices.len(),
                self.model.config().handcrafted_dim
            )));
        }
        fs::create_dir_all(dir)?;
        let doc = ModelJson {
            format_version: CHECKPOINT_FORMAT_VERSION,
            model_config: self.model.config().clone(),
            train_config: self.train_config.clone(),
            tensors: self.model.layout().to_vec(),
            feature_stats: self.feature_stats.clone(),
            hand_indices: self.hand_indices.clone(),
            class_weights: self.class_weights,
        };
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        fs::write(dir.join(MODEL_JSON), text)?;

        let mut bytes = Vec::with_capacity(self.model.n_params() * 4);
        for &v in self.model.values() {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        fs::write(dir.join(WEIGHTS_BIN), bytes)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Checkpoint, NnError> {
        let text = fs::read_to_string(dir.join(MODEL_JSON))?;
        let doc: ModelJson = serde_json::from_str(&text)?;
        if doc.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(NnError::CheckpointFormat(format!(
                "checkpoint format version {} (this build reads {})",
                doc.format_version, CHECKPOINT_FORMAT_VERSION
            )));
        }
        let bytes = fs::read(dir.join(WEIGHTS_BIN))?;
        if bytes.len() % 4 != 0 {
            return Err(NnError::CheckpointFormat(format!(
                "weights.bin length {} is not a multiple of 4",
                bytes.len()
            )));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        let model = Model::from_parts(doc.model_config, doc.tensors, values)?;
        if doc.hand_indices.len() != model.config().handcrafted_dim {
            return Err(NnError::CheckpointFormat(format!(
                "{} handcrafted indices but the model consumes {}",
                doc.hand_indices.len(),
                model.config().handcrafted_dim
            )));
        }
        if doc.hand_indices.iter().any(|&i| i >= doc.feature_stats.mean.len()) {
            return Err(NnError::CheckpointFormat(
                "handcrafted index out of range of the feature statistics".into(),
            ));
        }
        Ok(Checkpoint {
            model,
            train_config: doc.train_config,
            feature_stats: doc.feature_stats,
            hand_indices: doc.hand_indices,
            class_weights: doc.class_weights,
        })
    }
}
