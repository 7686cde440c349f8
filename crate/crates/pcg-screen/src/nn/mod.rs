//! The classifier: a three-branch 1-D CNN over the MFCC stack fused with
//! handcrafted features, trained with class-weighted BCE and Adam. All
//! tensor math is written out by hand in f64 and the backward pass is held
//! to a finite-difference oracle in the test suite.

mod checkpoint;
mod model;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT_VERSION, MODEL_JSON, WEIGHTS_BIN};
pub use model::{
    class_weights, sample_loss, weighted_bce, Model, ModelConfig, Sample, TensorLayout,
    N_CLASSES, PROB_CLAMP,
};
pub use train::{recording_auroc, train, EpochStats, TrainConfig, TrainHistory};

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("invalid model or training configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("both classes must be present")]
    SingleClassOnly,
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("bad checkpoint: {0}")]
    CheckpointFormat(String),
    #[error("checkpoint I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint JSON is invalid: {0}")]
    Json(#[from] serde_json::Error),
}
