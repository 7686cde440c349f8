//! Mini-batch Adam training with early stopping on validation AUROC.
//!
//! Determinism contract: a fixed seed fixes the shuffle order, so two runs
//! with identical data and config produce identical parameter trajectories
//! bit for bit (single-threaded f64 arithmetic, fixed reduction order).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::stats::mann_whitney_u;

use super::model::{class_weights, Model, Sample};
use super::NnError;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation-AUROC improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            max_epochs: 50,
            patience: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.learning_rate <= 0.0 {
            return Err(NnError::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(NnError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(NnError::InvalidConfig("max_epochs must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(NnError::InvalidConfig("Adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_auroc: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_auroc: f64,
    pub class_weights: [f64; 2],
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    fn new(n: usize) -> Adam {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, cfg: &TrainConfig, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let b1c = 1.0 - cfg.beta1.powi(self.t as i32);
        let b2c = 1.0 - cfg.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grad[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / b1c;
            let v_hat = self.v[i] / b2c;
            params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

/// Recording-level AUROC of CHD probabilities via the rank-statistic
/// identity AUROC = U / (n_pos * n_neg).
pub fn recording_auroc(scores: &[f64], labels: &[usize]) -> Result<f64, NnError> {
    let pos: Vec<f64> =
        scores.iter().zip(labels).filter(|(_, &l)| l == 1).map(|(&s, _)| s).collect();
    let neg: Vec<f64> =
        scores.iter().zip(labels).filter(|(_, &l)| l == 0).map(|(&s, _)| s).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(NnError::SingleClassOnly);
    }
    let u = mann_whitney_u(&pos, &neg)
        .map_err(|e| NnError::InvalidConfig(format!("AUROC rank computation failed: {e}")))?;
    Ok(u.u_a / (pos.len() * neg.len()) as f64)
}

/// Trains in place. Class weights come from the training labels only.
///
/// Epoch quality is judged lexicographically: a higher validation AUROC is
/// an improvement, and so is an equal AUROC with a lower validation loss.
/// The loss tiebreak matters on easily separable data, where AUROC
/// saturates at 1.0 within an epoch or two while the probabilities are
/// still far from calibrated — judging by AUROC alone would halt with a
/// model that ranks perfectly but thresholds poorly. The
/// best-so-far parameters are restored at the end and quantized through
/// f32 so the checkpoint on disk reproduces this exact model.
pub fn train(
    model: &mut Model,
    train_set: &[Sample],
    val_set: &[Sample],
    cfg: &TrainConfig,
) -> Result<TrainHistory, NnError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(NnError::EmptyDataset("training set is empty".into()));
    }
    if val_set.is_empty() {
        return Err(NnError::EmptyDataset("validation set is empty".into()));
    }
    let train_labels: Vec<usize> = train_set.iter().map(|s| s.label).collect();
    let weights = class_weights(&train_labels)?;
    if !val_set.iter().any(|s| s.label == 1) || !val_set.iter().any(|s| s.label == 0) {
        return Err(NnError::SingleClassOnly);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(model.n_params());
    let mut history = Vec::new();
    let mut best_epoch = 0usize;
    let mut best_auroc = f64::NEG_INFINITY;
    let mut best_val_loss = f64::INFINITY;
    let mut best_values: Vec<f64> = model.values().to_vec();
    let mut epochs_since_best = 0usize;

    for epoch in 1..=cfg.max_epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut n_batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (loss, grad) = model.loss_and_gradients(&batch, weights)?;
            adam.step(cfg, model.values_mut(), &grad);
            loss_sum += loss;
            n_batches += 1;
        }

        let mut scores = Vec::with_capacity(val_set.len());
        let mut labels = Vec::with_capacity(val_set.len());
        for s in val_set {
            scores.push(model.predict_chd_prob(s)?);
            labels.push(s.label);
        }
        let val_auroc = recording_auroc(&scores, &labels)?;
        let val_loss = crate::nn::weighted_bce(&scores, &labels, weights)?;

        history.push(EpochStats {
            epoch,
            train_loss: loss_sum / n_batches as f64,
            val_loss,
            val_auroc,
        });

        let improved =
            val_auroc > best_auroc || (val_auroc == best_auroc && val_loss < best_val_loss);
        if improved {
            best_auroc = val_auroc;
            best_val_loss = val_loss;
            best_epoch = epoch;
            best_values = model.values().to_vec();
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if epochs_since_best >= cfg.patience {
                break;
            }
        }
    }

    model.set_values(best_values);
    model.quantize_f32();
    Ok(TrainHistory {
        epochs: history,
        best_epoch,
        best_val_auroc: best_auroc,
        class_weights: weights,
    })
}
