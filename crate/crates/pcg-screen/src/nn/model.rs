//! The fusion network and its gradients, hand-rolled in f64.
//!
//! Architecture: a stem 1-D convolution over the 39-row MFCC stack feeds
//! three parallel convolutions with different kernel widths; each branch is
//! global-average-pooled and the three 32-vectors are concatenated with the
//! z-scored handcrafted features before a ReLU hidden layer and a 2-way
//! softmax. A dense-only variant (no conv trunk) exists so handcrafted-only
//! ablations can run through the same trainer.
//!
//! Everything is deterministic: initialization is seeded, forward and
//! backward are single-threaded with fixed reduction order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mfcc::FeatureMatrix;

use super::NnError;

/// Lower clamp for predicted probabilities inside the loss; the upper clamp
/// is its mirror around 1.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    /// Rows of the MFCC input stack (static + delta + delta-delta).
    pub mfcc_rows: usize,
    pub stem_channels: usize,
    pub stem_kernel: usize,
    pub branch_channels: usize,
    /// One kernel width per parallel branch; different widths let the
    /// branches pick up structure at different time scales.
    pub branch_kernels: [usize; 3],
    /// Length of the handcrafted vector appended before the hidden layer.
    pub handcrafted_dim: usize,
    pub hidden_dense: usize,
    /// False drops the conv trunk entirely: the hidden layer sees only the
    /// handcrafted vector.
    pub use_conv_trunk: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            mfcc_rows: 39,
            stem_channels: 32,
            stem_kernel: 3,
            branch_channels: 32,
            branch_kernels: [3, 5, 7],
            handcrafted_dim: 11,
            hidden_dense: 64,
            use_conv_trunk: true,
        }
    }
}

pub const N_CLASSES: usize = 2;

impl ModelConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let mut kernels = vec![];
        if self.use_conv_trunk {
            kernels.push(self.stem_kernel);
            kernels.extend(self.branch_kernels);
            if self.mfcc_rows == 0 || self.stem_channels == 0 || self.branch_channels == 0 {
                return Err(NnError::InvalidConfig(
                    "conv trunk dimensions must be positive".into(),
                ));
            }
        }
        for &k in &kernels {
            if k % 2 == 0 {
                return Err(NnError::InvalidConfig(format!(
                    "kernel width {k} is even; same-padding needs odd kernels"
                )));
            }
        }
        if self.fused_dim() == 0 {
            return Err(NnError::InvalidConfig(
                "model has no inputs: no conv trunk and handcrafted_dim = 0".into(),
            ));
        }
        if self.hidden_dense == 0 {
            return Err(NnError::InvalidConfig("hidden_dense must be positive".into()));
        }
        Ok(())
    }

    /// Width of the vector entering the hidden layer.
    pub fn fused_dim(&self) -> usize {
        let deep = if self.use_conv_trunk { 3 * self.branch_channels } else { 0 };
        deep + self.handcrafted_dim
    }

    /// Minimum number of MFCC frames the conv trunk accepts.
    pub fn min_frames(&self) -> usize {
        if self.use_conv_trunk {
            *self.branch_kernels.iter().max().unwrap().max(&self.stem_kernel)
        } else {
            1
        }
    }
}

/// One named parameter tensor's place inside the flat value vector.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TensorLayout {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorLayout {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn build_layout(cfg: &ModelConfig) -> Vec<TensorLayout> {
    let mut layout: Vec<TensorLayout> = Vec::new();
    let mut offset = 0usize;
    let mut push = |layout: &mut Vec<TensorLayout>, name: &str, shape: Vec<usize>| {
        let len: usize = shape.iter().product();
        layout.push(TensorLayout { name: name.to_string(), shape, offset });
        offset += len;
    };
    if cfg.use_conv_trunk {
        push(&mut layout, "stem.weight", vec![cfg.stem_channels, cfg.mfcc_rows, cfg.stem_kernel]);
        push(&mut layout, "stem.bias", vec![cfg.stem_channels]);
        for (i, &k) in cfg.branch_kernels.iter().enumerate() {
            push(
                &mut layout,
                &format!("branch{i}.weight"),
                vec![cfg.branch_channels, cfg.stem_channels, k],
            );
            push(&mut layout, &format!("branch{i}.bias"), vec![cfg.branch_channels]);
        }
    }
    push(&mut layout, "hidden.weight", vec![cfg.hidden_dense, cfg.fused_dim()]);
    push(&mut layout, "hidden.bias", vec![cfg.hidden_dense]);
    push(&mut layout, "output.weight", vec![N_CLASSES, cfg.hidden_dense]);
    push(&mut layout, "output.bias", vec![N_CLASSES]);
    layout
}

/// One recording as the model consumes it: the MFCC stack (when the config
/// has a conv trunk) and the already imputed + z-scored handcrafted vector.
#[derive(Debug, Clone)]
pub struct Sample {
    /// Recording identifier, kept for reporting.
    pub id: String,
    pub patient_id: String,
    /// Class index: 0 = NonCHD, 1 = CHD.
    pub label: usize,
    pub mfcc: Option<FeatureMatrix>,
    pub handcrafted: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    layout: Vec<TensorLayout>,
    values: Vec<f64>,
}

/// Everything the backward pass needs from one forward evaluation.
struct Activations {
    stem_z: FeatureMatrix,
    stem_a: FeatureMatrix,
    branch_z: Vec<FeatureMatrix>,
    fused: Vec<f64>,
    hidden_z: Vec<f64>,
    hidden_a: Vec<f64>,
    probs: [f64; 2],
}

impl Model {
    /// He-uniform weight init (zero biases), deterministic per seed.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Model, NnError> {
        config.validate()?;
        let layout = build_layout(&config);
        let n: usize = layout.iter().map(|t| t.len()).sum();
        let mut values = vec![0.0f64; n];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in &layout {
            if !t.name.ends_with(".weight") {
                continue; // biases stay zero
            }
            // fan_in: product of all but the leading (output) dimension.
            let fan_in: usize = t.shape[1..].iter().product();
            let limit = (6.0 / fan_in as f64).sqrt();
            for v in &mut values[t.offset..t.offset + t.len()] {
                *v = rng.gen_range(-limit..limit);
            }
        }
        Ok(Model { config, layout, values })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &[TensorLayout] {
        &self.layout
    }

    pub fn n_params(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn set_values(&mut self, values: Vec<f64>) {
        assert_eq!(values.len(), self.values.len());
        self.values = values;
    }

    /// Rebuild a model from its serialized pieces, checking that the layout
    /// is exactly what the config dictates.
    pub fn from_parts(
        config: ModelConfig,
        layout: Vec<TensorLayout>,
        values: Vec<f64>,
    ) -> Result<Model, NnError> {
        config.validate()?;
        let expected = build_layout(&config);
        if layout != expected {
            return Err(NnError::CheckpointFormat(
                "tensor list does not match the model configuration".into(),
            ));
        }
        let n: usize = expected.iter().map(|t| t.len()).sum();
        if values.len() != n {
            return Err(NnError::CheckpointFormat(format!(
                "weight count {} does not match layout total {n}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(NnError::CheckpointFormat("non-finite weight value".into()));
        }
        Ok(Model { config, layout, values })
    }

    /// Round every parameter to its nearest f32. Called at the end of
    /// training so that the 32-bit checkpoint round-trips bit-exactly.
    pub fn quantize_f32(&mut self) {
        for v in &mut self.values {
            *v = *v as f32 as f64;
        }
    }

    fn entry(&self, name: &str) -> &TensorLayout {
        self.layout.iter().find(|t| t.name == name).expect("tensor name from own layout")
    }

    /// Values of one named tensor.
    pub fn tensor(&self, name: &str) -> &[f64] {
        let t = self.entry(name);
        &self.values[t.offset..t.offset + t.len()]
    }

    pub fn tensor_mut(&mut self, name: &str) -> &mut [f64] {
        let t = self.entry(name).clone();
        &mut self.values[t.offset..t.offset + t.len()]
    }

    /// Splits `buf` into the (weight, bias) gradient slices of one layer,
    /// relying on bias directly following weight in the layout.
    fn wb_mut<'a>(&self, buf: &'a mut [f64], base: &str) -> (&'a mut [f64], &'a mut [f64]) {
        let w = self.entry(&format!("{base}.weight"));
        let b = self.entry(&format!("{base}.bias"));
        debug_assert_eq!(b.offset, w.offset + w.len());
        let seg = &mut buf[w.offset..b.offset + b.len()];
        seg.split_at_mut(w.len())
    }

    /// Class probabilities `[NonCHD, CHD]` for one sample.
    pub fn forward(&self, sample: &Sample) -> Result<[f64; 2], NnError> {
        Ok(self.forward_full(sample)?.probs)
    }

    /// Probability of the CHD class.
    pub fn predict_chd_prob(&self, sample: &Sample) -> Result<f64, NnError> {
        Ok(self.forward(sample)?[1])
    }

    fn forward_full(&self, sample: &Sample) -> Result<Activations, NnError> {
        let cfg = &self.config;
        if sample.handcrafted.len() != cfg.handcrafted_dim {
            return Err(NnError::ShapeMismatch(format!(
                "handcrafted vector has {} values, model expects {}",
                sample.handcrafted.len(),
                cfg.handcrafted_dim
            )));
        }
        let mut fused = Vec::with_capacity(cfg.fused_dim());
        let (stem_z, stem_a, branch_z) = if cfg.use_conv_trunk {
            let x = sample.mfcc.as_ref().ok_or_else(|| {
                NnError::ShapeMismatch("model has a conv trunk but the sample has no MFCC".into())
            })?;
            if x.rows != cfg.mfcc_rows {
                return Err(NnError::ShapeMismatch(format!(
                    "MFCC has {} rows, model expects {}",
                    x.rows, cfg.mfcc_rows
                )));
            }
            if x.cols < cfg.min_frames() {
                return Err(NnError::ShapeMismatch(format!(
                    "MFCC has {} frames, conv trunk needs at least {}",
                    x.cols,
                    cfg.min_frames()
                )));
            }
            let stem_z = conv1d_same(
                x,
                self.tensor("stem.weight"),
                self.tensor("stem.bias"),
                cfg.stem_channels,
                cfg.stem_kernel,
            );
            let stem_a = relu_matrix(&stem_z);
            let mut branch_z = Vec::with_capacity(3);
            for (i, &k) in cfg.branch_kernels.iter().enumerate() {
                let z = conv1d_same(
                    &stem_a,
                    self.tensor(&format!("branch{i}.weight")),
                    self.tensor(&format!("branch{i}.bias")),
                    cfg.branch_channels,
                    k,
                );
                // Global average pool of the ReLU'd branch output.
                let t_len = z.cols as f64;
                for oc in 0..cfg.branch_channels {
                    let s: f64 = z.row(oc).iter().map(|&v| v.max(0.0)).sum();
                    fused.push(s / t_len);
                }
                branch_z.push(z);
            }
            (stem_z, stem_a, branch_z)
        } else {
            (FeatureMatrix::zeros(0, 0), FeatureMatrix::zeros(0, 0), Vec::new())
        };
        fused.extend_from_slice(&sample.handcrafted);

        let hidden_z = dense_forward(
            self.tensor("hidden.weight"),
            self.tensor("hidden.bias"),
            &fused,
            self.config.hidden_dense,
        );
        let hidden_a: Vec<f64> = hidden_z.iter().map(|&v| v.max(0.0)).collect();
        let logits =
            dense_forward(self.tensor("output.weight"), self.tensor("output.bias"), &hidden_a, 2);
        let probs = softmax2(logits[0], logits[1]);
        Ok(Activations { stem_z, stem_a, branch_z, fused, hidden_z, hidden_a, probs })
    }

    /// Mean weighted BCE over a batch, forward-only. This is the function
    /// the finite-difference oracle probes.
    pub fn batch_loss(&self, batch: &[&Sample], class_weights: [f64; 2]) -> Result<f64, NnError> {
        if batch.is_empty() {
            return Err(NnError::EmptyDataset("loss over an empty batch".into()));
        }
        let mut sum = 0.0;
        for s in batch {
            let p = self.predict_chd_prob(s)?;
            sum += sample_loss(p, s.label, class_weights);
        }
        Ok(sum / batch.len() as f64)
    }

    /// Mean weighted BCE and its exact analytic gradient for every
    /// parameter, in layout order.
    pub fn loss_and_gradients(
        &self,
        batch: &[&Sample],
        class_weights: [f64; 2],
    ) -> Result<(f64, Vec<f64>), NnError> {
        if batch.is_empty() {
            return Err(NnError::EmptyDataset("gradient over an empty batch".into()));
        }
        let mut grad = vec![0.0f64; self.values.len()];
        let mut loss_sum = 0.0;
        for s in batch {
            let acts = self.forward_full(s)?;
            loss_sum += sample_loss(acts.probs[1], s.label, class_weights);
            self.accumulate_sample_gradient(&acts, s, class_weights, &mut grad);
        }
        let b = batch.len() as f64;
        for g in &mut grad {
            *g /= b;
        }
        Ok((loss_sum / b, grad))
    }

    fn accumulate_sample_gradient(
        &self,
        acts: &Activations,
        sample: &Sample,
        class_weights: [f64; 2],
        grad: &mut [f64],
    ) {
        let cfg = &self.config;
        let p1 = acts.probs[1];
        let y = sample.label as f64;
        let w = class_weights[sample.label];
        // Inside the clamp band the loss reduces to d/dlogit1 = W(p - y);
        // outside it the loss is flat in the parameters.
        let d_logit1 = if p1 > PROB_CLAMP && p1 < 1.0 - PROB_CLAMP { w * (p1 - y) } else { 0.0 };
        let d_logits = [-d_logit1, d_logit1];

        // Output layer.
        let hidden = cfg.hidden_dense;
        let mut d_hidden_a = vec![0.0f64; hidden];
        {
            let out_w = self.tensor("output.weight").to_vec();
            let (dw, db) = self.wb_mut(grad, "output");
            for c in 0..2 {
                db[c] += d_logits[c];
                let row = &mut dw[c * hidden..(c + 1) * hidden];
                let w_row = &out_w[c * hidden..(c + 1) * hidden];
                for j in 0..hidden {
                    row[j] += d_logits[c] * acts.hidden_a[j];
                    d_hidden_a[j] += w_row[j] * d_logits[c];
                }
            }
        }

        // Hidden layer (through its ReLU).
        let fused_dim = cfg.fused_dim();
        let mut d_fused = vec![0.0f64; fused_dim];
        {
            let hid_w = self.tensor("hidden.weight").to_vec();
            let (dw, db) = self.wb_mut(grad, "hidden");
            for j in 0..hidden {
                let dz = if acts.hidden_z[j] > 0.0 { d_hidden_a[j] } else { 0.0 };
                if dz == 0.0 {
                    continue;
                }
                db[j] += dz;
                let row = &mut dw[j * fused_dim..(j + 1) * fused_dim];
                let w_row = &hid_w[j * fused_dim..(j + 1) * fused_dim];
                for i in 0..fused_dim {
                    row[i] += dz * acts.fused[i];
                    d_fused[i] += w_row[i] * dz;
                }
            }
        }

        if !cfg.use_conv_trunk {
            return; // handcrafted inputs carry no parameters
        }

        // Branches: un-pool, un-ReLU, conv backward into the stem output.
        let t_len = acts.stem_a.cols;
        let mut d_stem_a = FeatureMatrix::zeros(cfg.stem_channels, t_len);
        for (i, &k) in cfg.branch_kernels.iter().enumerate() {
            let z = &acts.branch_z[i];
            let mut dz = FeatureMatrix::zeros(cfg.branch_channels, t_len);
            for oc in 0..cfg.branch_channels {
                // GAP spreads the pooled gradient uniformly over time.
                let dgap = d_fused[i * cfg.branch_channels + oc] / t_len as f64;
                let zr = z.row(oc);
                let dr = dz.row_mut(oc);
                for t in 0..t_len {
                    if zr[t] > 0.0 {
                        dr[t] = dgap;
                    }
                }
            }
            let w_branch = self.tensor(&format!("branch{i}.weight")).to_vec();
            let (dw, db) = self.wb_mut(grad, &format!("branch{i}"));
            conv1d_backward(
                &acts.stem_a,
                &w_branch,
                &dz,
                cfg.branch_channels,
                k,
                dw,
                db,
                Some(&mut d_stem_a),
            );
        }

        // Stem (through its ReLU); the input itself needs no gradient.
        let x = sample.mfcc.as_ref().expect("trunk forward already used the MFCC");
        let mut d_stem_z = FeatureMatrix::zeros(cfg.stem_channels, t_len);
        for oc in 0..cfg.stem_channels {
            let zr = acts.stem_z.row(oc);
            let da = d_stem_a.row(oc);
            let dr = d_stem_z.row_mut(oc);
            for t in 0..t_len {
                if zr[t] > 0.0 {
                    dr[t] = da[t];
                }
            }
        }
        let stem_w = self.tensor("stem.weight").to_vec();
        let (dw, db) = self.wb_mut(grad, "stem");
        conv1d_backward(x, &stem_w, &d_stem_z, cfg.stem_channels, cfg.stem_kernel, dw, db, None);
    }
}

/// Per-sample weighted BCE with the probability clamp.
pub fn sample_loss(prob_chd: f64, label: usize, class_weights: [f64; 2]) -> f64 {
    let p = prob_chd.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let nll = if label == 1 { -p.ln() } else { -(1.0 - p).ln() };
    class_weights[label] * nll
}

/// Balanced class weights `W_i = K / (N * n_i)` from 0/1 labels.
pub fn class_weights(labels: &[usize]) -> Result<[f64; 2], NnError> {
    let n1 = labels.iter().filter(|&&l| l == 1).count();
    let n0 = labels.len() - n1;
    if n0 == 0 || n1 == 0 {
        return Err(NnError::SingleClassOnly);
    }
    let k = labels.len() as f64;
    Ok([k / (2.0 * n0 as f64), k / (2.0 * n1 as f64)])
}

/// Mean class-weighted binary cross-entropy of CHD probabilities against
/// 0/1 labels.
pub fn weighted_bce(
    probs_chd: &[f64],
    labels: &[usize],
    class_weights: [f64; 2],
) -> Result<f64, NnError> {
    if probs_chd.len() != labels.len() {
        return Err(NnError::LengthMismatch { left: probs_chd.len(), right: labels.len() });
    }
    if probs_chd.is_empty() {
        return Err(NnError::EmptyDataset("loss over an empty batch".into()));
    }
    let sum: f64 =
        probs_chd.iter().zip(labels).map(|(&p, &y)| sample_loss(p, y, class_weights)).sum();
    Ok(sum / labels.len() as f64)
}

/// Same-padded stride-1 1-D convolution; returns pre-activations.
fn conv1d_same(x: &FeatureMatrix, w: &[f64], bias: &[f64], out_c: usize, k: usize) -> FeatureMatrix {
    let in_c = x.rows;
    let t_len = x.cols;
    let pad = (k - 1) / 2;
    let mut out = FeatureMatrix::zeros(out_c, t_len);
    for oc in 0..out_c {
        let row = out.row_mut(oc);
        row.fill(bias[oc]);
        for ic in 0..in_c {
            let xr = x.row(ic);
            let w_base = (oc * in_c + ic) * k;
            for j in 0..k {
                let wv = w[w_base + j];
                let shift = j as isize - pad as isize;
                let t0 = (-shift).max(0) as usize;
                let t1 = ((t_len as isize - shift) as usize).min(t_len);
                if t0 >= t1 {
                    continue;
                }
                let x0 = (t0 as isize + shift) as usize;
                for (o, &xv) in row[t0..t1].iter_mut().zip(&xr[x0..x0 + (t1 - t0)]) {
                    *o += wv * xv;
                }
            }
        }
    }
    out
}

/// Gradients of a same-padded conv: weight and bias always, input
/// optionally (the stem has no upstream layer to feed).
#[allow(clippy::too_many_arguments)]
fn conv1d_backward(
    x: &FeatureMatrix,
    w: &[f64],
    dz: &FeatureMatrix,
    out_c: usize,
    k: usize,
    dw: &mut [f64],
    db: &mut [f64],
    dx: Option<&mut FeatureMatrix>,
) {
    let in_c = x.rows;
    let t_len = x.cols;
    let pad = (k - 1) / 2;
    for oc in 0..out_c {
        let dzr = dz.row(oc);
        db[oc] += dzr.iter().sum::<f64>();
        for ic in 0..in_c {
            let xr = x.row(ic);
            let w_base = (oc * in_c + ic) * k;
            for j in 0..k {
                let shift = j as isize - pad as isize;
                let t0 = (-shift).max(0) as usize;
                let t1 = ((t_len as isize - shift) as usize).min(t_len);
                if t0 >= t1 {
                    continue;
                }
                let x0 = (t0 as isize + shift) as usize;
                let mut acc = 0.0;
                for (d, xv) in dzr[t0..t1].iter().zip(&xr[x0..x0 + (t1 - t0)]) {
                    acc += d * xv;
                }
                dw[w_base + j] += acc;
            }
        }
    }
    if let Some(dx) = dx {
        for oc in 0..out_c {
            let dzr = dz.row(oc);
            for ic in 0..in_c {
                let w_base = (oc * in_c + ic) * k;
                let dxr = dx.row_mut(ic);
                for j in 0..k {
                    let wv = w[w_base + j];
                    let shift = j as isize - pad as isize;
                    let t0 = (-shift).max(0) as usize;
                    let t1 = ((t_len as isize - shift) as usize).min(t_len);
                    if t0 >= t1 {
                        continue;
                    }
                    let x0 = (t0 as isize + shift) as usize;
                    for (d, o) in dzr[t0..t1].iter().zip(&mut dxr[x0..x0 + (t1 - t0)]) {
                        *o += wv * d;
                    }
                }
            }
        }
    }
}

fn dense_forward(w: &[f64], bias: &[f64], input: &[f64], out_dim: usize) -> Vec<f64> {
    let in_dim = input.len();
    let mut out = Vec::with_capacity(out_dim);
    for j in 0..out_dim {
        let row = &w[j * in_dim..(j + 1) * in_dim];
        let dot: f64 = row.iter().zip(input).map(|(a, b)| a * b).sum();
        out.push(bias[j] + dot);
    }
    out
}

fn relu_matrix(z: &FeatureMatrix) -> FeatureMatrix {
    FeatureMatrix::from_data(z.rows, z.cols, z.data().iter().map(|&v| v.max(0.0)).collect())
}

/// Numerically stable 2-way softmax.
fn softmax2(l0: f64, l1: f64) -> [f64; 2] {
    let m = l0.max(l1);
    let e0 = (l0 - m).exp();
    let e1 = (l1 - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}
