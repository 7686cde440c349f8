//! MFCC extraction: HTK-style mel filterbank, log energies, an orthonormal
//! DCT-II, and delta/delta-delta stacking.
//!
//! The default configuration keeps 13 cepstra (c0 included) from 26
//! triangular filters spanning 25-400 Hz, and stacks first and second
//! deltas into a 39-row matrix, one column per STFT frame.

use crate::dsp::{compute_stft, Spectrogram, StftConfig, StftError};

#[derive(Debug, thiserror::Error)]
pub enum MfccError {
    #[error(transparent)]
    Stft(#[from] StftError),
    #[error("mel band too narrow: filters {0} and {1} cover identical FFT bins")]
    BandTooNarrow(usize, usize),
    #[error("invalid MFCC config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MfccConfig {
    /// Number of triangular mel filters.
    pub n_filters: usize,
    /// Cepstral coefficients kept per frame, c0 first.
    pub n_coeffs: usize,
    /// Filterbank band, Hz.
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    /// Floor applied inside the log to keep silent frames finite.
    pub log_floor: f64,
    /// Half-width of the delta regression window.
    pub delta_window: usize,
    pub stft: StftConfig,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            n_filters: 26,
            n_coeffs: 13,
            f_min_hz: 25.0,
            f_max_hz: 400.0,
            log_floor: 1e-10,
            delta_window: 2,
            stft: StftConfig::default(),
        }
    }
}

impl MfccConfig {
    pub fn validate(&self) -> Result<(), MfccError> {
        if self.n_filters == 0 || self.n_coeffs == 0 || self.n_coeffs > self.n_filters {
            return Err(MfccError::BadConfig(format!(
                "need 0 < n_coeffs <= n_filters (got {} and {})",
                self.n_coeffs, self.n_filters
            )));
        }
        if !(self.f_min_hz > 0.0 && self.f_min_hz < self.f_max_hz) {
            return Err(MfccError::BadConfig(format!(
                "need 0 < f_min < f_max (got {} and {})",
                self.f_min_hz, self.f_max_hz
            )));
        }
        if self.log_floor <= 0.0 {
            return Err(MfccError::BadConfig("log floor must be positive".into()));
        }
        if self.delta_window == 0 {
            return Err(MfccError::BadConfig("delta window must be at least 1".into()));
        }
        Ok(())
    }

    /// Rows of the stacked feature matrix: static + delta + delta-delta.
    pub fn stacked_rows(&self) -> usize {
        3 * self.n_coeffs
    }
}

/// Dense row-major matrix of features, `rows x cols` with one column per
/// frame. Small enough on purpose — just what the pipeline needs.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        FeatureMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_data(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        FeatureMatrix { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Stack matrices with equal column counts on top of each other.
    pub fn vstack(parts: &[&FeatureMatrix]) -> FeatureMatrix {
        let cols = parts[0].cols;
        let rows = parts.iter().map(|p| p.rows).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for p in parts {
            assert_eq!(p.cols, cols);
            data.extend_from_slice(&p.data);
        }
        FeatureMatrix { rows, cols, data }
    }
}

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10.0f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filterbank evaluated at FFT bin centers.
///
/// `n_filters + 2` points are spaced equally in mel between the band edges;
/// filter `m` rises linearly from point `m` to its peak (value 1) at point
/// `m + 1` and falls to zero at point `m + 2`. Weights for bins outside the
/// band are exactly zero.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    pub n_filters: usize,
    pub n_bins: usize,
    /// Row-major `n_filters x n_bins` weights.
    pub weights: Vec<f64>,
    /// Peak frequency of each filter, Hz.
    pub center_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    /// Filter energies for one power frame.
    pub fn apply(&self, power_frame: &[f64]) -> Vec<f64> {
        (0..self.n_filters)
            .map(|m| {
                self.row(m)
                    .iter()
                    .zip(power_frame)
                    .map(|(w, p)| w * p)
                    .sum()
            })
            .collect()
    }
}

pub fn build_mel_filterbank(
    config: &MfccConfig,
    n_fft: usize,
    sample_rate_hz: f64,
) -> Result<MelFilterbank, MfccError> {
    config.validate()?;
    let n_bins = n_fft / 2 + 1;
    let mel_lo = hz_to_mel(config.f_min_hz);
    let mel_hi = hz_to_mel(config.f_max_hz);
    let n_points = config.n_filters + 2;
    let edges_hz: Vec<f64> = (0..n_points)
        .map(|i| {
            let mel = mel_lo + (mel_hi - mel_lo) * i as f64 / (n_points - 1) as f64;
            mel_to_hz(mel)
        })
        .collect();

    let mut weights = vec![0.0; config.n_filters * n_bins];
    for m in 0..config.n_filters {
        let (left, center, right) = (edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]);
        for k in 0..n_bins {
            let f = k as f64 * sample_rate_hz / n_fft as f64;
            let w = if f >= left && f <= center {
                (f - left) / (center - left)
            } else if f > center && f <= right {
                (right - f) / (right - center)
            } else {
                0.0
            };
            weights[m * n_bins + k] = w;
        }
    }

    // Two filters covering identical bins means the band cannot support
    // this many filters at this FFT resolution.
    for m in 1..config.n_filters {
        let prev = &weights[(m - 1) * n_bins..m * n_bins];
        let this = &weights[m * n_bins..(m + 1) * n_bins];
        let same_support = prev
            .iter()
            .zip(this)
            .all(|(a, b)| (*a > 0.0) == (*b > 0.0));
        if same_support {
            return Err(MfccError::BandTooNarrow(m - 1, m));
        }
    }

    Ok(MelFilterbank {
        n_filters: config.n_filters,
        n_bins,
        weights,
        center_hz: edges_hz[1..=config.n_filters].to_vec(),
    })
}

/// Orthonormal DCT-II of one vector, keeping the first `n_keep` terms.
pub fn dct_ii_orthonormal(v: &[f64], n_keep: usize) -> Vec<f64> {
    let m = v.len();
    let mf = m as f64;
    (0..n_keep)
        .map(|j| {
            let alpha = if j == 0 { (1.0 / mf).sqrt() } else { (2.0 / mf).sqrt() };
            let sum: f64 = v
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    x * (std::f64::consts::PI * j as f64 * (2.0 * i as f64 + 1.0) / (2.0 * mf))
                        .cos()
                })
                .sum();
            alpha * sum
        })
        .collect()
}

/// Static cepstra from an existing power spectrogram: one column per frame.
pub fn mfcc_from_spectrogram(
    spec: &Spectrogram,
    config: &MfccConfig,
    filterbank: &MelFilterbank,
) -> FeatureMatrix {
    let mut out = FeatureMatrix::zeros(config.n_coeffs, spec.n_frames);
    for (t, frame) in spec.frames().enumerate() {
        let energies = filterbank.apply(frame);
        let logs: Vec<f64> = energies
            .iter()
            .map(|&e| e.max(config.log_floor).ln())
            .collect();
        let cepstra = dct_ii_orthonormal(&logs, config.n_coeffs);
        for (j, c) in cepstra.iter().enumerate() {
            out.set(j, t, *c);
        }
    }
    out
}

/// Static cepstra straight from a time signal.
pub fn compute_mfcc(
    signal: &[f64],
    config: &MfccConfig,
    sample_rate_hz: f64,
) -> Result<FeatureMatrix, MfccError> {
    let spec = compute_stft(signal, &config.stft, sample_rate_hz)?;
    let fb = build_mel_filterbank(config, config.stft.n_fft, sample_rate_hz)?;
    Ok(mfcc_from_spectrogram(&spec, config, &fb))
}

/// Delta features by the regression formula
/// `d_t = sum_n n (c_{t+n} - c_{t-n}) / (2 sum_n n^2)` with frame indices
/// clamped at the edges (edge replication).
pub fn delta_features(m: &FeatureMatrix, window: usize) -> FeatureMatrix {
    let denom: f64 = 2.0 * (1..=window).map(|n| (n * n) as f64).sum::<f64>();
    let t_max = m.cols as isize - 1;
    let mut out = FeatureMatrix::zeros(m.rows, m.cols);
    for r in 0..m.rows {
        for t in 0..m.cols as isize {
            let mut num = 0.0;
            for n in 1..=window as isize {
                let fwd = m.get(r, (t + n).clamp(0, t_max) as usize);
                let back = m.get(r, (t - n).clamp(0, t_max) as usize);
                num += n as f64 * (fwd - back);
            }
            out.set(r, t as usize, num / denom);
        }
    }
    out
}

/// The full 3-block stack: static cepstra, deltas, delta-deltas.
pub fn full_mfcc_stack(
    signal: &[f64],
    config: &MfccConfig,
    sample_rate_hz: f64,
) -> Result<FeatureMatrix, MfccError> {
    let statics = compute_mfcc(signal, config, sample_rate_hz)?;
    let deltas = delta_features(&statics, config.delta_window);
    let delta2 = delta_features(&deltas, config.delta_window);
    Ok(FeatureMatrix::vstack(&[&statics, &deltas, &delta2]))
}
