//! Handcrafted (non-learned) features: HRV interval statistics from beat
//! detection plus band-limited spectral summaries.
//!
//! The eleven values feed the fusion head of the model in a fixed order.
//! When a recording yields no usable beat sequence the eight HRV slots are
//! left at zero and flagged; dataset assembly later replaces them with
//! training-set medians so no non-finite or placeholder value reaches the
//! model.

mod beats;
mod hrv;
mod spectral;

pub use beats::{detect_beats, hr_prior_bpm, BeatDetection, BeatError};
pub use hrv::{compute_hrv, HrvError, HrvMetrics};
pub use spectral::{
    spectral_centroid, spectral_contrast, spectral_rolloff, SpectralConfig, SpectralError,
};

use crate::dsp::Spectrogram;

/// Order of the handcrafted vector. HRV first (8), then spectral (3).
pub const HANDCRAFTED_NAMES: [&str; 11] = [
    "mean_nn_ms",
    "sdnn_ms",
    "rmssd_ms",
    "nn50",
    "pnn50_pct",
    "min_rr_ms",
    "max_rr_ms",
    "triangular_index",
    "spectral_centroid_hz",
    "spectral_rolloff_hz",
    "spectral_contrast",
];

/// Indices of the HRV block within the handcrafted vector.
pub const HRV_RANGE: std::ops::Range<usize> = 0..8;
/// Indices of the spectral block within the handcrafted vector.
pub const SPECTRAL_RANGE: std::ops::Range<usize> = 8..11;

/// The three feature families the pipeline can mix and match, mainly for
/// ablation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureGroup {
    Mfcc,
    Hrv,
    Spectral,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 3] = [FeatureGroup::Mfcc, FeatureGroup::Hrv, FeatureGroup::Spectral];
}

impl std::fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FeatureGroup::Mfcc => "mfcc",
            FeatureGroup::Hrv => "hrv",
            FeatureGroup::Spectral => "spectral",
        })
    }
}

impl std::str::FromStr for FeatureGroup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mfcc" => Ok(FeatureGroup::Mfcc),
            "hrv" => Ok(FeatureGroup::Hrv),
            "spectral" => Ok(FeatureGroup::Spectral),
            other => Err(format!("unknown feature group '{other}' (mfcc, hrv, spectral)")),
        }
    }
}

/// Which handcrafted dims a set of feature groups consumes, in canonical
/// order (HRV block, then spectral block).
pub fn handcrafted_indices(groups: &[FeatureGroup]) -> Vec<usize> {
    let mut idx = Vec::new();
    if groups.contains(&FeatureGroup::Hrv) {
        idx.extend(HRV_RANGE);
    }
    if groups.contains(&FeatureGroup::Spectral) {
        idx.extend(SPECTRAL_RANGE);
    }
    idx
}

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error(transparent)]
    Beats(#[from] BeatError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// One recording's handcrafted features.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HandcraftedFeatures {
    pub values: [f64; 11],
    /// False when beat detection failed and the HRV block is a placeholder
    /// awaiting median imputation.
    pub hrv_ok: bool,
}

/// Extract the full handcrafted vector from a preprocessed signal and its
/// spectrogram.
///
/// Beat-detection failure is expected on poor recordings and is not an
/// error: the HRV block comes back zeroed with `hrv_ok = false`. A signal
/// too short to even attempt detection *is* an error, as is a spectrogram
/// with no usable in-band power.
pub fn extract_handcrafted(
    signal: &[f64],
    spec: &Spectrogram,
    age_months: u32,
    sample_rate_hz: f64,
    cfg: &SpectralConfig,
) -> Result<HandcraftedFeatures, FeatureError> {
    let mut values = [0.0f64; 11];

    let hrv_ok = match detect_beats(signal, sample_rate_hz, age_months) {
        Ok(det) => match compute_hrv(&det.beat_times_s) {
            Ok(h) => {
                values[HRV_RANGE].copy_from_slice(&h.as_array());
                true
            }
            Err(HrvError::TooFewBeats(_)) | Err(HrvError::NonMonotonicBeats) => false,
        },
        Err(BeatError::NoBeatsDetected) => false,
        Err(e @ BeatError::SignalTooShort { .. }) => return Err(e.into()),
    };

    values[8] = spectral_centroid(spec, cfg)?;
    values[9] = spectral_rolloff(spec, cfg)?;
    values[10] = spectral_contrast(spec, cfg)?;

    Ok(HandcraftedFeatures { values, hrv_ok })
}

/// Per-dimension statistics of a training set's handcrafted vectors:
/// medians for imputing failed-HRV rows, mean/std for z-scoring before
/// fusion. Fit on training recordings only and carried inside the model
/// checkpoint so inference applies the identical transform.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FeatureStats {
    pub median: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    /// Fit from training rows. HRV medians come from rows where beat
    /// detection succeeded (all rows as a fallback when none did); mean and
    /// std are then taken over the imputed matrix, sample (n-1) convention.
    pub fn fit(rows: &[HandcraftedFeatures]) -> FeatureStats {
        assert!(!rows.is_empty(), "cannot fit feature statistics on zero rows");
        let dims = 11;
        let mut median = vec![0.0; dims];
        for d in 0..dims {
            let mut col: Vec<f64> = if HRV_RANGE.contains(&d) {
                let ok: Vec<f64> =
                    rows.iter().filter(|r| r.hrv_ok).map(|r| r.values[d]).collect();
                if ok.is_empty() {
                    rows.iter().map(|r| r.values[d]).collect()
                } else {
                    ok
                }
            } else {
                rows.iter().map(|r| r.values[d]).collect()
            };
            col.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = col.len();
            median[d] =
                if n % 2 == 1 { col[n / 2] } else { (col[n / 2 - 1] + col[n / 2]) / 2.0 };
        }

        let stats = FeatureStats { median, mean: vec![0.0; dims], std: vec![1.0; dims] };
        let imputed: Vec<Vec<f64>> = rows.iter().map(|r| stats.impute(r)).collect();
        let n = imputed.len() as f64;
        let mut mean = vec![0.0; dims];
        for row in &imputed {
            for d in 0..dims {
                mean[d] += row[d];
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut std = vec![0.0; dims];
        if imputed.len() > 1 {
            for row in &imputed {
                for d in 0..dims {
                    std[d] += (row[d] - mean[d]).powi(2);
                }
            }
            for s in &mut std {
                *s = (*s / (n - 1.0)).sqrt();
            }
        }
        FeatureStats { median: stats.median, mean, std }
    }

    /// The raw vector with failed-HRV slots replaced by training medians.
    pub fn impute(&self, f: &HandcraftedFeatures) -> Vec<f64> {
        let mut v = f.values.to_vec();
        if !f.hrv_ok {
            v[HRV_RANGE].copy_from_slice(&self.median[HRV_RANGE]);
        }
        v
    }

    /// Z-score an (already imputed) vector. Constant dimensions map to 0.
    pub fn normalize(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.mean.len());
        v.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&x, (&m, &s))| if s > 1e-12 { (x - m) / s } else { 0.0 })
            .collect()
    }
}
