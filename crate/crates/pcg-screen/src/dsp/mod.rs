//! Signal conditioning: band-pass filtering, z-score normalization, and the
//! short-time Fourier transform the feature extractors are built on.
//!
//! Preprocessing order matters and is fixed: filter first, then z-score, so
//! out-of-band energy never contaminates the normalization statistics.

mod butterworth;
mod stft;

pub use butterworth::{
    design_butterworth_bandpass, filter_signal, BandpassFilter, Biquad, DesignError,
};
pub use stft::{compute_stft, Spectrogram, StftConfig, StftError};

#[derive(Debug, thiserror::Error)]
pub enum DspError {
    #[error("signal is empty")]
    EmptySignal,
    #[error("signal has {0} samples, need at least 2 to normalize")]
    TooShort(usize),
    #[error("signal is constant (standard deviation below 1e-12), cannot z-score")]
    ConstantSignal,
}

/// Z-score normalization: subtract the mean, divide by the sample standard
/// deviation (the `n - 1` flavor).
pub fn zscore_normalize(signal: &[f64]) -> Result<Vec<f64>, DspError> {
    if signal.len() < 2 {
        return Err(DspError::TooShort(signal.len()));
    }
    let n = signal.len() as f64;
    let mean = signal.iter().sum::<f64>() / n;
    let var = signal.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();
    if std <= 1e-12 {
        return Err(DspError::ConstantSignal);
    }
    Ok(signal.iter().map(|x| (x - mean) / std).collect())
}

/// Filter then z-score: the preprocessing applied to every recording before
/// any feature extraction.
pub fn preprocess(signal: &[f64], filter: &BandpassFilter) -> Result<Vec<f64>, DspError> {
    let filtered = filter_signal(filter, signal).map_err(|_| DspError::EmptySignal)?;
    zscore_normalize(&filtered)
}
