//! Frame-averaged spectral summaries, restricted to the analysis band.
//!
//! All three measures work on the power spectrogram, consider only bins
//! inside `[low_hz, high_hz]`, are computed per frame, and are averaged
//! over frames at the end.

use crate::dsp::Spectrogram;

#[derive(Debug, thiserror::Error)]
pub enum SpectralError {
    #[error("no spectrogram bins fall inside {low}..{high} Hz")]
    EmptyBand { low: f64, high: f64 },
    #[error("contrast sub-band {index} has fewer than 2 bins")]
    BandTooNarrow { index: usize },
    #[error("spectrogram has no in-band power in any frame")]
    ZeroPower,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpectralConfig {
    pub low_hz: f64,
    pub high_hz: f64,
    /// Cumulative-energy fraction defining the roll-off frequency.
    pub rolloff_pct: f64,
    /// Number of logarithmically spaced contrast sub-bands.
    pub n_contrast_bands: usize,
    /// Fraction of bins counted as the "top" and "bottom" of a sub-band.
    pub contrast_frac: f64,
    pub log_floor: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            low_hz: 25.0,
            high_hz: 400.0,
            rolloff_pct: 0.85,
            n_contrast_bands: 4,
            contrast_frac: 0.2,
            log_floor: 1e-10,
        }
    }
}

fn in_band_bins(spec: &Spectrogram, cfg: &SpectralConfig) -> Result<Vec<usize>, SpectralError> {
    let bins: Vec<usize> = (0..spec.n_bins)
        .filter(|&k| spec.bin_hz[k] >= cfg.low_hz && spec.bin_hz[k] <= cfg.high_hz)
        .collect();
    if bins.is_empty() {
        return Err(SpectralError::EmptyBand { low: cfg.low_hz, high: cfg.high_hz });
    }
    Ok(bins)
}

/// Power-weighted mean frequency, averaged over frames with in-band power.
pub fn spectral_centroid(spec: &Spectrogram, cfg: &SpectralConfig) -> Result<f64, SpectralError> {
    let bins = in_band_bins(spec, cfg)?;
    let mut sum = 0.0;
    let mut frames_used = 0usize;
    for frame in spec.frames() {
        let total: f64 = bins.iter().map(|&k| frame[k]).sum();
        if total > 0.0 {
            let weighted: f64 = bins.iter().map(|&k| spec.bin_hz[k] * frame[k]).sum();
            sum += weighted / total;
            frames_used += 1;
        }
    }
    if frames_used == 0 {
        return Err(SpectralError::ZeroPower);
    }
    Ok(sum / frames_used as f64)
}

/// Smallest in-band frequency below which `rolloff_pct` of the in-band
/// energy sits, averaged over frames with in-band power.
pub fn spectral_rolloff(spec: &Spectrogram, cfg: &SpectralConfig) -> Result<f64, SpectralError> {
    let bins = in_band_bins(spec, cfg)?;
    let mut sum = 0.0;
    let mut frames_used = 0usize;
    for frame in spec.frames() {
        let total: f64 = bins.iter().map(|&k| frame[k]).sum();
        if total <= 0.0 {
            continue;
        }
        let target = cfg.rolloff_pct * total;
        let mut acc = 0.0;
        let mut rolloff = spec.bin_hz[*bins.last().unwrap()];
        for &k in &bins {
            acc += frame[k];
            if acc >= target {
                rolloff = spec.bin_hz[k];
                break;
            }
        }
        sum += rolloff;
        frames_used += 1;
    }
    if frames_used == 0 {
        return Err(SpectralError::ZeroPower);
    }
    Ok(sum / frames_used as f64)
}

/// Mean log-ratio between the strongest and weakest `contrast_frac` of bins
/// inside each logarithmically spaced sub-band, averaged over sub-bands and
/// frames. A flat spectrum scores exactly zero.
pub fn spectral_contrast(spec: &Spectrogram, cfg: &SpectralConfig) -> Result<f64, SpectralError> {
    let bins = in_band_bins(spec, cfg)?;
    // Log-spaced edges over [low, high].
    let ratio = cfg.high_hz / cfg.low_hz;
    let n_bands = cfg.n_contrast_bands;
    let edges: Vec<f64> = (0..=n_bands)
        .map(|i| cfg.low_hz * ratio.powf(i as f64 / n_bands as f64))
        .collect();
    let mut band_bins: Vec<Vec<usize>> = vec![Vec::new(); n_bands];
    for &k in &bins {
        let f = spec.bin_hz[k];
        // Upper edge belongs to the previous band except at the very top.
        let mut b = n_bands - 1;
        for i in 0..n_bands {
            if f < edges[i + 1] {
                b = i;
                break;
            }
        }
        band_bins[b].push(k);
    }
    for (i, b) in band_bins.iter().enumerate() {
        if b.len() < 2 {
            return Err(SpectralError::BandTooNarrow { index: i });
        }
    }

    let mut sum = 0.0;
    let mut terms = 0usize;
    let mut scratch: Vec<f64> = Vec::new();
    for frame in spec.frames() {
        for b in &band_bins {
            scratch.clear();
            scratch.extend(b.iter().map(|&k| frame[k]));
            scratch.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let k = ((cfg.contrast_frac * scratch.len() as f64).floor() as usize).max(1);
            let bottom: f64 = scratch[..k].iter().sum::<f64>() / k as f64;
            let top: f64 = scratch[scratch.len() - k..].iter().sum::<f64>() / k as f64;
            sum += top.max(cfg.log_floor).ln() - bottom.max(cfg.log_floor).ln();
            terms += 1;
        }
    }
    if terms == 0 {
        return Err(SpectralError::ZeroPower);
    }
    Ok(sum / terms as f64)
}
