//! Time-domain heart-rate-variability metrics over NN (beat-to-beat)
//! intervals.

#[derive(Debug, thiserror::Error)]
pub enum HrvError {
    #[error("need at least 3 beats for HRV, got {0}")]
    TooFewBeats(usize),
    #[error("beat times must be strictly increasing")]
    NonMonotonicBeats,
}

/// The eight interval statistics used as model inputs.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HrvMetrics {
    pub mean_nn_ms: f64,
    /// Sample standard deviation (n - 1) of the NN intervals.
    pub sdnn_ms: f64,
    /// Root mean square of successive NN differences.
    pub rmssd_ms: f64,
    /// Count of successive differences larger than 50 ms.
    pub nn50: f64,
    /// `nn50` as a percentage of all successive differences.
    pub pnn50_pct: f64,
    pub min_rr_ms: f64,
    pub max_rr_ms: f64,
    /// Total interval count divided by the tallest histogram bin
    /// (1/128 s = 7.8125 ms bins).
    pub triangular_index: f64,
}

impl HrvMetrics {
    pub fn as_array(&self) -> [f64; 8] {
        [
            self.mean_nn_ms,
            self.sdnn_ms,
            self.rmssd_ms,
            self.nn50,
            self.pnn50_pct,
            self.min_rr_ms,
            self.max_rr_ms,
            self.triangular_index,
        ]
    }
}

const TRIANGULAR_BIN_MS: f64 = 1000.0 / 128.0; // 7.8125

pub fn compute_hrv(beat_times_s: &[f64]) -> Result<HrvMetrics, HrvError> {
    if beat_times_s.len() < 3 {
        return Err(HrvError::TooFewBeats(beat_times_s.len()));
    }
    if beat_times_s.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HrvError::NonMonotonicBeats);
    }

    let nn_ms: Vec<f64> = beat_times_s
        .windows(2)
        .map(|w| (w[1] - w[0]) * 1000.0)
        .collect();
    let n = nn_ms.len() as f64;
    let mean = nn_ms.iter().sum::<f64>() / n;
    let sdnn = (nn_ms.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt();

    let diffs: Vec<f64> = nn_ms.windows(2).map(|w| w[1] - w[0]).collect();
    let rmssd = (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt();
    let nn50 = diffs.iter().filter(|d| d.abs() > 50.0).count() as f64;
    let pnn50 = 100.0 * nn50 / diffs.len() as f64;

    let min_rr = nn_ms.iter().cloned().fold(f64::MAX, f64::min);
    let max_rr = nn_ms.iter().cloned().fold(f64::MIN, f64::max);

    // Histogram over 7.8125 ms bins; the index is total count over the mode.
    let mut counts: std::collections::BTreeMap<i64, usize> = Default::default();
    for &v in &nn_ms {
        *counts.entry((v / TRIANGULAR_BIN_MS).floor() as i64).or_default() += 1;
    }
    let mode = *counts.values().max().unwrap();
    let triangular_index = n / mode as f64;

    Ok(HrvMetrics {
        mean_nn_ms: mean,
        sdnn_ms: sdnn,
        rmssd_ms: rmssd,
        nn50,
        pnn50_pct: pnn50,
        min_rr_ms: min_rr,
        max_rr_ms: max_rr,
        triangular_index,
    })
}
