//! Short-time Fourier transform with a Hamming window.
//!
//! Frames are contiguous, hop-spaced, and only complete frames count:
//! `n_frames = floor((n - win_len) / hop) + 1`. Each frame is windowed,
//! zero-padded to `n_fft`, and transformed with an *unnormalized* forward
//! FFT; the stored value is the power `|X_k|^2` for the non-negative
//! frequency bins `0..=n_fft/2`.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

#[derive(Debug, thiserror::Error)]
pub enum StftError {
    #[error("signal has {n} samples but one frame needs {win_len}")]
    SignalShorterThanWindow { n: usize, win_len: usize },
    #[error("invalid STFT config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StftConfig {
    pub win_len: usize,
    pub hop: usize,
    pub n_fft: usize,
}

impl Default for StftConfig {
    /// 100 ms windows with 50 % overlap at 4 kHz, padded to 1024 points.
    fn default() -> Self {
        StftConfig { win_len: 400, hop: 200, n_fft: 1024 }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<(), StftError> {
        if self.win_len == 0 || self.hop == 0 {
            return Err(StftError::BadConfig("win_len and hop must be positive".into()));
        }
        if self.n_fft < self.win_len {
            return Err(StftError::BadConfig(format!(
                "n_fft ({}) must be at least win_len ({})",
                self.n_fft, self.win_len
            )));
        }
        Ok(())
    }

    pub fn n_frames(&self, n_samples: usize) -> usize {
        if n_samples < self.win_len {
            0
        } else {
            (n_samples - self.win_len) / self.hop + 1
        }
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }
}

/// Power spectrogram: `n_frames` rows of `n_bins` non-negative powers.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    power: Vec<f64>, // frame-major
    pub n_frames: usize,
    pub n_bins: usize,
    pub bin_hz: Vec<f64>,
    pub frame_times_s: Vec<f64>,
    pub sample_rate_hz: f64,
}

impl Spectrogram {
    pub fn frame(&self, i: usize) -> &[f64] {
        &self.power[i * self.n_bins..(i + 1) * self.n_bins]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.power.chunks_exact(self.n_bins)
    }

    /// Build a spectrogram from explicit per-frame powers (used by tests and
    /// by feature code that wants a hand-constructed spectrum).
    pub fn from_frames(frames: &[Vec<f64>], bin_hz: Vec<f64>, sample_rate_hz: f64) -> Spectrogram {
        let n_frames = frames.len();
        let n_bins = bin_hz.len();
        let mut power = Vec::with_capacity(n_frames * n_bins);
        for f in frames {
            assert_eq!(f.len(), n_bins);
            power.extend_from_slice(f);
        }
        let frame_times_s = (0..n_frames).map(|i| i as f64).collect();
        Spectrogram { power, n_frames, n_bins, bin_hz, frame_times_s, sample_rate_hz }
    }
}

/// Symmetric Hamming window: `0.54 - 0.46 cos(2 pi n / (L - 1))`.
pub fn hamming_window(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (len - 1) as f64).cos())
        .collect()
}

pub fn compute_stft(
    signal: &[f64],
    config: &StftConfig,
    sample_rate_hz: f64,
) -> Result<Spectrogram, StftError> {
    config.validate()?;
    if signal.len() < config.win_len {
        return Err(StftError::SignalShorterThanWindow {
            n: signal.len(),
            win_len: config.win_len,
        });
    }

    let n_frames = config.n_frames(signal.len());
    let n_bins = config.n_bins();
    let window = hamming_window(config.win_len);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(config.n_fft);

    let mut power = Vec::with_capacity(n_frames * n_bins);
    let mut buf = vec![Complex64::new(0.0, 0.0); config.n_fft];
    for f in 0..n_frames {
        let start = f * config.hop;
        for slot in buf.iter_mut() {
            *slot = Complex64::new(0.0, 0.0);
        }
        for (i, w) in window.iter().enumerate() {
            buf[i].re = signal[start + i] * w;
        }
        fft.process(&mut buf);
        power.extend(buf[..n_bins].iter().map(|c| c.norm_sqr()));
    }

    let bin_hz = (0..n_bins)
        .map(|k| k as f64 * sample_rate_hz / config.n_fft as f64)
        .collect();
    let frame_times_s = (0..n_frames)
        .map(|f| (f * config.hop + config.win_len / 2) as f64 / sample_rate_hz)
        .collect();
    Ok(Spectrogram {
        power,
        n_frames,
        n_bins,
        bin_hz,
        frame_times_s,
        sample_rate_hz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FS: f64 = 4000.0;

    #[test]
    fn frame_count_for_15_seconds() {
        let cfg = StftConfig::default();
        assert_eq!(cfg.n_frames(60_000), 299);
        let spec = compute_stft(&vec![0.1; 60_000], &cfg, FS).unwrap();
        assert_eq!(spec.n_frames, 299);
        assert_eq!(spec.n_bins, 513);
    }

    #[test]
    fn frame_count_edge_cases() {
        let cfg = StftConfig::default();
        assert_eq!(cfg.n_frames(400), 1);
        assert_eq!(cfg.n_frames(599), 1);
        assert_eq!(cfg.n_frames(600), 2);
        assert!(matches!(
            compute_stft(&vec![0.0; 399], &cfg, FS),
            Err(StftError::SignalShorterThanWindow { .. })
        ));
    }

    #[test]
    fn hamming_window_shape() {
        let w = hamming_window(400);
        assert!((w[0] - 0.08).abs() < 1e-12);
        assert!((w[399] - 0.08).abs() < 1e-12);
        for n in 0..400 {
            assert!((w[n] - w[399 - n]).abs() < 1e-12, "symmetry at {n}");
        }
        let peak = w.iter().cloned().fold(f64::MIN, f64::max);
        assert!(peak <= 1.0 && peak > 0.999);
    }

    #[test]
    fn parseval_identity_per_frame() {
        // Total power across all n_fft bins must equal n_fft times the sum
        // of squares of the windowed, zero-padded frame (unnormalized FFT).
        let cfg = StftConfig::default();
        let signal: Vec<f64> = (0..1200)
            .map(|i| {
                let t = i as f64 / FS;
                (2.0 * std::f64::consts::PI * 73.0 * t).sin()
                    + 0.3 * (2.0 * std::f64::consts::PI * 211.0 * t).cos()
            })
            .collect();
        let spec = compute_stft(&signal, &cfg, FS).unwrap();
        let window = hamming_window(cfg.win_len);
        for f in 0..spec.n_frames {
            let frame = spec.frame(f);
            // Reconstruct the full-spectrum sum from the half spectrum:
            // interior bins appear twice by conjugate symmetry.
            let mut total = frame[0] + frame[cfg.n_fft / 2];
            for k in 1..cfg.n_fft / 2 {
                total += 2.0 * frame[k];
            }
            let sum_sq: f64 = (0..cfg.win_len)
                .map(|i| {
                    let v = signal[f * cfg.hop + i] * window[i];
                    v * v
                })
                .sum();
            let expect = cfg.n_fft as f64 * sum_sq;
            assert!(
                (total - expect).abs() <= 1e-6 * expect.abs(),
                "frame {f}: {total} vs {expect}"
            );
        }
    }

    #[test]
    fn sine_concentrates_in_the_right_bin() {
        let cfg = StftConfig::default();
        let signal: Vec<f64> = (0..4000)
            .map(|i| (2.0 * std::f64::consts::PI * 100.0 * i as f64 / FS).sin())
            .collect();
        let spec = compute_stft(&signal, &cfg, FS).unwrap();
        // 100 Hz / (4000/1024) = bin 25.6.
        for f in 0..spec.n_frames {
            let frame = spec.frame(f);
            let argmax = (0..spec.n_bins)
                .max_by(|&a, &b| frame[a].partial_cmp(&frame[b]).unwrap())
                .unwrap();
            assert!(
                argmax == 25 || argmax == 26,
                "frame {f} peaked at bin {argmax}"
            );
        }
    }

    #[test]
    fn bin_frequencies_are_right() {
        let spec = compute_stft(&vec![0.0; 400], &StftConfig::default(), FS).unwrap();
        assert_eq!(spec.bin_hz[0], 0.0);
        assert!((spec.bin_hz[1] - 3.90625).abs() < 1e-12);
        assert!((spec.bin_hz[512] - 2000.0).abs() < 1e-12);
    }

    #[test]
    fn frame_times_increase_by_hop() {
        let spec = compute_stft(&vec![0.0; 1200], &StftConfig::default(), FS).unwrap();
        assert_eq!(spec.frame_times_s.len(), 5);
        assert!((spec.frame_times_s[0] - 0.05).abs() < 1e-12);
        assert!((spec.frame_times_s[1] - 0.10).abs() < 1e-12);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let bad_hop = StftConfig { win_len: 400, hop: 0, n_fft: 1024 };
        assert!(matches!(bad_hop.validate(), Err(StftError::BadConfig(_))));
        let bad_fft = StftConfig { win_len: 400, hop: 200, n_fft: 256 };
        assert!(matches!(bad_fft.validate(), Err(StftError::BadConfig(_))));
    }

    proptest! {
        #[test]
        fn frame_count_formula_holds(n in 400usize..5000) {
            let cfg = StftConfig::default();
            let spec = compute_stft(&vec![0.25; n], &cfg, FS).unwrap();
            prop_assert_eq!(spec.n_frames, (n - 400) / 200 + 1);
        }

        #[test]
        fn power_is_never_negative(
            x in proptest::collection::vec(-1.0f64..1.0, 400..1000)
        ) {
            let spec = compute_stft(&x, &StftConfig::default(), FS).unwrap();
            for f in spec.frames() {
                prop_assert!(f.iter().all(|&p| p >= 0.0));
            }
        }
    }
}
