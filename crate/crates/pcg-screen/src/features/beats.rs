//! Heart-beat localization in a preprocessed PCG signal.
//!
//! The route is envelope-based: Shannon energy of the peak-normalized
//! signal, smoothed by a 50 ms moving average, gives an envelope whose
//! autocorrelation — searched only over the physiologically plausible
//! heart-rate band for the patient's age — yields the beat period. Envelope
//! peaks at least half a period apart are then kept as beats, each refined
//! to the local energy centroid.

#[derive(Debug, thiserror::Error)]
pub enum BeatError {
    #[error("signal of {got:.2} s is too short for beat detection (need {need:.0} s)")]
    SignalTooShort { got: f64, need: f64 },
    #[error("no plausible beats found")]
    NoBeatsDetected,
}

/// Plausible heart-rate band (bpm) by age.
pub fn hr_prior_bpm(age_months: u32) -> (f64, f64) {
    if age_months <= 24 {
        (100.0, 180.0)
    } else if age_months <= 144 {
        (70.0, 140.0)
    } else {
        (60.0, 120.0)
    }
}

#[derive(Debug, Clone)]
pub struct BeatDetection {
    /// Beat times in seconds, strictly increasing.
    pub beat_times_s: Vec<f64>,
    /// Heart rate implied by the envelope periodicity.
    pub estimated_hr_bpm: f64,
    /// Normalized autocorrelation at the chosen period, clamped to [0, 1].
    /// Low values mean the envelope was barely periodic.
    pub method_confidence: f64,
}

const MIN_DURATION_S: f64 = 2.0;
const SMOOTH_MS: f64 = 50.0;
const ENVELOPE_RATE_HZ: f64 = 200.0;
const MIN_SEPARATION_PERIODS: f64 = 0.5;
const CANDIDATE_FLOOR_FRAC: f64 = 0.1;

pub fn detect_beats(
    signal: &[f64],
    sample_rate_hz: f64,
    age_months: u32,
) -> Result<BeatDetection, BeatError> {
    let fs = sample_rate_hz;
    let duration = signal.len() as f64 / fs;
    if duration < MIN_DURATION_S {
        return Err(BeatError::SignalTooShort { got: duration, need: MIN_DURATION_S });
    }

    let peak = signal.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if peak < 1e-9 {
        return Err(BeatError::NoBeatsDetected); // silence
    }

    // Shannon energy of the peak-normalized signal, then a centered moving
    // average over 50 ms.
    let energy: Vec<f64> = signal
        .iter()
        .map(|&x| {
            let sq = (x / peak) * (x / peak);
            if sq > 0.0 {
                -sq * sq.ln()
            } else {
                0.0
            }
        })
        .collect();
    let half = ((SMOOTH_MS / 1000.0 * fs) as usize / 2).max(1);
    let envelope = centered_moving_average(&energy, half);

    // Periodicity from the decimated envelope's autocorrelation, searched
    // inside the age-conditioned heart-rate band.
    let decim = ((fs / ENVELOPE_RATE_HZ).round() as usize).max(1);
    let env_d: Vec<f64> = envelope.iter().step_by(decim).copied().collect();
    let fs_d = fs / decim as f64;
    let (hr_lo, hr_hi) = hr_prior_bpm(age_months);
    let lag_min = ((60.0 / hr_hi) * fs_d).floor() as usize;
    let lag_max = (((60.0 / hr_lo) * fs_d).ceil() as usize).min(env_d.len().saturating_sub(1));
    if lag_min == 0 || lag_min >= lag_max {
        return Err(BeatError::NoBeatsDetected);
    }
    let mean = env_d.iter().sum::<f64>() / env_d.len() as f64;
    let centered: Vec<f64> = env_d.iter().map(|e| e - mean).collect();
    let denom: f64 = centered.iter().map(|e| e * e).sum();
    if denom <= 0.0 {
        return Err(BeatError::NoBeatsDetected);
    }
    let (mut best_lag, mut best_r) = (lag_min, f64::MIN);
    for lag in lag_min..=lag_max {
        let r: f64 = centered[lag..]
            .iter()
            .zip(&centered)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / denom;
        if r > best_r {
            best_r = r;
            best_lag = lag;
        }
    }
    let period_s = best_lag as f64 / fs_d;
    let confidence = best_r.clamp(0.0, 1.0);

    // Candidate peaks on the full-rate envelope; keep the strongest ones
    // subject to a half-period minimum separation.
    let floor = CANDIDATE_FLOOR_FRAC * envelope.iter().cloned().fold(f64::MIN, f64::max);
    let mut candidates: Vec<usize> = (1..envelope.len() - 1)
        .filter(|&i| {
            envelope[i] > envelope[i - 1] && envelope[i] >= envelope[i + 1] && envelope[i] >= floor
        })
        .collect();
    candidates.sort_by(|&a, &b| envelope[b].partial_cmp(&envelope[a]).unwrap());
    let min_sep = (MIN_SEPARATION_PERIODS * period_s * fs) as usize;
    // No more beats can fit than the period allows; the cap keeps weak
    // between-beat noise maxima from being picked up after the real beats.
    let max_beats = (duration / period_s).floor() as usize + 1;
    let mut accepted: Vec<usize> = Vec::new();
    for c in candidates {
        if accepted.len() == max_beats {
            break;
        }
        if accepted.iter().all(|&a| a.abs_diff(c) >= min_sep) {
            accepted.push(c);
        }
    }
    accepted.sort_unstable();
    if accepted.len() < 3 {
        return Err(BeatError::NoBeatsDetected);
    }

    // Refine each peak to the Shannon-energy centroid of its neighborhood;
    // a flat-topped envelope plateau otherwise costs up to half the
    // smoothing window in timing.
    let beat_times_s = accepted
        .iter()
        .map(|&i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(energy.len());
            let mass: f64 = energy[lo..hi].iter().sum();
            if mass > 0.0 {
                let centroid: f64 = energy[lo..hi]
                    .iter()
                    .enumerate()
                    .map(|(j, e)| (lo + j) as f64 * e)
                    .sum::<f64>()
                    / mass;
                centroid / fs
            } else {
                i as f64 / fs
            }
        })
        .collect();

    Ok(BeatDetection {
        beat_times_s,
        estimated_hr_bpm: 60.0 / period_s,
        method_confidence: confidence,
    })
}

fn centered_moving_average(x: &[f64], half: usize) -> Vec<f64> {
    // Prefix sums make the sliding window O(1) per sample.
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    for &v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const FS: f64 = 4000.0;

    /// Periodic tone bursts: the cleanest stand-in for S1 transients.
    fn burst_train(bpm: f64, duration_s: f64, noise_sd: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = (duration_s * FS) as usize;
        let mut x = vec![0.0; n];
        let period = 60.0 / bpm;
        let burst_len = (0.020 * FS) as usize; // 20 ms
        let mut centers = Vec::new();
        let mut t = 0.1;
        while t + 0.02 < duration_s {
            let start = (t * FS) as usize;
            for i in 0..burst_len {
                let phase = i as f64 / burst_len as f64;
                let hann = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * phase).cos();
                x[start + i] +=
                    hann * (2.0 * std::f64::consts::PI * 80.0 * i as f64 / FS).sin();
            }
            centers.push(t + 0.010); // burst midpoint
            t += period;
        }
        for v in x.iter_mut() {
            *v += noise_sd * rng.gen_range(-1.7320508f64..1.7320508);
        }
        (x, centers)
    }

    #[test]
    fn clean_burst_train_at_120_bpm_is_found_within_10_ms() {
        let (x, truth) = burst_train(120.0, 15.0, 0.0, 1);
        let det = detect_beats(&x, FS, 12).unwrap();
        assert!((det.estimated_hr_bpm - 120.0).abs() < 6.0, "hr {}", det.estimated_hr_bpm);
        assert!(det.beat_times_s.len() >= truth.len() - 1);
        for bt in &det.beat_times_s {
            let nearest = truth
                .iter()
                .map(|t| (t - bt).abs())
                .fold(f64::MAX, f64::min);
            assert!(nearest < 0.010, "beat at {bt:.4} is {nearest:.4} s from truth");
        }
    }

    #[test]
    fn noisy_burst_train_keeps_90_percent_within_20_ms() {
        // Noise at roughly 10 dB below the burst energy.
        let (x, truth) = burst_train(120.0, 15.0, 0.035, 2);
        let det = detect_beats(&x, FS, 12).unwrap();
        let close = det
            .beat_times_s
            .iter()
            .filter(|bt| {
                truth
                    .iter()
                    .map(|t| (*t - **bt).abs())
                    .fold(f64::MAX, f64::min)
                    < 0.020
            })
            .count();
        let frac = close as f64 / det.beat_times_s.len() as f64;
        assert!(frac >= 0.9, "only {frac:.2} of beats within 20 ms");
    }

    #[test]
    fn silence_gives_no_beats() {
        assert!(matches!(
            detect_beats(&vec![0.0; 12_000], FS, 12),
            Err(BeatError::NoBeatsDetected)
        ));
    }

    #[test]
    fn short_signal_is_rejected() {
        assert!(matches!(
            detect_beats(&vec![0.1; 4000], FS, 12),
            Err(BeatError::SignalTooShort { .. })
        ));
    }

    #[test]
    fn beat_times_are_strictly_increasing_and_in_range() {
        let (x, _) = burst_train(90.0, 15.0, 0.01, 3);
        let det = detect_beats(&x, FS, 60).unwrap();
        for w in det.beat_times_s.windows(2) {
            assert!(w[1] > w[0]);
        }
        let dur = x.len() as f64 / FS;
        assert!(det.beat_times_s.iter().all(|&t| t >= 0.0 && t <= dur));
        assert!((0.0..=1.0).contains(&det.method_confidence));
    }

    #[test]
    fn age_bands_choose_the_right_prior() {
        assert_eq!(hr_prior_bpm(6), (100.0, 180.0));
        assert_eq!(hr_prior_bpm(24), (100.0, 180.0));
        assert_eq!(hr_prior_bpm(25), (70.0, 140.0));
        assert_eq!(hr_prior_bpm(144), (70.0, 140.0));
        assert_eq!(hr_prior_bpm(145), (60.0, 120.0));
    }

    #[test]
    fn period_search_respects_the_age_prior() {
        // 70 bpm bursts, but an infant prior (100-180 bpm): the detector
        // must not report a rate outside its prior band.
        let (x, _) = burst_train(70.0, 15.0, 0.0, 4);
        if let Ok(det) = detect_beats(&x, FS, 6) {
            assert!(det.estimated_hr_bpm >= 99.0 && det.estimated_hr_bpm <= 181.0);
        }
    }
}
