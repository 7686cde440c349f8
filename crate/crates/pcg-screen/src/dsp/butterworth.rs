//! Butterworth band-pass design and cascade filtering.
//!
//! The design route is the classical one: analog low-pass prototype poles,
//! low-pass-to-band-pass transform, then the bilinear transform with
//! prewarping at *both* band edges. Prewarping makes the digital response
//! hit exactly -3.01 dB at the requested edges; the cascade is normalized
//! to unit gain at the geometric mean of the edges. An order-2N band-pass
//! comes out as N second-order sections ("4th order" means two biquads).

use rustfft::num_complex::Complex64;

#[derive(Debug, thiserror::Error)]
pub enum DesignError {
    #[error("band-pass order must be even and at least 2 (got {0})")]
    InvalidOrder(usize),
    #[error("invalid band: need 0 < low < high < fs/2 (got low={low}, high={high}, fs={fs})")]
    InvalidBand { low: f64, high: f64, fs: f64 },
    #[error("design produced a pole on or outside the unit circle (|p| = {radius})")]
    UnstableDesign { radius: f64 },
    #[error("cannot filter an empty signal")]
    EmptySignal,
}

/// One second-order section, coefficients normalized so a0 = 1.
///
/// Transfer function: (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    pub fn response_at(&self, omega: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -omega); // z^-1
        let z2 = z1 * z1;
        (self.b0 + self.b1 * z1 + self.b2 * z2) / (1.0 + self.a1 * z1 + self.a2 * z2)
    }

    /// Largest pole magnitude of this section.
    pub fn max_pole_radius(&self) -> f64 {
        // Roots of z^2 + a1 z + a2.
        let disc = self.a1 * self.a1 - 4.0 * self.a2;
        if disc >= 0.0 {
            let r = disc.sqrt();
            let p1 = (-self.a1 + r) / 2.0;
            let p2 = (-self.a1 - r) / 2.0;
            p1.abs().max(p2.abs())
        } else {
            // Conjugate pair: |p|^2 = a2.
            self.a2.sqrt()
        }
    }
}

/// A designed band-pass filter: biquad cascade plus the design parameters
/// it was built from.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct BandpassFilter {
    pub sections: Vec<Biquad>,
    pub order: usize,
    pub low_hz: f64,
    pub high_hz: f64,
    pub sample_rate_hz: f64,
}

impl BandpassFilter {
    pub fn response_at_hz(&self, freq_hz: f64) -> Complex64 {
        let omega = 2.0 * std::f64::consts::PI * freq_hz / self.sample_rate_hz;
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response_at(omega))
    }

    pub fn magnitude_db_at_hz(&self, freq_hz: f64) -> f64 {
        20.0 * self.response_at_hz(freq_hz).norm().log10()
    }
}

/// Design an order-`order` Butterworth band-pass (so `order / 2` biquads).
pub fn design_butterworth_bandpass(
    order: usize,
    low_hz: f64,
    high_hz: f64,
    sample_rate_hz: f64,
) -> Result<BandpassFilter, DesignError> {
    if order < 2 || order % 2 != 0 {
        return Err(DesignError::InvalidOrder(order));
    }
    let fs = sample_rate_hz;
    if !(low_hz > 0.0 && low_hz < high_hz && high_hz < fs / 2.0) {
        return Err(DesignError::InvalidBand { low: low_hz, high: high_hz, fs });
    }

    let np = order / 2; // analog low-pass prototype order
    let pi = std::f64::consts::PI;

    // Prewarp both edges so the bilinear transform lands them exactly.
    let wl = 2.0 * fs * (pi * low_hz / fs).tan();
    let wh = 2.0 * fs * (pi * high_hz / fs).tan();
    let w0_sq = wl * wh;
    let bw = wh - wl;

    // Low-pass-to-band-pass: each prototype pole p becomes the two roots of
    // s^2 - p*bw*s + w0^2 = 0. Conjugate prototype poles give conjugate root
    // sets, so building sections from upper-half-plane prototypes (plus the
    // real pole at -1 when the prototype order is odd) covers all of them.
    let mut analog_sections: Vec<(f64, f64)> = Vec::new(); // s^2 + alpha*s + beta
    for k in 0..np {
        let theta = pi * (2.0 * k as f64 + np as f64 + 1.0) / (2.0 * np as f64);
        let p = Complex64::from_polar(1.0, theta);
        if p.im > 1e-12 {
            let pb = p * bw;
            let sq = (pb * pb - 4.0 * w0_sq).sqrt();
            for root in [(pb + sq) / 2.0, (pb - sq) / 2.0] {
                // Pair the root with its conjugate: s^2 - 2 Re(q) s + |q|^2.
                analog_sections.push((-2.0 * root.re, root.norm_sqr()));
            }
        } else if p.im.abs() <= 1e-12 {
            // Real prototype pole: its two band-pass roots share one section.
            analog_sections.push((-p.re * bw, w0_sq));
        }
        // Lower-half-plane prototypes are covered by conjugation above.
    }
    debug_assert_eq!(analog_sections.len(), np);

    // Bilinear transform each section; numerator per section is bw * s.
    let k = 2.0 * fs;
    let mut sections = Vec::with_capacity(np);
    for (alpha, beta) in analog_sections {
        let a0 = k * k + alpha * k + beta;
        let gain = bw * k / a0;
        sections.push(Biquad {
            b0: gain,
            b1: 0.0,
            b2: -gain,
            a1: 2.0 * (beta - k * k) / a0,
            a2: (k * k - alpha * k + beta) / a0,
        });
    }

    for s in &sections {
        let radius = s.max_pole_radius();
        if radius >= 1.0 - 1e-9 {
            return Err(DesignError::UnstableDesign { radius });
        }
    }

    // Normalize each section to unit gain at the geometric-mean frequency;
    // the cascade then has exactly unit gain there.
    let f_center = (low_hz * high_hz).sqrt();
    let omega_c = 2.0 * pi * f_center / fs;
    for s in &mut sections {
        let mag = s.response_at(omega_c).norm();
        s.b0 /= mag;
        s.b2 /= mag;
    }

    Ok(BandpassFilter { sections, order, low_hz, high_hz, sample_rate_hz: fs })
}

/// Run the cascade over a signal: causal, single pass, zero initial state,
/// Direct Form II transposed per section.
pub fn filter_signal(filter: &BandpassFilter, signal: &[f64]) -> Result<Vec<f64>, DesignError> {
    if signal.is_empty() {
        return Err(DesignError::EmptySignal);
    }
    let mut out = signal.to_vec();
    for s in &filter.sections {
        let (mut s1, mut s2) = (0.0f64, 0.0f64);
        for x in out.iter_mut() {
            let input = *x;
            let y = s.b0 * input + s1;
            s1 = s.b1 * input - s.a1 * y + s2;
            s2 = s.b2 * input - s.a2 * y;
            *x = y;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = 4000.0;

    fn default_filter() -> BandpassFilter {
        design_butterworth_bandpass(4, 25.0, 400.0, FS).unwrap()
    }

    /// Reference impulse response straight from the transfer function: the
    /// section polynomials are multiplied out and the quotient series of
    /// B(z)/A(z) is produced by polynomial long division — no filter state
    /// machinery involved.
    fn impulse_response_by_long_division(filter: &BandpassFilter, n: usize) -> Vec<f64> {
        // Multiply the section numerators/denominators into single polys.
        let mut b = vec![1.0f64];
        let mut a = vec![1.0f64];
        for s in &filter.sections {
            b = poly_mul(&b, &[s.b0, s.b1, s.b2]);
            a = poly_mul(&a, &[1.0, s.a1, s.a2]);
        }
        // h[n] = b[n] - sum_{k>=1} a[k] h[n-k]  (a[0] = 1).
        let mut h = vec![0.0f64; n];
        for i in 0..n {
            let mut v = if i < b.len() { b[i] } else { 0.0 };
            for k in 1..a.len().min(i + 1) {
                v -= a[k] * h[i - k];
            }
            h[i] = v;
        }
        h
    }

    fn poly_mul(x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len() + y.len() - 1];
        for (i, xi) in x.iter().enumerate() {
            for (j, yj) in y.iter().enumerate() {
                out[i + j] += xi * yj;
            }
        }
        out
    }

    /// Steady-state gain at `freq` measured by projecting the filtered
    /// sine onto quadrature components over whole periods, after dropping
    /// one second of transient.
    fn measured_gain_db(filter: &BandpassFilter, freq: f64) -> f64 {
        let n = (4.0 * FS) as usize;
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / FS).sin())
            .collect();
        let y = filter_signal(filter, &x).unwrap();
        let skip = FS as usize; // 1 s of transient
        let win = &y[skip..];
        let (mut ss, mut sc) = (0.0, 0.0);
        for (i, v) in win.iter().enumerate() {
            let t = (skip + i) as f64 / FS;
            let w = 2.0 * std::f64::consts::PI * freq * t;
            ss += v * w.sin();
            sc += v * w.cos();
        }
        let amp = 2.0 * (ss * ss + sc * sc).sqrt() / win.len() as f64;
        20.0 * amp.log10()
    }

    #[test]
    fn fourth_order_design_is_two_sections() {
        let f = default_filter();
        assert_eq!(f.sections.len(), 2);
    }

    #[test]
    fn all_poles_strictly_inside_unit_circle() {
        let f = default_filter();
        for s in &f.sections {
            assert!(s.max_pole_radius() < 1.0 - 1e-9, "radius {}", s.max_pole_radius());
        }
    }

    #[test]
    fn unit_gain_at_geometric_mean_frequency() {
        let f = default_filter();
        let mag = f.response_at_hz(100.0).norm();
        assert!((mag - 1.0).abs() < 1e-9, "|H(100 Hz)| = {mag}");
    }

    #[test]
    fn band_edges_sit_at_minus_3_db() {
        let f = default_filter();
        let half_power_db = -10.0 * 2.0f64.log10(); // -3.0103
        assert!((f.magnitude_db_at_hz(25.0) - half_power_db).abs() < 1e-6);
        assert!((f.magnitude_db_at_hz(400.0) - half_power_db).abs() < 1e-6);
    }

    #[test]
    fn dc_and_nyquist_are_exact_zeros() {
        let f = default_filter();
        assert!(f.response_at_hz(0.0).norm() < 1e-12);
        assert!(f.response_at_hz(FS / 2.0).norm() < 1e-12);
    }

    #[test]
    fn stopband_attenuation_beyond_40_db_well_outside_the_band() {
        let f = default_filter();
        assert!(f.magnitude_db_at_hz(2.0) < -40.0);
        assert!(f.magnitude_db_at_hz(1900.0) < -40.0);
    }

    #[test]
    fn sine_probe_gains_match_the_response() {
        let f = default_filter();
        for freq in [25.0, 100.0, 400.0] {
            let measured = measured_gain_db(&f, freq);
            let designed = f.magnitude_db_at_hz(freq);
            assert!(
                (measured - designed).abs() < 0.01,
                "{freq} Hz: measured {measured} dB vs designed {designed} dB"
            );
        }
    }

    #[test]
    fn dc_input_decays_below_1e6() {
        let f = default_filter();
        let y = filter_signal(&f, &vec![1.0; 4000]).unwrap();
        assert!(y[3000..].iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn impulse_response_matches_long_division_oracle() {
        let f = default_filter();
        let mut impulse = vec![0.0; 2000];
        impulse[0] = 1.0;
        let via_filter = filter_signal(&f, &impulse).unwrap();
        let via_division = impulse_response_by_long_division(&f, 2000);
        for (i, (a, b)) in via_filter.iter().zip(&via_division).enumerate() {
            assert!((a - b).abs() < 1e-9, "sample {i}: {a} vs {b}");
        }
    }

    #[test]
    fn filtering_is_linear() {
        let f = default_filter();
        let n = 1000;
        let x: Vec<f64> = (0..n).map(|i| ((i * 7919 % 1000) as f64 / 500.0) - 1.0).collect();
        let y: Vec<f64> = (0..n).map(|i| ((i * 104729 % 997) as f64 / 499.0) - 1.0).collect();
        let fx = filter_signal(&f, &x).unwrap();
        let fy = filter_signal(&f, &y).unwrap();
        let mix: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
        let fmix = filter_signal(&f, &mix).unwrap();
        for i in 0..n {
            let expect = 2.0 * fx[i] - 0.5 * fy[i];
            assert!((fmix[i] - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn invalid_designs_are_rejected() {
        assert!(matches!(
            design_butterworth_bandpass(3, 25.0, 400.0, FS),
            Err(DesignError::InvalidOrder(3))
        ));
        assert!(matches!(
            design_butterworth_bandpass(4, 400.0, 25.0, FS),
            Err(DesignError::InvalidBand { .. })
        ));
        assert!(matches!(
            design_butterworth_bandpass(4, 25.0, 2000.0, FS),
            Err(DesignError::InvalidBand { .. })
        ));
        assert!(matches!(
            design_butterworth_bandpass(4, 0.0, 400.0, FS),
            Err(DesignError::InvalidBand { .. })
        ));
    }

    #[test]
    fn empty_signal_is_rejected() {
        let f = default_filter();
        assert!(matches!(filter_signal(&f, &[]), Err(DesignError::EmptySignal)));
    }

    #[test]
    fn higher_even_orders_design_cleanly() {
        // Exercises the odd-prototype path (order 6 -> prototype order 3,
        // which has a real pole) and a higher-order case.
        for order in [2, 6, 8] {
            let f = design_butterworth_bandpass(order, 25.0, 400.0, FS).unwrap();
            assert_eq!(f.sections.len(), order / 2);
            assert!((f.response_at_hz(100.0).norm() - 1.0).abs() < 1e-9);
            // The geometric-mean normalization point sits a hair off the
            // analog peak; at order 2 that costs a few 1e-4 dB at the edges.
            let half_power_db = -10.0 * 2.0f64.log10();
            assert!((f.magnitude_db_at_hz(25.0) - half_power_db).abs() < 1e-3);
            assert!((f.magnitude_db_at_hz(400.0) - half_power_db).abs() < 1e-3);
            for s in &f.sections {
                assert!(s.max_pole_radius() < 1.0 - 1e-9);
            }
        }
    }
}
