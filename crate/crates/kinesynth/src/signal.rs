//! Frequency-domain utilities: real FFT, magnitude spectra, the zero-phase
//! Butterworth post-filter, and the high-frequency power diagnostic.

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use num_complex::Complex64;
use std::f64::consts::PI;

/// One-sided magnitude spectrum of a real signal.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Bin centre frequencies in Hz: `k * sample_rate / N` for `k` in `0..=N/2`.
    pub bin_freqs: Vec<f64>,
    /// `|X_k|` per bin, non-negative.
    pub magnitudes: Vec<f64>,
    pub sample_rate: f64,
}

/// In-place iterative radix-2 decimation-in-time FFT (forward convention
/// `X_k = sum_t x_t e^{-2 pi i k t / N}`). Length must be a power of two.
fn fft_in_place(data: &mut [Complex64]) {
    let n = data.len();
    debug_assert!(n.is_power_of_two());
    // Bit-reversal permutation.
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            data.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = -2.0 * PI / len as f64;
        let wlen = Complex64::new(ang.cos(), ang.sin());
        for start in (0..n).step_by(len) {
            let mut w = Complex64::new(1.0, 0.0);
            for k in 0..len / 2 {
                let u = data[start + k];
                let v = data[start + k + len / 2] * w;
                data[start + k] = u + v;
                data[start + k + len / 2] = u - v;
                w *= wlen;
            }
        }
        len <<= 1;
    }
}

/// One-sided DFT of `x` zero-padded to `n` (a power of two): bins `0..=n/2`.
pub fn fft_real(x: &[f64], n: usize) -> Result<Vec<Complex64>> {
    if x.is_empty() {
        return Err(Error::param("x", "fft of empty input".to_string()));
    }
    if !n.is_power_of_two() {
        return Err(Error::param("n", format!("FFT length must be a power of two, got {n}")));
    }
    if n < x.len() {
        return Err(Error::param("n", format!("FFT length {n} shorter than signal {}", x.len())));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (slot, &v) in buf.iter_mut().zip(x) {
        slot.re = v;
    }
    fft_in_place(&mut buf);
    Ok(buf[..=n / 2].to_vec())
}

/// Reverse pass of [`fft_real`]: given dL/d(bins) as complex values
/// (`re` = dL/dRe, `im` = dL/dIm), returns dL/dx for the first `out_len`
/// samples. The DFT is linear, so this is the conjugate-transposed
/// transform, evaluated with one forward FFT.
pub fn fft_real_adjoint(grad_bins: &[Complex64], n: usize, out_len: usize) -> Result<Vec<f64>> {
    if !n.is_power_of_two() || grad_bins.len() != n / 2 + 1 {
        return Err(Error::param(
            "grad_bins",
            format!("expected {} one-sided bins for length {n}", n / 2 + 1),
        ));
    }
    if out_len > n {
        return Err(Error::param("out_len", format!("{out_len} exceeds FFT length {n}")));
    }
    // dL/dx_t = sum_{k=0..n/2} Re(G_k e^{+i 2 pi k t / n})
    //         = Re(conj(FFT(conj(H)))_t) with H the one-sided grads zero-extended.
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (slot, g) in buf.iter_mut().zip(grad_bins) {
        *slot = g.conj();
    }
    fft_in_place(&mut buf);
    Ok(buf[..out_len].iter().map(|c| c.re).collect())
}

/// Smallest power of two >= `len` (e.g. 300 -> 512).
pub fn padded_len(len: usize) -> usize {
    len.next_power_of_two()
}

/// One-sided magnitude spectrum with bin frequencies, zero-padding to the
/// next power of two.
pub fn magnitude_spectrum(x: &[f64], sample_rate: f64) -> Result<Spectrum> {
    let n = padded_len(x.len());
    let bins = fft_real(x, n)?;
    Ok(Spectrum {
        bin_freqs: (0..=n / 2).map(|k| k as f64 * sample_rate / n as f64).collect(),
        magnitudes: bins.iter().map(|c| c.norm()).collect(),
        sample_rate,
    })
}

/// Second-order digital Butterworth lowpass coefficients.
///
/// Derived from the analog prototype `H(s) = 1 / (s^2 + sqrt(2) s + 1)` by
/// the bilinear transform with cutoff prewarping `K = tan(pi fc / fs)`:
///
/// ```text
/// norm = 1 / (1 + K/Q + K^2),  Q = 1/sqrt(2)
/// b0 = K^2 norm    b1 = 2 b0    b2 = b0
/// a1 = 2 (K^2 - 1) norm
/// a2 = (1 - K/Q + K^2) norm
/// ```
#[derive(Debug, Clone, Copy)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    pub fn butterworth_lowpass(cutoff_hz: f64, sample_rate: f64) -> Result<Self> {
        if !(cutoff_hz > 0.0) || cutoff_hz >= sample_rate / 2.0 {
            return Err(Error::param(
                "cutoff",
                format!("cutoff {cutoff_hz} Hz must lie in (0, Nyquist {} Hz)", sample_rate / 2.0),
            ));
        }
        let k = (PI * cutoff_hz / sample_rate).tan();
        let q = std::f64::consts::FRAC_1_SQRT_2;
        let norm = 1.0 / (1.0 + k / q + k * k);
        Ok(Self {
            b0: k * k * norm,
            b1: 2.0 * k * k * norm,
            b2: k * k * norm,
            a1: 2.0 * (k * k - 1.0) * norm,
            a2: (1.0 - k / q + k * k) * norm,
        })
    }

    /// `|H(e^{j 2 pi f / fs})|` for one pass of this filter.
    pub fn magnitude_at(&self, freq_hz: f64, sample_rate: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / sample_rate;
        let z1 = Complex64::new(w.cos(), -w.sin());
        let z2 = z1 * z1;
        let num = Complex64::new(self.b0, 0.0) + z1 * self.b1 + z2 * self.b2;
        let den = Complex64::new(1.0, 0.0) + z1 * self.a1 + z2 * self.a2;
        (num / den).norm()
    }

    /// Direct-form II transposed single pass, starting from the steady state
    /// for a constant input equal to `x0` (suppresses start-up transients).
    fn run(&self, x: &[f64], x0: f64) -> Vec<f64> {
        // Steady state for constant input c: z1 = (g - b0) c, z2 = (b2 - a2 g) c
        // with g the DC gain.
        let g = (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2);
        let mut z1 = (g - self.b0) * x0;
        let mut z2 = (self.b2 - self.a2 * g) * x0;
        let mut out = Vec::with_capacity(x.len());
        for &xi in x {
            let y = self.b0 * xi + z1;
            z1 = self.b1 * xi - self.a1 * y + z2;
            z2 = self.b2 * xi - self.a2 * y;
            out.push(y);
        }
        out
    }
}

/// Edge padding length for the zero-phase pass: three times the filter order.
const PAD_FACTOR: usize = 3;
const FILTER_ORDER: usize = 2;

/// Zero-phase filtering of one channel: constant-pad both ends, run the
/// biquad forward, reverse, run it again, reverse, trim. The net magnitude
/// response is the square of the single-pass response with zero phase.
pub fn filtfilt(coeffs: &Biquad, x: &[f64]) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let pad = PAD_FACTOR * FILTER_ORDER;
    let mut padded = Vec::with_capacity(x.len() + 2 * pad);
    padded.extend(std::iter::repeat(x[0]).take(pad));
    padded.extend_from_slice(x);
    padded.extend(std::iter::repeat(*x.last().unwrap()).take(pad));

    let mut y = coeffs.run(&padded, padded[0]);
    y.reverse();
    let mut y = coeffs.run(&y, y[0]);
    y.reverse();
    y[pad..pad + x.len()].to_vec()
}

/// Apply the zero-phase Butterworth lowpass to each channel of a
/// `[C x T]` trial matrix.
pub fn lowpass_filter(trial: &Tensor, sample_rate: f64, cutoff_hz: f64) -> Result<Tensor> {
    if trial.rank() != 2 {
        return Err(Error::dim("lowpass", format!("expected [C x T], got {:?}", trial.shape())));
    }
    let coeffs = Biquad::butterworth_lowpass(cutoff_hz, sample_rate)?;
    let t = trial.dim(1);
    let mut out = Vec::with_capacity(trial.len());
    for ch in trial.data().chunks(t) {
        out.extend(filtfilt(&coeffs, ch));
    }
    Tensor::from_vec(trial.shape(), out)
}

/// Fraction of spectral power (summed over channels, DC bin excluded) in
/// bins strictly above `cutoff_hz`. Returns 0 for an all-zero input.
pub fn high_frequency_power_ratio(trial: &Tensor, sample_rate: f64, cutoff_hz: f64) -> Result<f64> {
    if trial.rank() != 2 {
        return Err(Error::dim("hf_power", format!("expected [C x T], got {:?}", trial.shape())));
    }
    let t = trial.dim(1);
    let mut total = 0.0;
    let mut above = 0.0;
    for ch in trial.data().chunks(t) {
        let spec = magnitude_spectrum(ch, sample_rate)?;
        for (k, (&f, &m)) in spec.bin_freqs.iter().zip(&spec.magnitudes).enumerate() {
            if k == 0 {
                continue;
            }
            let p = m * m;
            total += p;
            if f > cutoff_hz {
                above += p;
            }
        }
    }
    if total == 0.0 {
        return Ok(0.0);
    }
    Ok(above / total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * freq * i as f64 / fs).sin()).collect()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn fft_of_zeros_is_zero() {
        let bins = fft_real(&[0.0; 300], 512).unwrap();
        assert_eq!(bins.len(), 257);
        assert!(bins.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn fft_of_unit_impulse_is_flat() {
        let mut x = vec![0.0; 8];
        x[0] = 1.0;
        let bins = fft_real(&x, 8).unwrap();
        assert_eq!(bins.len(), 5);
        for c in bins {
            assert!((c.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fft_rejects_empty_and_bad_lengths() {
        assert!(fft_real(&[], 8).is_err());
        assert!(fft_real(&[1.0; 4], 6).is_err());
        assert!(fft_real(&[1.0; 16], 8).is_err());
    }

    #[test]
    fn padded_len_matches_design() {
        assert_eq!(padded_len(300), 512);
        assert_eq!(padded_len(512), 512);
        assert_eq!(padded_len(1), 1);
    }

    #[test]
    fn constant_signal_unchanged_by_lowpass() {
        let coeffs = Biquad::butterworth_lowpass(2.0, 60.0).unwrap();
        let x = vec![3.25; 300];
        let y = filtfilt(&coeffs, &x);
        for (&a, &b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn filtering_preserves_length() {
        let coeffs = Biquad::butterworth_lowpass(2.0, 60.0).unwrap();
        for n in [1, 2, 7, 300] {
            let x = sine(1.0, 60.0, n);
            assert_eq!(filtfilt(&coeffs, &x).len(), n);
        }
    }

    #[test]
    fn cutoff_at_nyquist_rejected() {
        assert!(Biquad::butterworth_lowpass(30.0, 60.0).is_err());
        assert!(lowpass_filter(&Tensor::zeros(&[1, 10]), 60.0, 31.0).is_err());
    }

    #[test]
    fn lowpass_idempotent_for_band_limited_input() {
        let x = Tensor::from_vec(&[1, 300], sine(0.5, 60.0, 300)).unwrap();
        let once = lowpass_filter(&x, 60.0, 2.0).unwrap();
        let twice = lowpass_filter(&once, 60.0, 2.0).unwrap();
        let r1 = rms(once.data());
        let r2 = rms(twice.data());
        assert!((r1 - r2).abs() / r1 < 0.01, "rms changed {r1} -> {r2}");
    }

    #[test]
    fn hf_ratio_conventions() {
        let fs = 60.0;
        let low = Tensor::from_vec(&[1, 300], sine(1.0, fs, 300)).unwrap();
        let high = Tensor::from_vec(&[1, 300], sine(10.0, fs, 300)).unwrap();
        assert!(high_frequency_power_ratio(&low, fs, 2.0).unwrap() < 0.02);
        assert!(high_frequency_power_ratio(&high, fs, 2.0).unwrap() > 0.98);
        let zeros = Tensor::zeros(&[9, 300]);
        assert_eq!(high_frequency_power_ratio(&zeros, fs, 2.0).unwrap(), 0.0);
    }
}
