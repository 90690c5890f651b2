//! Frequency-domain penalty steering the generator toward the real data's
//! spectral energy distribution.

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::signal::{fft_real, fft_real_adjoint, padded_len};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// How real and synthetic spectra are paired before the squared difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralMode {
    /// Compare the batch-mean magnitude spectrum per channel. Samples within
    /// a batch are unpaired, so raw per-sample complex differences would be
    /// dominated by phase mismatch; batch means compare the distributions.
    BatchMean,
    /// Pair samples by batch index and average per-sample magnitude
    /// differences. Provided for comparison experiments.
    PerSample,
}

/// Squared-difference spectral loss between equal-shaped `[B x C x T]`
/// batches, averaged over channels and bins, with the gradient with respect
/// to `fake`.
pub fn spectral_loss(real: &Tensor, fake: &Tensor, mode: SpectralMode) -> Result<(f64, Tensor)> {
    if real.shape() != fake.shape() {
        return Err(Error::dim(
            "spectral_loss",
            format!("real {:?} vs fake {:?}", real.shape(), fake.shape()),
        ));
    }
    if real.rank() != 3 {
        return Err(Error::dim("spectral_loss", format!("expected [B x C x T], got {:?}", real.shape())));
    }
    let (b, c, t) = (real.dim(0), real.dim(1), real.dim(2));
    let n = padded_len(t);
    let bins = n / 2 + 1;

    let spectra = |batch: &Tensor| -> Result<Vec<Vec<Complex64>>> {
        batch.data().chunks(t).map(|ch| fft_real(ch, n)).collect()
    };
    let real_spec = spectra(real)?;
    let fake_spec = spectra(fake)?;
    let mag = |s: &[Complex64]| -> Vec<f64> { s.iter().map(|z| z.norm()).collect() };

    let mut grad = Tensor::zeros(fake.shape());
    let mut loss = 0.0;
    match mode {
        SpectralMode::BatchMean => {
            // Per-channel mean magnitude over the batch, then squared diff.
            for ci in 0..c {
                let mut mean_real = vec![0.0; bins];
                let mut mean_fake = vec![0.0; bins];
                for bi in 0..b {
                    for (k, z) in real_spec[bi * c + ci].iter().enumerate() {
                        mean_real[k] += z.norm();
                    }
                    for (k, z) in fake_spec[bi * c + ci].iter().enumerate() {
                        mean_fake[k] += z.norm();
                    }
                }
                for v in mean_real.iter_mut().chain(mean_fake.iter_mut()) {
                    *v /= b as f64;
                }
                let denom = (c * bins) as f64;
                for k in 0..bins {
                    let diff = mean_fake[k] - mean_real[k];
                    loss += diff * diff / denom;
                }
                for bi in 0..b {
                    let spec = &fake_spec[bi * c + ci];
                    let mut gbins = vec![Complex64::new(0.0, 0.0); bins];
                    for k in 0..bins {
                        let norm = spec[k].norm();
                        if norm > 1e-300 {
                            let coeff = 2.0 * (mean_fake[k] - mean_real[k]) / (denom * b as f64);
                            gbins[k] = spec[k] / norm * coeff;
                        }
                    }
                    let gt = fft_real_adjoint(&gbins, n, t)?;
                    grad.data_mut()[(bi * c + ci) * t..(bi * c + ci + 1) * t].copy_from_slice(&gt);
                }
            }
        }
        SpectralMode::PerSample => {
            let denom = (b * c * bins) as f64;
            for bc in 0..b * c {
                let rs = mag(&real_spec[bc]);
                let fs = &fake_spec[bc];
                let mut gbins = vec![Complex64::new(0.0, 0.0); bins];
                for k in 0..bins {
                    let fnorm = fs[k].norm();
                    let diff = fnorm - rs[k];
                    loss += diff * diff / denom;
                    if fnorm > 1e-300 {
                        gbins[k] = fs[k] / fnorm * (2.0 * diff / denom);
                    }
                }
                let gt = fft_real_adjoint(&gbins, n, t)?;
                grad.data_mut()[bc * t..(bc + 1) * t].copy_from_slice(&gt);
            }
        }
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine_batch(freq: f64, phase: f64, b: usize, c: usize, t: usize) -> Tensor {
        let fs = crate::data::SAMPLE_RATE;
        let mut data = Vec::with_capacity(b * c * t);
        for bi in 0..b {
            for _ in 0..c {
                for i in 0..t {
                    data.push((std::f64::consts::TAU * freq * i as f64 / fs + phase + bi as f64 * 0.1).sin());
                }
            }
        }
        Tensor::from_vec(&[b, c, t], data).unwrap()
    }

    #[test]
    fn identical_batches_have_zero_loss() {
        let x = sine_batch(1.0, 0.0, 3, 2, 300);
        for mode in [SpectralMode::BatchMean, SpectralMode::PerSample] {
            let (loss, grad) = spectral_loss(&x, &x, mode).unwrap();
            assert_eq!(loss, 0.0);
            assert!(grad.data().iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn loss_is_symmetric() {
        let a = sine_batch(1.0, 0.0, 2, 2, 300);
        let b = sine_batch(3.0, 0.4, 2, 2, 300);
        let (lab, _) = spectral_loss(&a, &b, SpectralMode::BatchMean).unwrap();
        let (lba, _) = spectral_loss(&b, &a, SpectralMode::BatchMean).unwrap();
        assert!((lab - lba).abs() < 1e-15);
        assert!(lab > 0.0);
    }

    #[test]
    fn frequency_mismatch_costs_more_than_phase_mismatch() {
        let real = sine_batch(1.0, 0.0, 4, 1, 300);
        let fake_wrong_freq = sine_batch(5.0, 0.0, 4, 1, 300);
        let fake_wrong_phase = sine_batch(1.0, 1.3, 4, 1, 300);
        let (l_freq, _) = spectral_loss(&real, &fake_wrong_freq, SpectralMode::BatchMean).unwrap();
        let (l_phase, _) = spectral_loss(&real, &fake_wrong_phase, SpectralMode::BatchMean).unwrap();
        assert!(
            l_freq > l_phase,
            "5 Hz vs 1 Hz should cost more than a phase shift: {l_freq} vs {l_phase}"
        );
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = sine_batch(1.0, 0.0, 2, 2, 300);
        let b = sine_batch(1.0, 0.0, 3, 2, 300);
        assert!(spectral_loss(&a, &b, SpectralMode::BatchMean).is_err());
    }
}
