//! Per-syllable frequency-domain features: spectral energy and LPC formants.

use nalgebra::DMatrix;

use crate::audio::Window;
use crate::dsp::{next_pow2, PowerSpectrum};
use crate::error::{Error, Result};

pub const SPECTRAL_EPS: f64 = 1e-10;
pub const LPC_ORDER: usize = 18;
pub const PRE_EMPHASIS: f64 = 0.97;
pub const MAX_FORMANT_BANDWIDTH_HZ: f64 = 400.0;

/// |X(f)|^2 over all bins of the zero-padded transform, and ln(sum + eps).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEnergy {
    pub nfft: usize,
    pub per_bin: Vec<f64>,
    pub log_total: f64,
}

impl SpectralEnergy {
    /// Frequency of bin `k` for the given sample rate.
    pub fn bin_hz(&self, k: usize, sample_rate: u32) -> f64 {
        k as f64 * sample_rate as f64 / self.nfft as f64
    }
}

pub fn spectral_energy(samples: &[f64]) -> Result<SpectralEnergy> {
    if samples.len() < 2 {
        return Err(Error::SegmentTooShort {
            samples: samples.len(),
            needed: 2,
        });
    }
    let nfft = next_pow2(samples.len());
    let per_bin = PowerSpectrum::new(nfft).compute_full(samples);
    let log_total = (per_bin.iter().sum::<f64>() + SPECTRAL_EPS).ln();
    Ok(SpectralEnergy {
        nfft,
        per_bin,
        log_total,
    })
}

/// Biased autocorrelation r[0..=order].
pub fn autocorrelation(x: &[f64], order: usize) -> Vec<f64> {
    (0..=order)
        .map(|lag| {
            x.iter()
                .zip(&x[lag.min(x.len())..])
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}

/// Levinson-Durbin recursion. Returns the prediction polynomial
/// [1, a1, .., ap] of A(z) = 1 + sum a_k z^-k and the final error power.
pub fn levinson_durbin(r: &[f64], order: usize) -> Result<(Vec<f64>, f64)> {
    let mut a = vec![0.0; order + 1];
    a[0] = 1.0;
    let mut err = r[0];
    if err <= 0.0 {
        // silent input: the trivial predictor
        return Ok((a, 0.0));
    }
    for i in 1..=order {
        let acc: f64 = (1..i).map(|j| a[j] * r[i - j]).sum::<f64>() + r[i];
        let k = -acc / err;
        if !k.is_finite() {
            return Err(Error::UnstableLpc(i));
        }
        let prev = a.clone();
        for j in 1..i {
            a[j] = prev[j] + k * prev[i - j];
        }
        a[i] = k;
        err *= 1.0 - k * k;
        if err <= 0.0 {
            break;
        }
    }
    Ok((a, err))
}

/// Complex roots of the monic polynomial z^p + c1 z^(p-1) + ... + cp, as (re, im).
pub fn polynomial_roots(coeffs: &[f64]) -> Vec<(f64, f64)> {
    let p = coeffs.len() - 1;
    if p == 0 {
        return Vec::new();
    }
    let mut companion = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        companion[(0, j)] = -coeffs[j + 1] / coeffs[0];
    }
    for i in 1..p {
        companion[(i, i - 1)] = 1.0;
    }
    companion
        .complex_eigenvalues()
        .iter()
        .map(|c| (c.re, c.im))
        .collect()
}

/// F1..F4 in Hz from LPC roots; unresolved slots are 0.
pub fn formants(samples: &[f64], sample_rate: u32) -> Result<[f64; 4]> {
    let needed = 2 * LPC_ORDER;
    if samples.len() < needed {
        return Err(Error::SegmentTooShort {
            samples: samples.len(),
            needed,
        });
    }
    let w = Window::Hamming.weights(samples.len());
    let emphasized: Vec<f64> = (0..samples.len())
        .map(|n| {
            let prev = if n == 0 { 0.0 } else { samples[n - 1] };
            (samples[n] - PRE_EMPHASIS * prev) * w[n]
        })
        .collect();
    let r = autocorrelation(&emphasized, LPC_ORDER);
    let (a, _) = levinson_durbin(&r, LPC_ORDER)?;
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::UnstableLpc(LPC_ORDER));
    }
    let sr = sample_rate as f64;
    let mut freqs: Vec<f64> = polynomial_roots(&a)
        .into_iter()
        .filter(|&(_, im)| im > 0.0)
        .filter_map(|(re, im)| {
            let radius = (re * re + im * im).sqrt();
            let bandwidth = -(sr / std::f64::consts::PI) * radius.ln();
            let freq = im.atan2(re) * sr / (2.0 * std::f64::consts::PI);
            (bandwidth < MAX_FORMANT_BANDWIDTH_HZ && freq > 0.0).then_some(freq)
        })
        .collect();
    freqs.sort_by(|a, b| a.total_cmp(b));
    let mut out = [0.0; 4];
    for (o, f) in out.iter_mut().zip(freqs) {
        *o = f;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const SR: u32 = 16_000;

    #[test]
    fn parseval_exact_length() {
        let x: Vec<f64> = (0..1024)
            .map(|n| (n as f64 * 0.37).sin() + 0.2 * (n as f64 * 1.9).cos())
            .collect();
        let se = spectral_energy(&x).unwrap();
        assert_eq!(se.nfft, 1024);
        let time: f64 = x.iter().map(|v| v * v).sum();
        let freq: f64 = se.per_bin.iter().sum::<f64>() / se.nfft as f64;
        assert!((time - freq).abs() / time < 1e-9);
    }

    #[test]
    fn sine_peak_bin() {
        let x: Vec<f64> = (0..1000)
            .map(|n| (2.0 * std::f64::consts::PI * 1000.0 * n as f64 / 16000.0).sin())
            .collect();
        let se = spectral_energy(&x).unwrap();
        let half = &se.per_bin[..=se.nfft / 2];
        let k = (0..half.len())
            .max_by(|&a, &b| half[a].total_cmp(&half[b]))
            .unwrap();
        let width = SR as f64 / se.nfft as f64;
        assert!((se.bin_hz(k, SR) - 1000.0).abs() <= width);
    }

    #[test]
    fn zero_segment() {
        let se = spectral_energy(&[0.0; 64]).unwrap();
        assert!(se.per_bin.iter().all(|&p| p == 0.0));
        assert_eq!(se.log_total, SPECTRAL_EPS.ln());
        assert!(spectral_energy(&[1.0]).is_err());
    }

    #[test]
    fn levinson_recovers_ar2() {
        // x[n] = 1.2 x[n-1] - 0.5 x[n-2] + e[n]
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut x = vec![0.0; 50_000];
        for n in 2..x.len() {
            x[n] = 1.2 * x[n - 1] - 0.5 * x[n - 2] + normal.sample(&mut rng);
        }
        let (a, _) = levinson_durbin(&autocorrelation(&x, 2), 2).unwrap();
        assert!(
            (a[1] + 1.2).abs() < 0.02 && (a[2] - 0.5).abs() < 0.02,
            "{a:?}"
        );
    }

    #[test]
    fn roots_of_known_polynomial() {
        // (z - 1)(z - 2) = z^2 - 3z + 2
        let mut r = polynomial_roots(&[1.0, -3.0, 2.0]);
        r.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!((r[0].0 - 1.0).abs() < 1e-9 && (r[1].0 - 2.0).abs() < 1e-9);
    }

    fn resonator(freqs: &[f64], radius: f64, n: usize, seed: u64) -> Vec<f64> {
        // cascade of two-pole sections driven by white noise
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut x: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        for &f in freqs {
            let theta = 2.0 * std::f64::consts::PI * f / SR as f64;
            let (a1, a2) = (2.0 * radius * theta.cos(), -radius * radius);
            let mut y = vec![0.0; n];
            for i in 0..n {
                let y1 = if i >= 1 { y[i - 1] } else { 0.0 };
                let y2 = if i >= 2 { y[i - 2] } else { 0.0 };
                y[i] = x[i] + a1 * y1 + a2 * y2;
            }
            x = y;
        }
        x
    }

    #[test]
    fn two_resonances_recovered() {
        let x = resonator(&[800.0, 2400.0], 0.98, 4000, 11);
        let f = formants(&x, SR).unwrap();
        assert!((f[0] - 800.0).abs() < 80.0, "{f:?}");
        assert!((f[1] - 2400.0).abs() < 240.0, "{f:?}");
    }

    #[test]
    fn sorted_and_sentinel() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let noise: Vec<f64> = (0..2000).map(|_| normal.sample(&mut rng)).collect();
        let f = formants(&noise, SR).unwrap();
        let resolved: Vec<f64> = f.iter().copied().take_while(|&v| v > 0.0).collect();
        assert!(resolved.windows(2).all(|w| w[0] < w[1]));
        assert!(f[resolved.len()..].iter().all(|&v| v == 0.0));
        assert!(resolved.len() < 4, "{f:?}");
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            formants(&[0.1; 10], SR),
            Err(Error::SegmentTooShort { .. })
        ));
    }

    #[test]
    fn scale_invariant() {
        let x = resonator(&[800.0, 2400.0], 0.98, 3000, 4);
        let y: Vec<f64> = x.iter().map(|v| v * 0.01).collect();
        let (a, b) = (formants(&x, SR).unwrap(), formants(&y, SR).unwrap());
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() <= 1e-6 * p.abs().max(1.0));
        }
    }
}
