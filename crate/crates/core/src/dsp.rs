//! Small spectral helpers shared by the segmenter and the feature bank.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Zero-padded power spectrum |X(k)|^2 for k in 0..=nfft/2.
pub struct PowerSpectrum {
    nfft: usize,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
}

impl PowerSpectrum {
    pub fn new(nfft: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(nfft);
        Self {
            nfft,
            fft,
            buf: vec![Complex64::default(); nfft],
        }
    }

    pub fn nfft(&self) -> usize {
        self.nfft
    }

    pub fn num_bins(&self) -> usize {
        self.nfft / 2 + 1
    }

    /// Writes the one-sided power spectrum of `x` (truncated to nfft) into `out`.
    pub fn compute_into(&mut self, x: &[f64], out: &mut [f64]) {
        for (i, b) in self.buf.iter_mut().enumerate() {
            *b = Complex64::new(x.get(i).copied().unwrap_or(0.0), 0.0);
        }
        self.fft.process(&mut self.buf);
        for (o, b) in out.iter_mut().zip(&self.buf) {
            *o = b.norm_sqr();
        }
    }

    pub fn compute(&mut self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_bins()];
        self.compute_into(x, &mut out);
        out
    }

    /// Full two-sided power spectrum, all nfft bins.
    pub fn compute_full(&mut self, x: &[f64]) -> Vec<f64> {
        for (i, b) in self.buf.iter_mut().enumerate() {
            *b = Complex64::new(x.get(i).copied().unwrap_or(0.0), 0.0);
        }
        self.fft.process(&mut self.buf);
        self.buf.iter().map(|b| b.norm_sqr()).collect()
    }
}

/// Orthonormal DCT-II: c_k = s_k * sum_i x_i cos(pi k (2i+1) / 2N),
/// s_0 = sqrt(1/N), s_k = sqrt(2/N).
pub fn dct2_orthonormal(x: &[f64], num_coeffs: usize) -> Vec<f64> {
    let n = x.len() as f64;
    (0..num_coeffs)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / n).sqrt()
            } else {
                (2.0 / n).sqrt()
            };
            scale * dct2_term(x, k)
        })
        .collect()
}

/// Unnormalized cosine transform L_j = sum_{i=1..B} X_i cos(j (i - 1/2) pi / B).
pub fn dct2_unnormalized(x: &[f64], num_coeffs: usize) -> Vec<f64> {
    (0..num_coeffs).map(|j| dct2_term(x, j)).collect()
}

fn dct2_term(x: &[f64], k: usize) -> f64 {
    let b = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| v * (k as f64 * (i as f64 + 0.5) * std::f64::consts::PI / b).cos())
        .sum()
}

pub fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dct_of_constant() {
        let x = vec![2.5; 40];
        let l = dct2_unnormalized(&x, 40);
        assert!((l[0] - 100.0).abs() < 1e-12);
        assert!(l[1..].iter().all(|v| v.abs() < 1e-12));
        let m = dct2_orthonormal(&x, 40);
        assert!((m[0] - 2.5 * 40f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn impulse_spectrum_is_flat() {
        let mut ps = PowerSpectrum::new(64);
        let mut x = vec![0.0; 64];
        x[0] = 1.0;
        assert!(ps.compute(&x).iter().all(|&p| (p - 1.0).abs() < 1e-12));
    }
}
