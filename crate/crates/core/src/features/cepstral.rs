//! Mel and linear cepstral coefficients.
//!
//! Both pipelines share framing, the power spectrum and the log floor; they
//! differ in filterbank spacing and in the cosine transform's normalization
//! (orthonormal DCT-II for MFCC, the unnormalized sum for LFCC).

use crate::audio::FrameSequence;
use crate::dsp::{dct2_orthonormal, dct2_unnormalized, PowerSpectrum};
use crate::error::{Error, Result};

pub const NUM_FILTERS: usize = 40;
pub const LOG_FLOOR: f64 = 1e-10;
pub const MEL_DIVISOR_DEFAULT: f64 = 100.0;
pub const MEL_DIVISOR_HTK: f64 = 700.0;

/// mel = 2595 log10(f / divisor + 1)
pub fn mel_scale(f: f64, divisor: f64) -> Result<f64> {
    if f < 0.0 {
        return Err(Error::NegativeFrequency(f));
    }
    Ok(2595.0 * (f / divisor + 1.0).log10())
}

pub fn mel_to_hz(mel: f64, divisor: f64) -> f64 {
    divisor * (10f64.powf(mel / 2595.0) - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterScale {
    Mel { divisor: f64 },
    Linear,
}

/// Row-major (num_filters x (nfft/2 + 1)) triangular filterbank.
#[derive(Debug, Clone, PartialEq)]
pub struct Filterbank {
    pub num_filters: usize,
    pub num_bins: usize,
    pub weights: Vec<f64>,
    /// Filter edge points in Hz: num_filters + 2 values.
    pub points_hz: Vec<f64>,
}

impl Filterbank {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.num_bins..(i + 1) * self.num_bins]
    }

    pub fn apply(&self, power: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.num_filters) {
            *o = self.row(i).iter().zip(power).map(|(w, p)| w * p).sum();
        }
    }
}

/// Triangular filters with centers equally spaced on `scale` between 0 and
/// sample_rate/2. Edge points are snapped to FFT bin frequencies when that
/// keeps them strictly increasing, so each triangle peaks at exactly 1.
pub fn triangular_filterbank(
    num_filters: usize,
    nfft: usize,
    sample_rate: u32,
    scale: FilterScale,
) -> Result<Filterbank> {
    if num_filters == 0 {
        return Err(Error::InvalidConfig("num_filters must be >= 1".into()));
    }
    if nfft < 64 || !nfft.is_power_of_two() {
        return Err(Error::InvalidConfig(format!(
            "nfft {nfft} must be a power of two >= 64"
        )));
    }
    let nyquist = sample_rate as f64 / 2.0;
    let (to_scale, from_scale): (Box<dyn Fn(f64) -> f64>, Box<dyn Fn(f64) -> f64>) = match scale {
        FilterScale::Linear => (Box::new(|f| f), Box::new(|m| m)),
        FilterScale::Mel { divisor } => (
            Box::new(move |f| 2595.0 * (f / divisor + 1.0).log10()),
            Box::new(move |m| mel_to_hz(m, divisor)),
        ),
    };
    let top = to_scale(nyquist);
    let raw: Vec<f64> = (0..num_filters + 2)
        .map(|k| from_scale(top * k as f64 / (num_filters + 1) as f64))
        .collect();
    let bin_hz = sample_rate as f64 / nfft as f64;
    let snapped: Vec<f64> = raw.iter().map(|f| (f / bin_hz).round() * bin_hz).collect();
    let points = if snapped.windows(2).all(|w| w[0] < w[1]) {
        snapped
    } else {
        raw
    };

    let num_bins = nfft / 2 + 1;
    let mut weights = vec![0.0; num_filters * num_bins];
    for m in 0..num_filters {
        let (lo, c, hi) = (points[m], points[m + 1], points[m + 2]);
        for b in 0..num_bins {
            let f = b as f64 * bin_hz;
            let w = if f >= lo && f <= c {
                (f - lo) / (c - lo)
            } else if f > c && f <= hi {
                (hi - f) / (hi - c)
            } else {
                0.0
            };
            weights[m * num_bins + b] = w;
        }
    }
    Ok(Filterbank {
        num_filters,
        num_bins,
        weights,
        points_hz: points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CepstralKind {
    Mfcc,
    Lfcc,
    Fused,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CepstralMatrix {
    pub kind: CepstralKind,
    pub num_frames: usize,
    pub num_coeffs: usize,
    pub data: Vec<f64>,
}

impl CepstralMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.num_coeffs..(i + 1) * self.num_coeffs]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.num_frames)
            .map(|i| self.data[i * self.num_coeffs + j])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CepstralConfig {
    pub nfft: usize,
    pub num_filters: usize,
    pub num_coeffs: usize,
    pub mel_divisor: f64,
}

impl Default for CepstralConfig {
    fn default() -> Self {
        Self {
            nfft: 512,
            num_filters: NUM_FILTERS,
            num_coeffs: NUM_FILTERS,
            mel_divisor: MEL_DIVISOR_DEFAULT,
        }
    }
}

/// Log filterbank energies ln(max(E, 1e-10)) of every frame.
pub fn log_filter_energies(
    frames: &FrameSequence,
    bank: &Filterbank,
    nfft: usize,
) -> Vec<Vec<f64>> {
    let mut ps = PowerSpectrum::new(nfft);
    let mut spec = vec![0.0; ps.num_bins()];
    let mut energies = vec![0.0; bank.num_filters];
    frames
        .iter()
        .map(|f| {
            ps.compute_into(f, &mut spec);
            bank.apply(&spec, &mut energies);
            energies.iter().map(|e| e.max(LOG_FLOOR).ln()).collect()
        })
        .collect()
}

fn cepstra(
    frames: &FrameSequence,
    cfg: &CepstralConfig,
    scale: FilterScale,
    kind: CepstralKind,
    transform: fn(&[f64], usize) -> Vec<f64>,
) -> Result<CepstralMatrix> {
    let bank = triangular_filterbank(cfg.num_filters, cfg.nfft, frames.sample_rate, scale)?;
    let data: Vec<f64> = log_filter_energies(frames, &bank, cfg.nfft)
        .iter()
        .flat_map(|x| transform(x, cfg.num_coeffs))
        .collect();
    Ok(CepstralMatrix {
        kind,
        num_frames: frames.num_frames,
        num_coeffs: cfg.num_coeffs,
        data,
    })
}

pub fn mfcc(frames: &FrameSequence, cfg: &CepstralConfig) -> Result<CepstralMatrix> {
    cepstra(
        frames,
        cfg,
        FilterScale::Mel {
            divisor: cfg.mel_divisor,
        },
        CepstralKind::Mfcc,
        dct2_orthonormal,
    )
}

pub fn lfcc(frames: &FrameSequence, cfg: &CepstralConfig) -> Result<CepstralMatrix> {
    cepstra(
        frames,
        cfg,
        FilterScale::Linear,
        CepstralKind::Lfcc,
        dct2_unnormalized,
    )
}

/// Row-wise concatenation, MFCC columns first.
pub fn fuse_cepstral(m: &CepstralMatrix, l: &CepstralMatrix) -> Result<CepstralMatrix> {
    if m.num_frames != l.num_frames {
        return Err(Error::FrameCountMismatch {
            left: m.num_frames,
            right: l.num_frames,
        });
    }
    let num_coeffs = m.num_coeffs + l.num_coeffs;
    let mut data = Vec::with_capacity(m.num_frames * num_coeffs);
    for i in 0..m.num_frames {
        data.extend_from_slice(m.row(i));
        data.extend_from_slice(l.row(i));
    }
    Ok(CepstralMatrix {
        kind: CepstralKind::Fused,
        num_frames: m.num_frames,
        num_coeffs,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{frame_samples, Window, SAMPLE_RATE};

    #[test]
    fn mel_examples() {
        assert_eq!(mel_scale(0.0, 100.0).unwrap(), 0.0);
        assert!((mel_scale(100.0, 100.0).unwrap() - 781.17).abs() < 0.01);
        assert!((mel_scale(700.0, 700.0).unwrap() - 781.17).abs() < 0.01);
        assert!(matches!(
            mel_scale(-1.0, 100.0),
            Err(Error::NegativeFrequency(_))
        ));
        let m = mel_scale(1234.0, 100.0).unwrap();
        assert!((mel_to_hz(m, 100.0) - 1234.0).abs() < 1e-9);
    }

    #[test]
    fn filterbank_shape_and_peaks() {
        let fb = triangular_filterbank(40, 512, SAMPLE_RATE, FilterScale::Linear).unwrap();
        assert_eq!(
            (fb.num_filters, fb.num_bins, fb.weights.len()),
            (40, 257, 40 * 257)
        );
        for i in 0..40 {
            let row = fb.row(i);
            let max = row.iter().copied().fold(f64::MIN, f64::max);
            assert_eq!(max, 1.0);
            assert_eq!(row.iter().filter(|&&w| w == 1.0).count(), 1, "row {i}");
        }
        let mel = triangular_filterbank(40, 512, SAMPLE_RATE, FilterScale::Mel { divisor: 100.0 })
            .unwrap();
        assert_eq!((mel.num_filters, mel.num_bins), (40, 257));
    }

    #[test]
    fn interior_bins_covered() {
        for scale in [
            FilterScale::Linear,
            FilterScale::Mel { divisor: 100.0 },
            FilterScale::Mel { divisor: 700.0 },
        ] {
            let fb = triangular_filterbank(40, 512, SAMPLE_RATE, scale).unwrap();
            let (first, last) = (fb.points_hz[1], fb.points_hz[40]);
            for b in 0..fb.num_bins {
                let f = b as f64 * 16000.0 / 512.0;
                if f > first && f < last {
                    let col: f64 = (0..40).map(|m| fb.row(m)[b]).sum();
                    assert!(col > 0.0, "{scale:?} bin {b}");
                }
            }
        }
    }

    #[test]
    fn bad_nfft_rejected() {
        assert!(triangular_filterbank(40, 100, SAMPLE_RATE, FilterScale::Linear).is_err());
        assert!(triangular_filterbank(0, 512, SAMPLE_RATE, FilterScale::Linear).is_err());
    }

    fn frames(x: &[f64]) -> FrameSequence {
        frame_samples(x, SAMPLE_RATE, 20.0, 10.0, Window::Hamming).unwrap()
    }

    #[test]
    fn silence_cepstra() {
        let f = frames(&vec![0.0; 3200]);
        let m = mfcc(&f, &CepstralConfig::default()).unwrap();
        assert_eq!((m.num_frames, m.num_coeffs), (f.num_frames, 40));
        let c0 = 40f64.sqrt() * LOG_FLOOR.ln();
        for i in 0..m.num_frames {
            assert!((m.row(i)[0] - c0).abs() < 1e-9);
            assert!(m.row(i)[1..].iter().all(|v| v.abs() < 1e-9));
        }
        let l = lfcc(&f, &CepstralConfig::default()).unwrap();
        assert!((l.row(0)[0] - 40.0 * LOG_FLOOR.ln()).abs() < 1e-9);
    }

    #[test]
    fn scaling_shifts_only_c0() {
        let x: Vec<f64> = (0..3200)
            .map(|n| {
                let t = n as f64 / 16000.0;
                (2.0 * std::f64::consts::PI * 440.0 * t).sin()
                    + 0.3 * (2.0 * std::f64::consts::PI * 3100.0 * t).sin()
            })
            .collect();
        let y: Vec<f64> = x.iter().map(|v| v * 4.0).collect();
        let cfg = CepstralConfig {
            mel_divisor: 700.0,
            ..Default::default()
        };
        let (a, b) = (
            mfcc(&frames(&x), &cfg).unwrap(),
            mfcc(&frames(&y), &cfg).unwrap(),
        );
        let shift = b.row(0)[0] - a.row(0)[0];
        assert!((shift - 40f64.sqrt() * 16f64.ln()).abs() < 1e-6);
        for i in 0..a.num_frames {
            assert!((b.row(i)[0] - a.row(i)[0] - shift).abs() < 1e-6);
            for j in 1..40 {
                assert!((b.row(i)[j] - a.row(i)[j]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn fuse_layout() {
        let f = frames(
            &(0..3200)
                .map(|n| (n as f64 * 0.05).sin())
                .collect::<Vec<_>>(),
        );
        let cfg = CepstralConfig::default();
        let (m, l) = (mfcc(&f, &cfg).unwrap(), lfcc(&f, &cfg).unwrap());
        let fused = fuse_cepstral(&m, &l).unwrap();
        assert_eq!((fused.num_frames, fused.num_coeffs), (m.num_frames, 80));
        for i in 0..m.num_frames {
            assert_eq!(&fused.row(i)[..40], m.row(i));
            assert_eq!(&fused.row(i)[40..], l.row(i));
        }
        let short = CepstralMatrix {
            num_frames: m.num_frames - 1,
            data: m.data[40..].to_vec(),
            ..m.clone()
        };
        assert!(matches!(
            fuse_cepstral(&short, &l),
            Err(Error::FrameCountMismatch { .. })
        ));
    }

    #[test]
    fn mfcc_and_lfcc_agree_up_to_dct_scaling_on_linear_bank() {
        let f = frames(
            &(0..1600)
                .map(|n| (n as f64 * 0.21).sin() * (n as f64 * 0.003).cos())
                .collect::<Vec<_>>(),
        );
        let cfg = CepstralConfig::default();
        let lin = cepstra(
            &f,
            &cfg,
            FilterScale::Linear,
            CepstralKind::Mfcc,
            dct2_orthonormal,
        )
        .unwrap();
        let l = lfcc(&f, &cfg).unwrap();
        for i in 0..f.num_frames {
            for j in 0..40 {
                let s = if j == 0 {
                    (1.0f64 / 40.0).sqrt()
                } else {
                    (2.0f64 / 40.0).sqrt()
                };
                assert!((lin.row(i)[j] - s * l.row(i)[j]).abs() < 1e-9);
            }
        }
    }
}
