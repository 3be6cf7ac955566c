//! Acoustic features in three parallel channels:
//!
//! 0. time: per syllable `[tempo, energy, intensity dB, power, pitch Hz]`
//! 1. spectral: per syllable `[F1, F2, F3, F4, ln spectral energy]`
//! 2. cepstral: per frame, 40 MFCC followed by 40 LFCC
//!
//! Time and spectral rows follow the detected syllables; cepstral rows follow
//! the whole-clip framing.

pub mod cache;
pub mod cepstral;
pub mod spectral;
pub mod time;

use std::fmt;
use std::str::FromStr;

pub use cepstral::{
    fuse_cepstral, lfcc, mel_scale, mfcc, triangular_filterbank, CepstralConfig, CepstralKind,
    CepstralMatrix, FilterScale, Filterbank,
};
pub use spectral::{formants, spectral_energy, SpectralEnergy};
pub use time::{pitch, time_features, TimeFeatures};

use crate::audio::{frame, AudioClip, Window};
use crate::error::{Error, Result};
use crate::labels::LabelVector;
use crate::vad::{segment_syllables, SyllableSegment, VadConfig};

pub const SPECTRAL_FEATURE_DIM: usize = 5;
pub const NUM_CHANNELS: usize = 3;

/// Row-major f32 matrix; the storage type of feature channels and the cache.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], cols: usize) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged feature rows");
            data.extend(r.iter().map(|&v| v as f32));
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn columns(&self, range: std::ops::Range<usize>) -> Self {
        let cols = range.len();
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(&self.row(i)[range.clone()]);
        }
        Self {
            rows: self.rows,
            cols,
            data,
        }
    }

    /// Column-wise mean and population standard deviation.
    pub fn mean_std(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.rows.max(1) as f64;
        let mut mean = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (m, &v) in mean.iter_mut().zip(self.row(i)) {
                *m += v as f64;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; self.cols];
        for i in 0..self.rows {
            for ((s, &v), m) in var.iter_mut().zip(self.row(i)).zip(&mean) {
                *s += (v as f64 - m).powi(2);
            }
        }
        (mean, var.into_iter().map(|v| (v / n).sqrt()).collect())
    }
}

/// The three feature channels of one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannelFeatures {
    pub id: String,
    pub time: FeatureMatrix,
    pub spectral: FeatureMatrix,
    pub cepstral: FeatureMatrix,
    pub label: Option<LabelVector>,
}

impl MultiChannelFeatures {
    pub fn channels(&self) -> [&FeatureMatrix; NUM_CHANNELS] {
        [&self.time, &self.spectral, &self.cepstral]
    }

    /// Channels that carry columns, in channel order.
    pub fn active_channels(&self) -> Vec<&FeatureMatrix> {
        self.channels().into_iter().filter(|c| c.cols > 0).collect()
    }

    /// Input width of each active channel.
    pub fn channel_dims(&self) -> Vec<usize> {
        self.active_channels().iter().map(|c| c.cols).collect()
    }
}

/// Which features feed a model: one of the experiment-grid columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureSet {
    Time,
    FormantsSpectral,
    Mfcc,
    Lfcc,
    MfccLfcc,
    ThreeChannel,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 6] = [
        FeatureSet::Time,
        FeatureSet::FormantsSpectral,
        FeatureSet::Mfcc,
        FeatureSet::Lfcc,
        FeatureSet::MfccLfcc,
        FeatureSet::ThreeChannel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::Time => "time_only",
            FeatureSet::FormantsSpectral => "freq_only:formants_spectral",
            FeatureSet::Mfcc => "freq_only:mfcc",
            FeatureSet::Lfcc => "freq_only:lfcc",
            FeatureSet::MfccLfcc => "freq_only:mfcc_lfcc",
            FeatureSet::ThreeChannel => "three_channel",
        }
    }

    /// Keeps only the channels (and cepstral columns) this set uses; the
    /// others become 0x0.
    pub fn select(self, f: &MultiChannelFeatures) -> MultiChannelFeatures {
        let half = f.cepstral.cols / 2;
        let (time, spectral, cepstral) = match self {
            FeatureSet::Time => (
                f.time.clone(),
                FeatureMatrix::empty(),
                FeatureMatrix::empty(),
            ),
            FeatureSet::FormantsSpectral => (
                FeatureMatrix::empty(),
                f.spectral.clone(),
                FeatureMatrix::empty(),
            ),
            FeatureSet::Mfcc => (
                FeatureMatrix::empty(),
                FeatureMatrix::empty(),
                f.cepstral.columns(0..half),
            ),
            FeatureSet::Lfcc => (
                FeatureMatrix::empty(),
                FeatureMatrix::empty(),
                f.cepstral.columns(half..f.cepstral.cols),
            ),
            FeatureSet::MfccLfcc => (
                FeatureMatrix::empty(),
                FeatureMatrix::empty(),
                f.cepstral.clone(),
            ),
            FeatureSet::ThreeChannel => (f.time.clone(), f.spectral.clone(), f.cepstral.clone()),
        };
        MultiChannelFeatures {
            id: f.id.clone(),
            time,
            spectral,
            cepstral,
            label: f.label,
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        let key = key.strip_prefix("freq_only:").unwrap_or(&key);
        Ok(match key {
            "time_only" | "time" => FeatureSet::Time,
            "formants_spectral" | "formants+spectral" => FeatureSet::FormantsSpectral,
            "mfcc" => FeatureSet::Mfcc,
            "lfcc" => FeatureSet::Lfcc,
            "mfcc_lfcc" | "mfcc+lfcc" => FeatureSet::MfccLfcc,
            "three_channel" => FeatureSet::ThreeChannel,
            _ => return Err(Error::InvalidConfig(format!("unknown feature set `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub vad: VadConfig,
    pub cepstral: CepstralConfig,
    pub frame_ms: f64,
    pub hop_ms: f64,
    /// Consecutive cepstral frames averaged into one model time step.
    pub cepstral_pool: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            vad: VadConfig::default(),
            cepstral: CepstralConfig::default(),
            frame_ms: 20.0,
            hop_ms: 10.0,
            cepstral_pool: 1,
        }
    }
}

/// Features of one clip plus the syllables they were computed from.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub features: MultiChannelFeatures,
    pub syllables: Vec<SyllableSegment>,
}

impl Extraction {
    /// Clips without syllables have empty time/spectral channels and are
    /// excluded from training.
    pub fn is_usable(&self) -> bool {
        !self.syllables.is_empty()
    }
}

pub fn spectral_features(
    syllable: &SyllableSegment,
    sample_rate: u32,
) -> [f64; SPECTRAL_FEATURE_DIM] {
    let f = formants(&syllable.samples, sample_rate).unwrap_or([0.0; 4]);
    let e = spectral_energy(&syllable.samples)
        .map(|s| s.log_total)
        .unwrap_or(spectral::SPECTRAL_EPS.ln());
    [f[0], f[1], f[2], f[3], e]
}

/// Whole-clip fused cepstra (MFCC then LFCC), pooled over `cepstral_pool` frames.
pub fn cepstral_features(clip: &AudioClip, cfg: &FeatureConfig) -> Result<CepstralMatrix> {
    let frames = frame(clip, cfg.frame_ms, cfg.hop_ms, Window::Hamming)?;
    let fused = fuse_cepstral(
        &mfcc(&frames, &cfg.cepstral)?,
        &lfcc(&frames, &cfg.cepstral)?,
    )?;
    Ok(pool_rows(&fused, cfg.cepstral_pool))
}

fn pool_rows(m: &CepstralMatrix, pool: usize) -> CepstralMatrix {
    if pool <= 1 {
        return m.clone();
    }
    let mut data = Vec::new();
    let mut rows = 0;
    for start in (0..m.num_frames).step_by(pool) {
        let end = (start + pool).min(m.num_frames);
        let n = (end - start) as f64;
        for j in 0..m.num_coeffs {
            data.push((start..end).map(|i| m.row(i)[j]).sum::<f64>() / n);
        }
        rows += 1;
    }
    CepstralMatrix {
        kind: m.kind,
        num_frames: rows,
        num_coeffs: m.num_coeffs,
        data,
    }
}

/// Runs segmentation and every feature extractor on one clip.
pub fn extract(
    clip: &AudioClip,
    label: Option<LabelVector>,
    cfg: &FeatureConfig,
) -> Result<Extraction> {
    let syllables = segment_syllables(clip, &cfg.vad)?;
    let time_rows: Vec<[f64; time::TIME_FEATURE_DIM]> = time_features(clip, &syllables)
        .into_iter()
        .map(TimeFeatures::to_array)
        .collect();
    let spectral_rows: Vec<[f64; SPECTRAL_FEATURE_DIM]> = syllables
        .iter()
        .map(|s| spectral_features(s, clip.sample_rate))
        .collect();
    let cep = cepstral_features(clip, cfg)?;
    let cep_rows: Vec<&[f64]> = (0..cep.num_frames).map(|i| cep.row(i)).collect();
    let features = MultiChannelFeatures {
        id: clip.source_id.clone(),
        time: FeatureMatrix::from_rows(&time_rows, time::TIME_FEATURE_DIM),
        spectral: FeatureMatrix::from_rows(&spectral_rows, SPECTRAL_FEATURE_DIM),
        cepstral: FeatureMatrix::from_rows(&cep_rows, cep.num_coeffs),
        label,
    };
    Ok(Extraction {
        features,
        syllables,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::SAMPLE_RATE;

    fn clip() -> AudioClip {
        let x: Vec<f64> = (0..32_000)
            .map(|n| {
                let t = n as f64 / 16000.0;
                let on = (0.2..0.5).contains(&t) || (1.0..1.3).contains(&t);
                if on {
                    (2.0 * std::f64::consts::PI * 700.0 * t).sin() * 0.5
                } else {
                    0.0
                }
            })
            .collect();
        AudioClip::new(x, SAMPLE_RATE, "c").unwrap()
    }

    #[test]
    fn extraction_shapes() {
        let ex = extract(&clip(), None, &FeatureConfig::default()).unwrap();
        let f = &ex.features;
        assert_eq!(ex.syllables.len(), 2);
        assert_eq!((f.time.rows, f.time.cols), (2, 5));
        assert_eq!((f.spectral.rows, f.spectral.cols), (2, 5));
        assert_eq!((f.cepstral.rows, f.cepstral.cols), (199, 80));
        assert!((f.time.row(0)[4] - 700.0).abs() < 10.0);
    }

    #[test]
    fn deterministic() {
        let a = extract(&clip(), None, &FeatureConfig::default()).unwrap();
        let b = extract(&clip(), None, &FeatureConfig::default()).unwrap();
        assert_eq!(a.features, b.features);
    }

    #[test]
    fn pooling_and_selection() {
        let cfg = FeatureConfig {
            cepstral_pool: 10,
            ..Default::default()
        };
        let f = extract(&clip(), None, &cfg).unwrap().features;
        assert_eq!(f.cepstral.rows, 20);
        let m = FeatureSet::Mfcc.select(&f);
        assert_eq!(m.channel_dims(), vec![40]);
        assert_eq!(FeatureSet::MfccLfcc.select(&f).channel_dims(), vec![80]);
        assert_eq!(
            FeatureSet::ThreeChannel.select(&f).channel_dims(),
            vec![5, 5, 80]
        );
        assert_eq!(FeatureSet::Time.select(&f).channel_dims(), vec![5]);
        for s in FeatureSet::ALL {
            assert_eq!(s.name().parse::<FeatureSet>().unwrap(), s);
        }
    }
}
