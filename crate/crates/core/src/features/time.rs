//! Per-syllable time-domain features: tempo, energy, intensity, power, pitch.

use crate::audio::AudioClip;
use crate::error::{Error, Result};
use crate::vad::SyllableSegment;

/// Reference power for intensity in dB.
pub const INTENSITY_REF: f64 = 1e-10;
/// Normalized autocorrelation below this is reported as unvoiced (pitch 0).
pub const VOICING_THRESHOLD: f64 = 0.3;
pub const PITCH_MIN_HZ: f64 = 100.0;
pub const PITCH_MAX_HZ: f64 = 3000.0;

pub const TIME_FEATURE_DIM: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeFeatures {
    pub tempo: f64,
    pub energy: f64,
    pub intensity_db: f64,
    pub power: f64,
    pub pitch_hz: f64,
}

impl TimeFeatures {
    pub fn to_array(self) -> [f64; TIME_FEATURE_DIM] {
        [
            self.tempo,
            self.energy,
            self.intensity_db,
            self.power,
            self.pitch_hz,
        ]
    }
}

/// Fundamental frequency by the autocorrelation method.
///
/// The autocorrelation is normalized by r(0). Among local maxima inside
/// [sr/f_max, sr/f_min], the shortest lag within 90% of the tallest one is
/// taken, then refined by parabolic interpolation.
pub fn pitch(samples: &[f64], sample_rate: u32, f_min: f64, f_max: f64) -> Result<f64> {
    let sr = sample_rate as f64;
    if !(f_min > 0.0 && f_min < f_max && f_max < sr / 2.0) {
        return Err(Error::InvalidConfig(format!(
            "pitch range [{f_min}, {f_max}] invalid"
        )));
    }
    let needed = (2.0 * sr / f_min).ceil() as usize;
    if samples.len() < needed {
        return Err(Error::SegmentTooShort {
            samples: samples.len(),
            needed,
        });
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let x: Vec<f64> = samples.iter().map(|v| v - mean).collect();
    let r0: f64 = x.iter().map(|v| v * v).sum();
    if r0 <= 0.0 {
        return Ok(0.0);
    }
    let lag_min = (sr / f_max).floor().max(1.0) as usize;
    let lag_max = (sr / f_min).ceil() as usize;
    let r: Vec<f64> = (lag_min - 1..=lag_max + 1)
        .map(|lag| x.iter().zip(&x[lag..]).map(|(a, b)| a * b).sum::<f64>() / r0)
        .collect();
    // r[i] holds lag (lag_min - 1 + i)
    let peaks: Vec<usize> = (1..r.len() - 1)
        .filter(|&i| r[i] > r[i - 1] && r[i] >= r[i + 1])
        .collect();
    let Some(tallest) = peaks.iter().map(|&i| r[i]).reduce(f64::max) else {
        return Ok(0.0);
    };
    if tallest < VOICING_THRESHOLD {
        return Ok(0.0);
    }
    let i = peaks.into_iter().find(|&i| r[i] >= 0.9 * tallest).unwrap();
    let (a, b, c) = (r[i - 1], r[i], r[i + 1]);
    let denom = a - 2.0 * b + c;
    let offset = if denom.abs() > 1e-12 {
        0.5 * (a - c) / denom
    } else {
        0.0
    };
    let lag = (lag_min - 1 + i) as f64 + offset.clamp(-0.5, 0.5);
    Ok(sr / lag)
}

pub fn energy(samples: &[f64]) -> f64 {
    samples.iter().map(|v| v * v).sum()
}

/// One feature row per syllable. An empty syllable list yields no rows.
pub fn time_features(clip: &AudioClip, syllables: &[SyllableSegment]) -> Vec<TimeFeatures> {
    let tempo = syllables.len() as f64 / clip.duration_s();
    syllables
        .iter()
        .map(|s| {
            let e = energy(&s.samples);
            let power = e / s.samples.len() as f64;
            let f0 = pitch(&s.samples, clip.sample_rate, PITCH_MIN_HZ, PITCH_MAX_HZ).unwrap_or(0.0);
            TimeFeatures {
                tempo,
                energy: e,
                intensity_db: intensity_db(power),
                power,
                pitch_hz: f0,
            }
        })
        .collect()
}

pub fn intensity_db(power: f64) -> f64 {
    10.0 * (power.max(INTENSITY_REF) / INTENSITY_REF).log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::SAMPLE_RATE;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn sine(f: f64, n: usize, amp: f64) -> Vec<f64> {
        (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * f * i as f64 / 16000.0).sin())
            .collect()
    }

    #[test]
    fn pitch_of_sines() {
        let p = pitch(&sine(200.0, 1600, 1.0), SAMPLE_RATE, 50.0, 2000.0).unwrap();
        assert!((p - 200.0).abs() <= 2.0, "{p}");
        let a = pitch(&sine(400.0, 1600, 1.0), SAMPLE_RATE, 50.0, 2000.0).unwrap();
        let b = pitch(&sine(400.0, 1600, 0.1), SAMPLE_RATE, 50.0, 2000.0).unwrap();
        assert!((a - b).abs() <= 1e-6 * a);
        let hi = pitch(&sine(1500.0, 1600, 1.0), SAMPLE_RATE, 100.0, 3000.0).unwrap();
        assert!((hi - 1500.0).abs() < 30.0, "{hi}");
    }

    #[test]
    fn pitch_of_noise_is_unvoiced() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let x: Vec<f64> = (0..1600).map(|_| normal.sample(&mut rng)).collect();
        assert_eq!(pitch(&x, SAMPLE_RATE, 50.0, 2000.0).unwrap(), 0.0);
    }

    #[test]
    fn pitch_preconditions() {
        assert!(matches!(
            pitch(&[0.0; 100], SAMPLE_RATE, 50.0, 2000.0),
            Err(Error::SegmentTooShort { .. })
        ));
        assert!(pitch(&[0.0; 1000], SAMPLE_RATE, 500.0, 100.0).is_err());
        assert_eq!(pitch(&[0.0; 1000], SAMPLE_RATE, 50.0, 2000.0).unwrap(), 0.0);
    }

    fn seg(samples: Vec<f64>, start: usize) -> SyllableSegment {
        let end = start + samples.len();
        SyllableSegment {
            start_s: start as f64 / 16000.0,
            end_s: end as f64 / 16000.0,
            start_sample: start,
            end_sample: end,
            samples,
        }
    }

    #[test]
    fn tempo_and_energy() {
        let clip = AudioClip::new(vec![0.0; 40_000], SAMPLE_RATE, "c").unwrap();
        let syl: Vec<SyllableSegment> = (0..5).map(|i| seg(vec![0.5; 160], i * 1000)).collect();
        let tf = time_features(&clip, &syl);
        assert_eq!(tf.len(), 5);
        assert!(tf.iter().all(|t| t.tempo == 2.0));
        assert_eq!(tf[0].energy, 40.0);
        assert_eq!(tf[0].power, 0.25);
        assert!((tf[0].intensity_db - 93.979).abs() < 1e-3);
    }

    #[test]
    fn silent_syllable_floor() {
        let clip = AudioClip::new(vec![0.0; 4000], SAMPLE_RATE, "c").unwrap();
        let tf = time_features(&clip, &[seg(vec![0.0; 400], 0)]);
        assert_eq!(
            (tf[0].energy, tf[0].power, tf[0].intensity_db),
            (0.0, 0.0, 0.0)
        );
        assert!(time_features(&clip, &[]).is_empty());
    }

    #[test]
    fn energy_is_additive() {
        let a = sine(300.0, 777, 0.3);
        let b = sine(910.0, 1234, 0.7);
        let joined: Vec<f64> = a.iter().chain(&b).copied().collect();
        let (ea, eb, ej) = (energy(&a), energy(&b), energy(&joined));
        assert!((ej - (ea + eb)).abs() <= 1e-9 * ej);
    }
}
