//! Syllable extraction by vocal-activity detection.
//!
//! A frame is voiced when three criteria agree: its short-time energy exceeds a
//! fraction of the clip's loudest frame, its spectrum is tonal (low Wiener
//! entropy), and it lies under a prominent peak of the smoothed energy
//! envelope. Voiced runs are merged across short gaps and short runs dropped.

use crate::audio::{frame, AudioClip, FrameSequence, Window};
use crate::dsp::{next_pow2, PowerSpectrum};

const FLATNESS_FLOOR: f64 = 1e-12;
const ENVELOPE_SMOOTHING: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct VadConfig {
    /// Fraction of the clip's maximum frame energy.
    pub energy_threshold_ratio: f64,
    /// Upper bound on spectral flatness for a voiced frame.
    pub entropy_threshold: f64,
    /// Fraction of the envelope's dynamic range.
    pub prominence_threshold: f64,
    pub min_syllable_ms: f64,
    pub merge_gap_ms: f64,
    pub frame_ms: f64,
    pub hop_ms: f64,
}

impl Default for VadConfig {
    fn default() -> Self {
        Self {
            energy_threshold_ratio: 0.1,
            entropy_threshold: 0.5,
            prominence_threshold: 0.1,
            min_syllable_ms: 30.0,
            merge_gap_ms: 50.0,
            frame_ms: 20.0,
            hop_ms: 10.0,
        }
    }
}

impl VadConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(crate::Error::InvalidConfig(format!(
                    "{name} = {v} not in (0, 1)"
                )))
            }
        };
        unit("energy_threshold_ratio", self.energy_threshold_ratio)?;
        unit("entropy_threshold", self.entropy_threshold)?;
        unit("prominence_threshold", self.prominence_threshold)?;
        if self.min_syllable_ms <= 0.0 || self.merge_gap_ms < 0.0 {
            return Err(crate::Error::InvalidConfig(
                "syllable/gap durations must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A voiced interval of a clip.
#[derive(Debug, Clone, PartialEq)]
pub struct SyllableSegment {
    pub start_s: f64,
    pub end_s: f64,
    pub start_sample: usize,
    pub end_sample: usize,
    pub samples: Vec<f64>,
}

impl SyllableSegment {
    pub fn from_range(samples: &[f64], sample_rate: u32, start: usize, end: usize) -> Self {
        let sr = sample_rate as f64;
        Self {
            start_s: start as f64 / sr,
            end_s: end as f64 / sr,
            start_sample: start,
            end_sample: end,
            samples: samples[start..end].to_vec(),
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Per-frame sum of squared samples.
pub fn short_time_energy(frames: &FrameSequence) -> Vec<f64> {
    frames
        .iter()
        .map(|f| f.iter().map(|v| v * v).sum())
        .collect()
}

/// Per-frame spectral flatness: geometric over arithmetic mean of the power
/// spectrum, bins floored at 1e-12.
pub fn wiener_entropy(frames: &FrameSequence) -> Vec<f64> {
    let mut ps = PowerSpectrum::new(next_pow2(frames.frame_len));
    let mut spec = vec![0.0; ps.num_bins()];
    frames
        .iter()
        .map(|f| {
            ps.compute_into(f, &mut spec);
            spectral_flatness(&spec)
        })
        .collect()
}

pub fn spectral_flatness(power: &[f64]) -> f64 {
    let n = power.len() as f64;
    let (log_sum, sum) = power.iter().fold((0.0, 0.0), |(l, s), &p| {
        let p = p.max(FLATNESS_FLOOR);
        (l + p.ln(), s + p)
    });
    let geo = (log_sum / n).exp();
    let arith = sum / n;
    (geo / arith).clamp(0.0, 1.0)
}

/// A local maximum with its topographic prominence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub prominence: f64,
    pub left_base: usize,
    pub right_base: usize,
}

/// Finds interior local maxima (flat tops resolved to their middle sample) and
/// their prominences: peak height minus the higher of the two lowest points
/// separating it from higher terrain or the sequence edge.
pub fn peak_prominence(x: &[f64]) -> Vec<Peak> {
    let n = x.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if x[i - 1] < x[i] {
            let mut ahead = i + 1;
            while ahead + 1 < n && x[ahead] == x[i] {
                ahead += 1;
            }
            if x[ahead] < x[i] {
                let index = (i + ahead - 1) / 2;
                peaks.push(prominence_at(x, index));
                i = ahead;
                continue;
            }
        }
        i += 1;
    }
    peaks
}

fn prominence_at(x: &[f64], index: usize) -> Peak {
    let h = x[index];
    let (mut left_min, mut left_base) = (h, index);
    let mut j = index;
    while j > 0 {
        j -= 1;
        if x[j] > h {
            break;
        }
        if x[j] < left_min {
            left_min = x[j];
            left_base = j;
        }
    }
    let (mut right_min, mut right_base) = (h, index);
    for (k, &v) in x.iter().enumerate().skip(index + 1) {
        if v > h {
            break;
        }
        if v < right_min {
            right_min = v;
            right_base = k;
        }
    }
    Peak {
        index,
        prominence: h - left_min.max(right_min),
        left_base,
        right_base,
    }
}

/// Frame span of `peak` where `x` stays at or above half its prominence.
fn half_prominence_span(x: &[f64], peak: &Peak) -> (usize, usize) {
    let level = x[peak.index] - peak.prominence / 2.0;
    let mut lo = peak.index;
    while lo > peak.left_base && x[lo - 1] >= level {
        lo -= 1;
    }
    let mut hi = peak.index;
    while hi < peak.right_base && x[hi + 1] >= level {
        hi += 1;
    }
    (lo, hi)
}

fn moving_average(x: &[f64], width: usize) -> Vec<f64> {
    let half = width / 2;
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            x[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Per-frame voiced decisions for a clip, with the energies they were based on.
pub fn voiced_frames(
    clip: &AudioClip,
    cfg: &VadConfig,
) -> crate::Result<(Vec<bool>, Vec<f64>, FrameSequence)> {
    let rect = frame(clip, cfg.frame_ms, cfg.hop_ms, Window::Rectangular)?;
    let energy = short_time_energy(&rect);
    let flatness = wiener_entropy(&frame(clip, cfg.frame_ms, cfg.hop_ms, Window::Hamming)?);
    let max_e = energy.iter().copied().fold(0.0, f64::max);
    if max_e <= 0.0 {
        return Ok((vec![false; energy.len()], energy, rect));
    }
    let threshold = cfg.energy_threshold_ratio * max_e;

    let envelope = moving_average(&energy, ENVELOPE_SMOOTHING);
    let env_max = envelope.iter().copied().fold(f64::MIN, f64::max);
    let env_min = envelope.iter().copied().fold(f64::MAX, f64::min);
    let min_prom = cfg.prominence_threshold * (env_max - env_min);
    let mut under_peak = vec![false; energy.len()];
    for p in peak_prominence(&envelope)
        .iter()
        .filter(|p| p.prominence > min_prom)
    {
        let (lo, hi) = half_prominence_span(&envelope, p);
        under_peak[lo..=hi].iter_mut().for_each(|u| *u = true);
    }

    let voiced = (0..energy.len())
        .map(|t| energy[t] > threshold && flatness[t] < cfg.entropy_threshold && under_peak[t])
        .collect();
    Ok((voiced, energy, rect))
}

/// Detects syllables in `clip`. Output is sorted and pairwise disjoint.
pub fn segment_syllables(clip: &AudioClip, cfg: &VadConfig) -> crate::Result<Vec<SyllableSegment>> {
    let (voiced, energy, frames) = match voiced_frames(clip, cfg) {
        Ok(v) => v,
        Err(crate::Error::ClipTooShort { .. }) => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let max_e = energy.iter().copied().fold(0.0, f64::max);
    let threshold = cfg.energy_threshold_ratio * max_e;
    let (hop, flen) = (frames.hop_len, frames.frame_len);
    let sr = clip.sample_rate as f64;
    let merge_gap = (cfg.merge_gap_ms * sr / 1000.0).round() as usize;
    let min_len = (cfg.min_syllable_ms * sr / 1000.0).round() as usize;

    // voiced frame runs as (first_frame, last_frame)
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for (t, &v) in voiced.iter().enumerate() {
        if !v {
            continue;
        }
        match runs.last_mut() {
            Some((_, last)) if *last + 1 == t => *last = t,
            _ => runs.push((t, t)),
        }
    }

    let n = clip.samples.len();
    let mut intervals: Vec<(usize, usize, usize, usize)> = Vec::new();
    for (a, b) in runs {
        let (start, end) = (a * hop, (b * hop + flen).min(n));
        match intervals.last_mut() {
            Some(prev) if start <= prev.1 + merge_gap => {
                prev.1 = prev.1.max(end);
                prev.3 = b;
            }
            _ => intervals.push((start, end, a, b)),
        }
    }

    Ok(intervals
        .into_iter()
        .filter(|&(start, end, a, b)| {
            let mean_e = energy[a..=b].iter().sum::<f64>() / (b - a + 1) as f64;
            end - start >= min_len && mean_e > threshold
        })
        .map(|(start, end, _, _)| {
            SyllableSegment::from_range(&clip.samples, clip.sample_rate, start, end)
        })
        .collect())
}
