//! Audio ingestion: RIFF/WAVE reading and writing, and framing into windowed
//! frame sequences.
//!
//! Only mono 16 kHz audio is accepted. Integer PCM (format code 1, 16-bit) is
//! scaled by 2^-15; IEEE float (format code 3, 32-bit) is passed through.
//! Writing always produces 32-bit float mono 16 kHz files.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const SAMPLE_RATE: u32 = 16_000;

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;

/// A mono waveform with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub source_id: String,
}

impl AudioClip {
    /// Validates the clip invariants: 16 kHz, non-empty, finite.
    pub fn new(samples: Vec<f64>, sample_rate: u32, source_id: impl Into<String>) -> Result<Self> {
        if sample_rate != SAMPLE_RATE {
            return Err(Error::BadSampleRate {
                found: sample_rate,
                expected: SAMPLE_RATE,
            });
        }
        if samples.is_empty() {
            return Err(Error::InvalidClip("no samples".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidClip(format!("non-finite sample at {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
            source_id: source_id.into(),
        })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Decodes an in-memory RIFF/WAVE image.
pub fn decode_wav(bytes: &[u8], source_id: &str) -> Result<AudioClip> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::NotWav("missing RIFF/WAVE magic".into()));
    }
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let len = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| {
                Error::NotWav(format!(
                    "chunk `{}` overruns file",
                    String::from_utf8_lossy(id)
                ))
            })?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(Error::NotWav("fmt chunk too short".into()));
                }
                fmt = Some((
                    u16_at(body, 0),
                    u16_at(body, 2),
                    u32_at(body, 4),
                    u16_at(body, 14),
                ));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are word aligned
        pos = body_end + (len & 1);
    }
    let (code, channels, rate, bits) = fmt.ok_or_else(|| Error::NotWav("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::NotWav("no data chunk".into()))?;
    if channels != 1 {
        return Err(Error::UnsupportedFormat(format!("{channels} channels")));
    }
    let samples: Vec<f64> = match (code, bits) {
        (FORMAT_PCM, 16) => data
            .chunks_exact(2)
            .map(|c| (i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0).max(-1.0))
            .collect(),
        (FORMAT_FLOAT, 32) => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        _ => {
            return Err(Error::UnsupportedFormat(format!(
                "format code {code}, {bits} bits"
            )))
        }
    };
    if rate != SAMPLE_RATE {
        return Err(Error::BadSampleRate {
            found: rate,
            expected: SAMPLE_RATE,
        });
    }
    AudioClip::new(samples, rate, source_id)
}

pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    decode_wav(&bytes, &path.to_string_lossy())
}

/// Encodes a clip as 32-bit float mono WAV. Samples are narrowed to f32.
pub fn encode_wav(clip: &AudioClip) -> Vec<u8> {
    let data_len = (clip.samples.len() * 4) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_FLOAT.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate * 4).to_le_bytes());
    out.extend_from_slice(&4u16.to_le_bytes());
    out.extend_from_slice(&32u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &clip.samples {
        out.extend_from_slice(&(s as f32).to_le_bytes());
    }
    out
}

pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_wav(clip))?;
    Ok(())
}

/// Encodes 16-bit PCM; used by tests and tools that need integer files.
pub fn encode_wav_pcm16(samples: &[i16], sample_rate: u32, channels: u16) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2 * channels as u32).to_le_bytes());
    out.extend_from_slice(&(2 * channels).to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Rectangular,
    Hamming,
}

impl Window {
    pub fn weights(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; len],
            Window::Hamming if len == 1 => vec![1.0],
            Window::Hamming => (0..len)
                .map(|n| {
                    0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (len - 1) as f64).cos()
                })
                .collect(),
        }
    }
}

/// Overlapping windowed frames of a clip, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    data: Vec<f64>,
    pub num_frames: usize,
    pub frame_len: usize,
    pub hop_len: usize,
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub sample_rate: u32,
}

impl FrameSequence {
    pub fn frame(&self, i: usize) -> &[f64] {
        &self.data[i * self.frame_len..(i + 1) * self.frame_len]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.frame_len)
    }

    pub fn is_empty(&self) -> bool {
        self.num_frames == 0
    }
}

/// Number of whole frames that fit in `n` samples.
pub fn frame_count(n: usize, frame_len: usize, hop_len: usize) -> usize {
    if n < frame_len {
        0
    } else {
        (n - frame_len) / hop_len + 1
    }
}

fn ms_to_samples(ms: f64, sample_rate: u32) -> Result<usize> {
    let exact = ms * sample_rate as f64 / 1000.0;
    let n = exact.round();
    if (exact - n).abs() > 1e-9 || n < 1.0 {
        return Err(Error::InvalidFraming(format!(
            "{ms} ms is not a whole number of samples"
        )));
    }
    Ok(n as usize)
}

/// Cuts `samples` into frames of `frame_ms` every `hop_ms`, applying `window`.
/// A trailing remainder shorter than one frame is discarded.
pub fn frame_samples(
    samples: &[f64],
    sample_rate: u32,
    frame_ms: f64,
    hop_ms: f64,
    window: Window,
) -> Result<FrameSequence> {
    let frame_len = ms_to_samples(frame_ms, sample_rate)?;
    let hop_len = ms_to_samples(hop_ms, sample_rate)?;
    if frame_len < 2 {
        return Err(Error::InvalidFraming(format!(
            "frame length {frame_len} < 2 samples"
        )));
    }
    if samples.len() < frame_len {
        return Err(Error::ClipTooShort {
            samples: samples.len(),
            needed: frame_len,
        });
    }
    let num_frames = frame_count(samples.len(), frame_len, hop_len);
    let w = window.weights(frame_len);
    let mut data = Vec::with_capacity(num_frames * frame_len);
    for f in 0..num_frames {
        let start = f * hop_len;
        data.extend(
            samples[start..start + frame_len]
                .iter()
                .zip(&w)
                .map(|(s, w)| s * w),
        );
    }
    Ok(FrameSequence {
        data,
        num_frames,
        frame_len,
        hop_len,
        frame_ms,
        hop_ms,
        sample_rate,
    })
}

pub fn frame(
    clip: &AudioClip,
    frame_ms: f64,
    hop_ms: f64,
    window: Window,
) -> Result<FrameSequence> {
    frame_samples(&clip.samples, clip.sample_rate, frame_ms, hop_ms, window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pcm16_scaling() {
        let bytes = encode_wav_pcm16(&[0, 16384, -32768], SAMPLE_RATE, 1);
        let clip = decode_wav(&bytes, "t").unwrap();
        assert_eq!(clip.samples, vec![0.0, 0.5, -1.0]);
    }

    #[test]
    fn stereo_rejected() {
        let bytes = encode_wav_pcm16(&[0, 0, 1, 1], SAMPLE_RATE, 2);
        assert!(matches!(
            decode_wav(&bytes, "t"),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn wrong_rate_rejected() {
        let bytes = encode_wav_pcm16(&[0, 1], 44_100, 1);
        assert!(matches!(
            decode_wav(&bytes, "t"),
            Err(Error::BadSampleRate { found: 44_100, .. })
        ));
    }

    #[test]
    fn garbage_rejected() {
        assert!(matches!(
            decode_wav(b"RIFX0000WAVEfmt ", "t"),
            Err(Error::NotWav(_))
        ));
        assert!(matches!(decode_wav(b"", "t"), Err(Error::NotWav(_))));
    }

    #[test]
    fn fifty_five_seconds() {
        let clip = AudioClip::new(vec![0.0; 55 * 16_000], SAMPLE_RATE, "x").unwrap();
        assert_eq!(clip.samples.len(), 880_000);
        let frames = frame(&clip, 20.0, 10.0, Window::Hamming).unwrap();
        assert_eq!(frames.num_frames, 5499);
        assert_eq!(frames.frame_len, 320);
    }

    #[test]
    fn constant_rectangular_frames_are_ones() {
        let clip = AudioClip::new(vec![1.0; 1000], SAMPLE_RATE, "x").unwrap();
        let frames = frame(&clip, 20.0, 10.0, Window::Rectangular).unwrap();
        assert!(frames.iter().all(|f| f.iter().all(|&v| v == 1.0)));
    }

    #[test]
    fn hamming_four() {
        let w = Window::Hamming.weights(4);
        let rounded: Vec<f64> = w.iter().map(|v| (v * 100.0).round() / 100.0).collect();
        assert_eq!(rounded, vec![0.08, 0.77, 0.77, 0.08]);
    }

    #[test]
    fn too_short() {
        let clip = AudioClip::new(vec![0.1; 100], SAMPLE_RATE, "x").unwrap();
        assert!(matches!(
            frame(&clip, 20.0, 10.0, Window::Hamming),
            Err(Error::ClipTooShort { .. })
        ));
    }

    #[test]
    fn rejects_nonfinite() {
        assert!(AudioClip::new(vec![0.0, f64::NAN], SAMPLE_RATE, "x").is_err());
        assert!(AudioClip::new(vec![], SAMPLE_RATE, "x").is_err());
    }

    proptest! {
        #[test]
        fn frame_count_formula(n in 2usize..5000, frame_len in 2usize..400, hop in 1usize..400) {
            prop_assume!(n >= frame_len);
            let samples: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let fs = frame_samples(&samples, 1000, frame_len as f64, hop as f64, Window::Rectangular).unwrap();
            prop_assert_eq!(fs.num_frames, (n - frame_len) / hop + 1);
        }

        #[test]
        fn non_overlapping_reconstruction(n in 2usize..3000, frame_len in 2usize..200) {
            prop_assume!(n >= frame_len);
            let samples: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let fs = frame_samples(&samples, 1000, frame_len as f64, frame_len as f64, Window::Rectangular).unwrap();
            let rebuilt: Vec<f64> = fs.iter().flatten().copied().collect();
            prop_assert_eq!(&rebuilt[..], &samples[..fs.num_frames * frame_len]);
        }

        #[test]
        fn float_wav_round_trip(raw in prop::collection::vec(-1.0f32..1.0, 1..500)) {
            let clip = AudioClip::new(raw.iter().map(|&v| v as f64).collect(), SAMPLE_RATE, "p").unwrap();
            let back = decode_wav(&encode_wav(&clip), "p").unwrap();
            prop_assert_eq!(back.samples, clip.samples);
        }
    }
}
