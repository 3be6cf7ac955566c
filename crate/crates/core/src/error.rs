use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o failure")]
    Io(#[from] io::Error),

    // audio
    #[error("not a RIFF/WAVE file: {0}")]
    NotWav(String),
    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),
    #[error("bad sample rate {found} Hz (expected {expected} Hz)")]
    BadSampleRate { found: u32, expected: u32 },
    #[error("invalid clip: {0}")]
    InvalidClip(String),
    #[error("clip too short: {samples} samples, need at least {needed}")]
    ClipTooShort { samples: usize, needed: usize },
    #[error("invalid framing: {0}")]
    InvalidFraming(String),

    // features
    #[error("negative frequency {0} Hz")]
    NegativeFrequency(f64),
    #[error("frame count mismatch: {left} vs {right}")]
    FrameCountMismatch { left: usize, right: usize },
    #[error("segment too short: {samples} samples, need at least {needed}")]
    SegmentTooShort { samples: usize, needed: usize },
    #[error("unstable LPC recursion at order {0}")]
    UnstableLpc(usize),
    #[error("invalid feature cache: {0}")]
    BadCache(String),

    // model / training
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("empty channel {0}")]
    EmptyChannel(usize),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),
    #[error("invalid label vector: {0}")]
    InvalidLabels(String),
    #[error("invalid checkpoint: {0}")]
    BadCheckpoint(String),

    // baselines
    #[error("too few samples: {0}")]
    TooFewSamples(String),
    #[error("model not fitted")]
    NotFitted,
    #[error("missing class samples: {0}")]
    MissingClassSamples(String),

    // evaluation
    #[error("length mismatch: {left} predictions vs {right} truths")]
    LengthMismatch { left: usize, right: usize },
    #[error("too few samples per class: {0}")]
    TooFewSamplesPerClass(String),

    #[error("bad manifest line {line}: {reason}")]
    BadManifest { line: usize, reason: String },
}
