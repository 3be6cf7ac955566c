//! Laying-hen vocalization recognition.
//!
//! The pipeline runs from raw 16 kHz mono audio to multi-label call-type
//! predictions:
//!
//! 1. [`audio`] loads and frames recordings.
//! 2. [`vad`] extracts vocal syllables.
//! 3. [`features`] computes time-domain, formant/spectral and cepstral
//!    (MFCC + LFCC) channels.
//! 4. [`model`] is the attention-pooled recurrent classifier, trained by
//!    [`train`] with the nested master-class loss in [`loss`].
//! 5. [`baselines`] and [`eval`] provide the comparison models and metrics,
//!    and [`experiment`] ties everything into the experiment grid.
//!
//! [`synth`] generates labeled synthetic calls for desk-scale runs.

pub mod audio;
pub mod baselines;
pub mod config;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod features;
pub mod labels;
pub mod loss;
pub mod manifest;
pub mod model;
pub mod optim;
pub mod synth;
pub mod train;
pub mod vad;

pub use error::{Error, Result};
pub use labels::{LabelVector, MasterClass, Subclass};
