//! Shared fixtures for the pipeline benchmarks.

use hencall::features::{extract, FeatureConfig, MultiChannelFeatures};
use hencall::synth::{generate_examples, SynthClip};

/// Two synthetic clips per class.
pub fn clips(seed: u64) -> Vec<SynthClip> {
    generate_examples(2, seed).expect("synthetic clips")
}

/// Features of [`clips`] under the desk-scale cepstral pooling.
pub fn features(seed: u64) -> (FeatureConfig, Vec<MultiChannelFeatures>) {
    let cfg = FeatureConfig {
        cepstral_pool: 10,
        ..FeatureConfig::default()
    };
    let feats = clips(seed)
        .iter()
        .map(|c| {
            extract(&c.clip, Some(c.labels), &cfg)
                .expect("features")
                .features
        })
        .collect();
    (cfg, feats)
}
