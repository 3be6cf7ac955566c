//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored; unknown keys are rejected.
//! Every key has a default, so an empty file is a valid configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::experiment::ExperimentConfig;
use crate::train::AlphaMode;

/// Keys in serialization order.
pub const KEYS: &[&str] = &[
    "experiment",
    "seed",
    "hidden_size",
    "boom_dim",
    "num_layers",
    "dropout",
    "batch_size",
    "epochs",
    "learning_rate",
    "optimizer",
    "cbce_ratio",
    "alpha",
    "mixer",
    "energy_threshold",
    "entropy_threshold",
    "prominence_threshold",
    "min_syllable_ms",
    "merge_gap_ms",
    "frame_ms",
    "hop_ms",
    "nfft",
    "num_filters",
    "num_coeffs",
    "mel_divisor",
    "cepstral_pool",
    "gmm_components",
    "cascade_rule",
];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad value `{value}` for `{key}`")))
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.experiment.train.seed
    }

    /// Sets the one run seed used for initialization, shuffling and dropout.
    pub fn set_seed(&mut self, seed: u64) {
        self.experiment.train.seed = seed;
        self.experiment.model.seed = seed;
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let e = &mut self.experiment;
        let v = value.trim();
        match key {
            "experiment" => e.feature_set = v.parse()?,
            "seed" => self.set_seed(parse_value(key, v)?),
            "hidden_size" => {
                e.model.hidden_size = parse_value(key, v)?;
                e.model.attention_dim = e.model.hidden_size;
            }
            "boom_dim" => e.model.boom_dim = parse_value(key, v)?,
            "num_layers" => e.model.num_layers = parse_value(key, v)?,
            "dropout" => e.model.dropout = parse_value(key, v)?,
            "batch_size" => e.train.batch_size = parse_value(key, v)?,
            "epochs" => e.train.epochs = parse_value(key, v)?,
            "learning_rate" => e.train.learning_rate = parse_value(key, v)?,
            "optimizer" => e.train.optimizer = v.parse()?,
            "cbce_ratio" => e.train.cbce_ratio = parse_value(key, v)?,
            "alpha" => {
                e.train.alpha_mode = if v == "class_balanced" {
                    AlphaMode::ClassBalanced
                } else {
                    AlphaMode::Fixed(parse_value(key, v)?)
                }
            }
            "mixer" => e.train.mixer = v.parse()?,
            "energy_threshold" => e.features.vad.energy_threshold_ratio = parse_value(key, v)?,
            "entropy_threshold" => e.features.vad.entropy_threshold = parse_value(key, v)?,
            "prominence_threshold" => e.features.vad.prominence_threshold = parse_value(key, v)?,
            "min_syllable_ms" => e.features.vad.min_syllable_ms = parse_value(key, v)?,
            "merge_gap_ms" => e.features.vad.merge_gap_ms = parse_value(key, v)?,
            "frame_ms" => {
                e.features.frame_ms = parse_value(key, v)?;
                e.features.vad.frame_ms = e.features.frame_ms;
            }
            "hop_ms" => {
                e.features.hop_ms = parse_value(key, v)?;
                e.features.vad.hop_ms = e.features.hop_ms;
            }
            "nfft" => e.features.cepstral.nfft = parse_value(key, v)?,
            "num_filters" => e.features.cepstral.num_filters = parse_value(key, v)?,
            "num_coeffs" => e.features.cepstral.num_coeffs = parse_value(key, v)?,
            "mel_divisor" => e.features.cepstral.mel_divisor = parse_value(key, v)?,
            "cepstral_pool" => e.features.cepstral_pool = parse_value(key, v)?,
            "gmm_components" => e.gmm_components = parse_value(key, v)?,
            "cascade_rule" => e.cascade_rule = v.parse()?,
            other => return Err(Error::InvalidConfig(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let e = &self.experiment;
        Some(match key {
            "experiment" => e.feature_set.to_string(),
            "seed" => self.seed().to_string(),
            "hidden_size" => e.model.hidden_size.to_string(),
            "boom_dim" => e.model.boom_dim.to_string(),
            "num_layers" => e.model.num_layers.to_string(),
            "dropout" => e.model.dropout.to_string(),
            "batch_size" => e.train.batch_size.to_string(),
            "epochs" => e.train.epochs.to_string(),
            "learning_rate" => e.train.learning_rate.to_string(),
            "optimizer" => e.train.optimizer.to_string(),
            "cbce_ratio" => e.train.cbce_ratio.to_string(),
            "alpha" => match e.train.alpha_mode {
                AlphaMode::ClassBalanced => "class_balanced".into(),
                AlphaMode::Fixed(a) => a.to_string(),
            },
            "mixer" => e.train.mixer.to_string(),
            "energy_threshold" => e.features.vad.energy_threshold_ratio.to_string(),
            "entropy_threshold" => e.features.vad.entropy_threshold.to_string(),
            "prominence_threshold" => e.features.vad.prominence_threshold.to_string(),
            "min_syllable_ms" => e.features.vad.min_syllable_ms.to_string(),
            "merge_gap_ms" => e.features.vad.merge_gap_ms.to_string(),
            "frame_ms" => e.features.frame_ms.to_string(),
            "hop_ms" => e.features.hop_ms.to_string(),
            "nfft" => e.features.cepstral.nfft.to_string(),
            "num_filters" => e.features.cepstral.num_filters.to_string(),
            "num_coeffs" => e.features.cepstral.num_coeffs.to_string(),
            "mel_divisor" => e.features.cepstral.mel_divisor.to_string(),
            "cepstral_pool" => e.features.cepstral_pool.to_string(),
            "gmm_components" => e.gmm_components.to_string(),
            "cascade_rule" => e.cascade_rule.to_string(),
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        e.model.validate()?;
        e.train.validate()?;
        e.features.vad.validate()?;
        let f = &e.features;
        if !(f.frame_ms > 0.0 && f.hop_ms > 0.0) {
            return Err(Error::InvalidConfig(
                "frame_ms and hop_ms must be positive".into(),
            ));
        }
        let c = &f.cepstral;
        if c.nfft == 0
            || c.num_coeffs == 0
            || c.num_coeffs > c.num_filters
            || c.mel_divisor.is_nan()
            || c.mel_divisor <= 0.0
        {
            return Err(Error::InvalidConfig(
                "need nfft > 0, 0 < num_coeffs <= num_filters, mel_divisor > 0".into(),
            ));
        }
        if e.features.cepstral_pool == 0 {
            return Err(Error::InvalidConfig(
                "cepstral_pool must be at least 1".into(),
            ));
        }
        if e.gmm_components == 0 {
            return Err(Error::InvalidConfig(
                "gmm_components must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected `key = value`", n + 1))
            })?;
            cfg.set(k.trim(), v)
                .map_err(|e| Error::InvalidConfig(format!("line {}: {e}", n + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for k in KEYS {
            writeln!(s, "{k} = {}", self.get(k).unwrap()).unwrap();
        }
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSet;
    use crate::optim::OptimizerKind;
    use proptest::prelude::*;

    #[test]
    fn defaults_match_the_baseline_hyperparameters() {
        let c = RunConfig::parse("").unwrap();
        let e = &c.experiment;
        assert_eq!(e.model.hidden_size, 1024);
        assert_eq!(e.model.boom_dim, 512);
        assert_eq!(e.train.batch_size, 16);
        assert_eq!(e.train.cbce_ratio, 0.1);
        assert_eq!(e.model.dropout, 0.2);
        assert_eq!(e.train.learning_rate, 0.001);
        assert_eq!(e.train.optimizer, OptimizerKind::Adadelta);
        assert_eq!(e.feature_set, FeatureSet::ThreeChannel);
    }

    #[test]
    fn parses_comments_and_rejects_unknown_keys() {
        let c = RunConfig::parse(
            "# desk\nhidden_size = 32 # small\nexperiment=freq_only:mfcc\nalpha = 2.5\n",
        )
        .unwrap();
        assert_eq!(c.experiment.model.attention_dim, 32);
        assert_eq!(c.experiment.feature_set, FeatureSet::Mfcc);
        assert_eq!(c.experiment.train.alpha_mode, AlphaMode::Fixed(2.5));
        assert!(RunConfig::parse("hiden_size = 3").is_err());
        assert!(RunConfig::parse("dropout = 1.0").is_err());
        assert!(RunConfig::parse("hidden_size").is_err());
        assert!(RunConfig::parse("epochs = many").is_err());
    }

    #[test]
    fn every_key_has_a_getter() {
        let c = RunConfig::default();
        for k in KEYS {
            let v = c.get(k).unwrap();
            let mut d = RunConfig::default();
            d.set(k, &v).unwrap();
            assert_eq!(d, c, "{k}");
        }
    }

    proptest! {
        #[test]
        fn parse_serialize_round_trip(
            hidden in 1usize..2048,
            dropout in 0.0f64..0.99,
            lr in 1e-6f64..1.0,
            seed in any::<u64>(),
            pool in 1usize..20,
            exp in 0usize..6,
            alpha in prop::option::of(0.01f64..100.0),
        ) {
            let mut text = format!(
                "hidden_size={hidden}\ndropout={dropout}\nlearning_rate={lr}\nseed={seed}\ncepstral_pool={pool}\nexperiment={}\n",
                FeatureSet::ALL[exp]
            );
            if let Some(a) = alpha {
                text += &format!("alpha={a}\n");
            }
            let c = RunConfig::parse(&text).unwrap();
            let again = RunConfig::parse(&c.to_text()).unwrap();
            prop_assert_eq!(&again, &c);
            prop_assert_eq!(again.to_text(), c.to_text());
        }
    }
}
