//! Experiment grid: feature combinations crossed with model families.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::audio::AudioClip;
use crate::baselines::{CascadeEnsemble, DecisionRule, GmmClassifier};
use crate::error::{Error, Result};
use crate::eval::{self, argmax, singleton, EvalReport, LabelSet};
use crate::features::{extract, FeatureConfig, FeatureSet, MultiChannelFeatures};
use crate::labels::{LabelVector, Subclass};
use crate::model::{Checkpoint, ModelConfig, SharnnModel};
use crate::train::{self, TrainConfig, TrainOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Sharnn,
    Gmm,
    Cascade,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Sharnn, ModelKind::Gmm, ModelKind::Cascade];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Sharnn => "sharnn",
            ModelKind::Gmm => "gmm",
            ModelKind::Cascade => "cascade",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown model kind `{s}`")))
    }
}

/// Everything a grid cell needs besides data.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub features: FeatureConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub feature_set: FeatureSet,
    pub gmm_components: usize,
    pub cascade_rule: DecisionRule,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            features: FeatureConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            feature_set: FeatureSet::ThreeChannel,
            gmm_components: 4,
            cascade_rule: DecisionRule::MajorityVote,
        }
    }
}

/// Any trained classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Sharnn(SharnnModel),
    Gmm(GmmClassifier),
    Cascade(CascadeEnsemble),
}

/// One prediction: class scores, the multi-label set and the single label.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub scores: [f64; 8],
    pub set: LabelSet,
    pub label: Subclass,
}

impl Classifier {
    pub fn kind(&self) -> ModelKind {
        match self {
            Classifier::Sharnn(_) => ModelKind::Sharnn,
            Classifier::Gmm(_) => ModelKind::Gmm,
            Classifier::Cascade(_) => ModelKind::Cascade,
        }
    }

    pub fn feature_set(&self) -> FeatureSet {
        match self {
            Classifier::Sharnn(m) => m.feature_set,
            Classifier::Gmm(m) => m.feature_set,
            Classifier::Cascade(m) => m.feature_set,
        }
    }

    /// The attention model reports every class above 0.5 (argmax when none);
    /// the baselines report their single label.
    pub fn predict(&self, f: &MultiChannelFeatures) -> Result<Prediction> {
        Ok(match self {
            Classifier::Sharnn(m) => {
                let (scores, set, label) = train::predict(m, f)?;
                Prediction { scores, set, label }
            }
            Classifier::Gmm(m) => {
                let (scores, label) = m.predict(f)?;
                Prediction {
                    scores,
                    set: singleton(label),
                    label,
                }
            }
            Classifier::Cascade(m) => {
                let (scores, label) = m.predict(f)?;
                Prediction {
                    scores,
                    set: singleton(label),
                    label,
                }
            }
        })
    }

    pub fn evaluate(
        &self,
        samples: &[MultiChannelFeatures],
        split: &str,
        seed: u64,
    ) -> Result<EvalReport> {
        let preds = samples
            .iter()
            .map(|s| self.predict(s))
            .collect::<Result<Vec<_>>>()?;
        let truths = samples
            .iter()
            .map(|s| {
                s.label
                    .ok_or_else(|| Error::InvalidLabels(format!("sample `{}` has no label", s.id)))
            })
            .collect::<Result<Vec<LabelVector>>>()?;
        let sets: Vec<LabelSet> = preds.iter().map(|p| p.set).collect();
        let single: Vec<Subclass> = preds.iter().map(|p| p.label).collect();
        eval::evaluate(&sets, &single, &truths, split, seed)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        match self {
            Classifier::Sharnn(m) => m.to_checkpoint(),
            Classifier::Gmm(m) => m.to_checkpoint(),
            Classifier::Cascade(m) => m.to_checkpoint(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        match ck.kind() {
            Some(k) if k == ModelKind::Sharnn.name() => {
                Ok(Classifier::Sharnn(SharnnModel::from_checkpoint(ck)?))
            }
            Some(k) if k == ModelKind::Gmm.name() => {
                Ok(Classifier::Gmm(GmmClassifier::from_checkpoint(ck)?))
            }
            Some(k) if k == ModelKind::Cascade.name() => {
                Ok(Classifier::Cascade(CascadeEnsemble::from_checkpoint(ck)?))
            }
            other => Err(Error::BadCheckpoint(format!(
                "unknown model kind {other:?}"
            ))),
        }
    }
}

/// A trained classifier, plus the training history for the attention model.
#[derive(Debug, Clone, PartialEq)]
pub struct Fitted {
    pub classifier: Classifier,
    pub outcome: Option<TrainOutcome>,
}

pub fn fit(
    kind: ModelKind,
    train_set: &[MultiChannelFeatures],
    val_set: &[MultiChannelFeatures],
    feature_set: FeatureSet,
    cfg: &ExperimentConfig,
) -> Result<Fitted> {
    Ok(match kind {
        ModelKind::Sharnn => {
            let val = (!val_set.is_empty()).then_some(val_set);
            let outcome = train::train(train_set, val, feature_set, &cfg.train, &cfg.model)?;
            Fitted {
                classifier: Classifier::Sharnn(outcome.model.clone()),
                outcome: Some(outcome),
            }
        }
        ModelKind::Gmm => Fitted {
            classifier: Classifier::Gmm(GmmClassifier::fit(
                train_set,
                feature_set,
                cfg.gmm_components,
                cfg.train.seed,
            )?),
            outcome: None,
        },
        ModelKind::Cascade => Fitted {
            classifier: Classifier::Cascade(CascadeEnsemble::fit(
                train_set,
                val_set,
                feature_set,
                cfg.cascade_rule,
            )?),
            outcome: None,
        },
    })
}

/// Extracts features for labeled clips. Clips without syllables are
/// returned by id in the second list instead.
pub fn extract_all(
    clips: &[(AudioClip, LabelVector, String)],
    cfg: &FeatureConfig,
) -> Result<(Vec<MultiChannelFeatures>, Vec<String>)> {
    let mut kept = Vec::with_capacity(clips.len());
    let mut skipped = Vec::new();
    for (clip, label, id) in clips {
        let ex = extract(clip, Some(*label), cfg)?;
        if ex.is_usable() {
            let mut f = ex.features;
            f.id.clone_from(id);
            kept.push(f);
        } else {
            skipped.push(id.clone());
        }
    }
    Ok((kept, skipped))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub feature_set: FeatureSet,
    pub model: ModelKind,
    pub test_f1: f64,
    pub train_f1: f64,
}

/// Trains and scores every (feature set, model) pair in a fixed order.
pub fn run_grid(
    train_set: &[MultiChannelFeatures],
    val_set: &[MultiChannelFeatures],
    test_set: &[MultiChannelFeatures],
    feature_sets: &[FeatureSet],
    models: &[ModelKind],
    cfg: &ExperimentConfig,
) -> Result<Vec<CellResult>> {
    let mut out = Vec::new();
    for &fs in feature_sets {
        for &kind in models {
            let fitted = fit(kind, train_set, val_set, fs, cfg)?;
            let seed = cfg.train.seed;
            out.push(CellResult {
                feature_set: fs,
                model: kind,
                test_f1: fitted
                    .classifier
                    .evaluate(test_set, "test", seed)?
                    .sample_f1,
                train_f1: fitted
                    .classifier
                    .evaluate(train_set, "train", seed)?
                    .sample_f1,
            });
        }
    }
    Ok(out)
}

/// Tab-separated table: header `feature_set` then one column per model;
/// cells are held-out sample-F1.
pub fn grid_text(cells: &[CellResult]) -> String {
    let mut models: Vec<ModelKind> = Vec::new();
    let mut sets: Vec<FeatureSet> = Vec::new();
    for c in cells {
        if !models.contains(&c.model) {
            models.push(c.model);
        }
        if !sets.contains(&c.feature_set) {
            sets.push(c.feature_set);
        }
    }
    let mut s = String::from("feature_set");
    for m in &models {
        write!(s, "\t{m}").unwrap();
    }
    s.push('\n');
    for fs in sets {
        s.push_str(fs.name());
        for m in &models {
            match cells.iter().find(|c| c.feature_set == fs && c.model == *m) {
                Some(c) => write!(s, "\t{:.4}", c.test_f1).unwrap(),
                None => s.push_str("\t-"),
            }
        }
        s.push('\n');
    }
    s
}

/// Rank of `model` among the cells of one feature set: 1 + the number of
/// models scoring strictly higher.
pub fn rank_of(cells: &[CellResult], feature_set: FeatureSet, model: ModelKind) -> Option<usize> {
    let row: Vec<&CellResult> = cells
        .iter()
        .filter(|c| c.feature_set == feature_set)
        .collect();
    let me = row.iter().find(|c| c.model == model)?;
    Some(1 + row.iter().filter(|c| c.test_f1 > me.test_f1).count())
}

/// Best-scoring label when only scores are needed.
pub fn top_label(scores: &[f64; 8]) -> Subclass {
    Subclass::ALL[argmax(scores)]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(fs: FeatureSet, m: ModelKind, f1: f64) -> CellResult {
        CellResult {
            feature_set: fs,
            model: m,
            test_f1: f1,
            train_f1: 1.0,
        }
    }

    #[test]
    fn grid_table_and_rank() {
        let cells = vec![
            cell(FeatureSet::Time, ModelKind::Sharnn, 0.5),
            cell(FeatureSet::Time, ModelKind::Gmm, 0.6),
            cell(FeatureSet::ThreeChannel, ModelKind::Sharnn, 0.9),
            cell(FeatureSet::ThreeChannel, ModelKind::Gmm, 0.9),
        ];
        let text = grid_text(&cells);
        assert_eq!(
            text,
            "feature_set\tsharnn\tgmm\ntime_only\t0.5000\t0.6000\nthree_channel\t0.9000\t0.9000\n"
        );
        assert_eq!(
            rank_of(&cells, FeatureSet::Time, ModelKind::Sharnn),
            Some(2)
        );
        assert_eq!(
            rank_of(&cells, FeatureSet::ThreeChannel, ModelKind::Sharnn),
            Some(1)
        );
        assert_eq!(rank_of(&cells, FeatureSet::Mfcc, ModelKind::Sharnn), None);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
    }
}
