//! One-vs-rest cascade: one binary classifier per subclass.

use std::fmt;
use std::str::FromStr;

use super::{summary_vector, LogisticRegression, VectorScaler};
use crate::error::{Error, Result};
use crate::features::{FeatureSet, MultiChannelFeatures};
use crate::labels::{Subclass, NUM_SUBCLASSES};
use crate::model::{Array, Checkpoint};

pub const CASCADE_KIND: &str = "cascade";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionRule {
    MajorityVote,
    WeightedInterpolation,
}

impl fmt::Display for DecisionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecisionRule::MajorityVote => "majority_vote",
            DecisionRule::WeightedInterpolation => "weighted_interpolation",
        })
    }
}

impl FromStr for DecisionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "majority_vote" | "majority" => Ok(Self::MajorityVote),
            "weighted_interpolation" | "weighted" => Ok(Self::WeightedInterpolation),
            other => Err(Error::InvalidConfig(format!(
                "unknown decision rule `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeEnsemble {
    pub feature_set: FeatureSet,
    pub scaler: VectorScaler,
    pub models: Vec<LogisticRegression>,
    pub rule: DecisionRule,
    /// Per-model weights for weighted interpolation, summing to 1.
    pub weights: [f64; NUM_SUBCLASSES],
}

/// Picks the label from per-model probabilities.
///
/// Majority vote: a model votes for its class when p > 0.5; with one model
/// per class every voter ties at one vote, so the most probable voter wins,
/// and with no voters the most probable class wins. Weighted: argmax of
/// w_i * p_i. Ties go to the lowest index.
pub fn decide(
    probs: &[f64; NUM_SUBCLASSES],
    rule: DecisionRule,
    weights: &[f64; NUM_SUBCLASSES],
) -> Subclass {
    let score: [f64; NUM_SUBCLASSES] = match rule {
        DecisionRule::MajorityVote => {
            let votes = probs.map(|p| u8::from(p > 0.5));
            let top = *votes.iter().max().unwrap();
            std::array::from_fn(|i| {
                if votes[i] == top {
                    probs[i]
                } else {
                    f64::NEG_INFINITY
                }
            })
        }
        DecisionRule::WeightedInterpolation => std::array::from_fn(|i| weights[i] * probs[i]),
    };
    Subclass::ALL[crate::eval::argmax(&score)]
}

fn binary_f1(pred: &[bool], truth: &[bool]) -> f64 {
    let tp = pred.iter().zip(truth).filter(|(p, t)| **p && **t).count();
    let fp = pred.iter().zip(truth).filter(|(p, t)| **p && !**t).count();
    let fns = pred.iter().zip(truth).filter(|(p, t)| !**p && **t).count();
    let denom = 2 * tp + fp + fns;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

impl CascadeEnsemble {
    /// Trains the 8 one-vs-rest models. Model i sees positives exactly where
    /// subclass bit i is set. Interpolation weights are each model's binary
    /// F1 on `val` (the training set when `val` is empty), normalized; uniform
    /// when every F1 is zero.
    pub fn fit(
        train: &[MultiChannelFeatures],
        val: &[MultiChannelFeatures],
        feature_set: FeatureSet,
        rule: DecisionRule,
    ) -> Result<Self> {
        let sel: Vec<MultiChannelFeatures> = train.iter().map(|s| feature_set.select(s)).collect();
        let raw = sel.iter().map(summary_vector).collect::<Result<Vec<_>>>()?;
        let scaler = VectorScaler::fit(&raw)?;
        let x = raw
            .iter()
            .map(|v| scaler.apply(v))
            .collect::<Result<Vec<_>>>()?;
        let labels = sel
            .iter()
            .map(|s| {
                s.label
                    .ok_or_else(|| Error::InvalidLabels(format!("sample `{}` has no label", s.id)))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut models = Vec::with_capacity(NUM_SUBCLASSES);
        for c in Subclass::ALL {
            let y: Vec<bool> = labels.iter().map(|l| l.has(c)).collect();
            if !y.contains(&true) || !y.contains(&false) {
                return Err(Error::MissingClassSamples(format!(
                    "{} needs positive and negative samples",
                    c.name()
                )));
            }
            models.push(LogisticRegression::fit(&x, &y)?);
        }
        let mut ens = Self {
            feature_set,
            scaler,
            models,
            rule,
            weights: [1.0 / NUM_SUBCLASSES as f64; NUM_SUBCLASSES],
        };

        let val = if val.is_empty() { train } else { val };
        let probs = val
            .iter()
            .map(|s| ens.probabilities(s))
            .collect::<Result<Vec<_>>>()?;
        let mut f1 = [0.0; NUM_SUBCLASSES];
        for (c, slot) in f1.iter_mut().enumerate() {
            let pred: Vec<bool> = probs.iter().map(|p| p[c] > 0.5).collect();
            let truth: Vec<bool> = val
                .iter()
                .map(|s| s.label.is_some_and(|l| l.has(Subclass::ALL[c])))
                .collect();
            *slot = binary_f1(&pred, &truth);
        }
        let total: f64 = f1.iter().sum();
        if total > 0.0 {
            ens.weights = f1.map(|f| f / total);
        }
        Ok(ens)
    }

    pub fn probabilities(&self, f: &MultiChannelFeatures) -> Result<[f64; NUM_SUBCLASSES]> {
        if self.models.len() != NUM_SUBCLASSES {
            return Err(Error::NotFitted);
        }
        let v = self
            .scaler
            .apply(&summary_vector(&self.feature_set.select(f))?)?;
        Ok(std::array::from_fn(|c| self.models[c].probability(&v)))
    }

    pub fn predict(&self, f: &MultiChannelFeatures) -> Result<([f64; NUM_SUBCLASSES], Subclass)> {
        let p = self.probabilities(f)?;
        Ok((p, decide(&p, self.rule, &self.weights)))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(CASCADE_KIND);
        ck.set("feature_set", self.feature_set);
        ck.set("rule", self.rule);
        self.scaler.write_into(&mut ck);
        ck.push(
            "weights",
            Array::from_vec(&[NUM_SUBCLASSES], self.weights.to_vec()),
        );
        for (c, m) in self.models.iter().enumerate() {
            let mut wb = m.weights.clone();
            wb.push(m.bias);
            ck.push(format!("model{c}"), Array::from_vec(&[wb.len()], wb));
        }
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.expect_kind(CASCADE_KIND)?;
        let feature_set = ck.require("feature_set")?.parse()?;
        let rule = ck.require("rule")?.parse()?;
        let scaler = VectorScaler::read_from(ck)?;
        let w = ck.array("weights")?;
        let weights: [f64; NUM_SUBCLASSES] = w
            .data
            .clone()
            .try_into()
            .map_err(|_| Error::BadCheckpoint("weights must have 8 entries".into()))?;
        let mut models = Vec::with_capacity(NUM_SUBCLASSES);
        for c in 0..NUM_SUBCLASSES {
            let a = ck.array(&format!("model{c}"))?;
            if a.len() != scaler.mean.len() + 1 {
                return Err(Error::BadCheckpoint(format!(
                    "model{c} has {} values",
                    a.len()
                )));
            }
            let (wv, b) = a.data.split_at(a.len() - 1);
            models.push(LogisticRegression {
                weights: wv.to_vec(),
                bias: b[0],
            });
        }
        Ok(Self {
            feature_set,
            scaler,
            models,
            rule,
            weights,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn majority_examples() {
        let u = [0.125; 8];
        let mut p = [0.1; 8];
        p[Subclass::Panic.index()] = 0.8;
        assert_eq!(decide(&p, DecisionRule::MajorityVote, &u), Subclass::Panic);
        p[Subclass::Fear.index()] = 0.9;
        p[Subclass::Panic.index()] = 0.7;
        assert_eq!(decide(&p, DecisionRule::MajorityVote, &u), Subclass::Fear);
        let none = [0.2, 0.1, 0.3, 0.1, 0.1, 0.45, 0.1, 0.1];
        assert_eq!(
            decide(&none, DecisionRule::MajorityVote, &u),
            Subclass::Alarm
        );
    }

    #[test]
    fn uniform_weights_reduce_to_argmax() {
        let p = [0.2, 0.6, 0.3, 0.1, 0.7, 0.45, 0.1, 0.1];
        assert_eq!(
            decide(&p, DecisionRule::WeightedInterpolation, &[0.125; 8]),
            Subclass::Fear
        );
        let mut w = [0.0; 8];
        w[1] = 1.0;
        assert_eq!(
            decide(&p, DecisionRule::WeightedInterpolation, &w),
            Subclass::Distress
        );
    }

    #[test]
    fn rule_names_round_trip() {
        for r in [
            DecisionRule::MajorityVote,
            DecisionRule::WeightedInterpolation,
        ] {
            assert_eq!(r.to_string().parse::<DecisionRule>().unwrap(), r);
        }
    }
}
