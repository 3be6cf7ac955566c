//! Mini-batch training of the attention model under the nested loss.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::{self, argmax, threshold_set, LabelSet};
use crate::features::{FeatureSet, MultiChannelFeatures};
use crate::labels::{LabelVector, Subclass, NUM_SUBCLASSES};
use crate::loss::{nested_loss_with_grad, sigmoid, AlphaWeights, LossSpec, Mixer};
use crate::model::{
    backward, forward, init_params, Array, Mode, ModelConfig, ModelParameters, SharnnModel,
    Standardizer,
};
use crate::optim::{Optimizer, OptimizerKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaMode {
    Fixed(f64),
    ClassBalanced,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub cbce_ratio: f64,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub alpha_mode: AlphaMode,
    pub mixer: Mixer,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            cbce_ratio: 0.1,
            learning_rate: 0.001,
            optimizer: OptimizerKind::Adadelta,
            alpha_mode: AlphaMode::ClassBalanced,
            mixer: Mixer::Mean,
            epochs: 50,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.cbce_ratio) {
            return Err(Error::InvalidConfig(format!(
                "cbce_ratio must be in [0, 1], got {}",
                self.cbce_ratio
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if let AlphaMode::Fixed(a) = self.alpha_mode {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "alpha must be positive, got {a}"
                )));
            }
        }
        Ok(())
    }

    pub fn loss_spec<'a>(
        &self,
        labels: impl IntoIterator<Item = &'a LabelVector>,
    ) -> Result<LossSpec> {
        let alpha = match self.alpha_mode {
            AlphaMode::Fixed(a) => AlphaWeights::uniform(a),
            AlphaMode::ClassBalanced => AlphaWeights::class_balanced(labels)?,
        };
        Ok(LossSpec {
            alpha,
            cbce_ratio: self.cbce_ratio,
            mixer: self.mixer,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_sample_f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: SharnnModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// One line per epoch: `epoch<TAB>train_loss<TAB>val_sample_f1`.
pub fn history_text(history: &[EpochRecord]) -> String {
    let mut s = String::new();
    for r in history {
        writeln!(s, "{}\t{}\t{}", r.epoch, r.train_loss, r.val_sample_f1).unwrap();
    }
    s
}

/// Mean nested loss over a batch and its exact gradient.
///
/// In train mode the dropout masks are drawn from `dropout_rng` in sample
/// order.
pub fn batch_loss_and_grad(
    params: &ModelParameters,
    inputs: &[&[Array]],
    labels: &[&LabelVector],
    spec: &LossSpec,
    mut dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<(f64, ModelParameters)> {
    if inputs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let scale = 1.0 / inputs.len() as f64;
    let mut grad = params.zeros_like();
    let mut total = 0.0;
    for (x, y) in inputs.iter().zip(labels) {
        let mode = match dropout_rng.as_deref_mut() {
            Some(rng) => Mode::Train(rng),
            None => Mode::Eval,
        };
        let trace = forward(params, x, mode)?;
        let (loss, dz) = nested_loss_with_grad(&trace.logits, y, spec);
        total += loss.total * scale;
        backward(
            params,
            &trace.hidden_states,
            &dz.map(|d| d * scale),
            &mut grad,
        );
    }
    Ok((total, grad))
}

/// Largest relative error between the analytic gradient and central
/// differences over every parameter. Relative error is
/// |a - n| / max(|a|, |n|, floor), so entries whose true gradient is below
/// `floor` are compared in absolute terms.
pub fn gradient_check(
    params: &ModelParameters,
    inputs: &[&[Array]],
    labels: &[&LabelVector],
    spec: &LossSpec,
    dropout_seed: Option<u64>,
    step: f64,
    floor: f64,
) -> Result<f64> {
    let loss_at = |p: &ModelParameters| -> Result<f64> {
        let mut rng = dropout_seed.map(ChaCha8Rng::seed_from_u64);
        Ok(batch_loss_and_grad(p, inputs, labels, spec, rng.as_mut())?.0)
    };
    let mut rng = dropout_seed.map(ChaCha8Rng::seed_from_u64);
    let (_, analytic) = batch_loss_and_grad(params, inputs, labels, spec, rng.as_mut())?;
    let analytic: Vec<f64> = analytic
        .arrays()
        .iter()
        .flat_map(|a| a.data.iter().copied())
        .collect();
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    let mut k = 0;
    let n_arrays = probe.arrays().len();
    for ai in 0..n_arrays {
        let len = probe.arrays()[ai].len();
        for i in 0..len {
            let orig = probe.arrays()[ai].data[i];
            probe.arrays_mut()[ai].data[i] = orig + step;
            let up = loss_at(&probe)?;
            probe.arrays_mut()[ai].data[i] = orig - step;
            let down = loss_at(&probe)?;
            probe.arrays_mut()[ai].data[i] = orig;
            let numeric = (up - down) / (2.0 * step);
            let a = analytic[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            worst = worst.max(rel);
            k += 1;
        }
    }
    Ok(worst)
}

pub fn probabilities(logits: &[f64; NUM_SUBCLASSES]) -> [f64; NUM_SUBCLASSES] {
    logits.map(sigmoid)
}

/// Multi-label set and single argmax label for one sample.
pub fn predict(
    model: &SharnnModel,
    f: &MultiChannelFeatures,
) -> Result<([f64; NUM_SUBCLASSES], LabelSet, Subclass)> {
    let probs = probabilities(&model.logits(f)?);
    Ok((probs, threshold_set(&probs), Subclass::ALL[argmax(&probs)]))
}

fn labels_of(samples: &[MultiChannelFeatures]) -> Result<Vec<LabelVector>> {
    samples
        .iter()
        .map(|s| {
            s.label
                .ok_or_else(|| Error::InvalidLabels(format!("sample `{}` has no label", s.id)))
        })
        .collect()
}

fn f1_on(params: &ModelParameters, inputs: &[Vec<Array>], labels: &[LabelVector]) -> Result<f64> {
    let mut preds = Vec::with_capacity(inputs.len());
    for x in inputs {
        let trace = forward(params, x, Mode::Eval)?;
        preds.push(threshold_set(&probabilities(&trace.logits)));
    }
    let truths: Vec<LabelSet> = labels.iter().map(eval::label_set).collect();
    eval::sample_f1(&preds, &truths)
}

/// Trains on `train` and keeps the parameters with the best validation
/// sample-F1 (later epochs win ties). Without a validation set the
/// training set is scored instead and the final parameters are kept.
pub fn train(
    train: &[MultiChannelFeatures],
    val: Option<&[MultiChannelFeatures]>,
    feature_set: FeatureSet,
    cfg: &TrainConfig,
    model_cfg: &ModelConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if train.len() < cfg.batch_size {
        return Err(Error::TooFewSamples(format!(
            "{} samples for batch size {}",
            train.len(),
            cfg.batch_size
        )));
    }
    let train_sel: Vec<MultiChannelFeatures> =
        train.iter().map(|f| feature_set.select(f)).collect();
    let train_labels = labels_of(&train_sel)?;
    let spec = cfg.loss_spec(&train_labels)?;

    let standardizer = Standardizer::fit(&train_sel)?;
    let model_cfg = ModelConfig {
        channel_input_dims: standardizer.dims(),
        ..model_cfg.clone()
    };
    let mut params = init_params(&model_cfg)?;
    let train_x = train_sel
        .iter()
        .map(|f| standardizer.apply(f))
        .collect::<Result<Vec<_>>>()?;
    let (val_x, val_labels, select) = match val {
        Some(v) if !v.is_empty() => {
            let sel: Vec<MultiChannelFeatures> = v.iter().map(|f| feature_set.select(f)).collect();
            (
                sel.iter()
                    .map(|f| standardizer.apply(f))
                    .collect::<Result<Vec<_>>>()?,
                labels_of(&sel)?,
                true,
            )
        }
        _ => (train_x.clone(), train_labels.clone(), false),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, &params);
    let mut order: Vec<usize> = (0..train_x.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best = (f64::NEG_INFINITY, 0, params.clone());
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let xs: Vec<&[Array]> = batch.iter().map(|&i| train_x[i].as_slice()).collect();
            let ys: Vec<&LabelVector> = batch.iter().map(|&i| &train_labels[i]).collect();
            let (loss, grad) = batch_loss_and_grad(&params, &xs, &ys, &spec, Some(&mut rng))?;
            epoch_loss += loss * batch.len() as f64;
            opt.step(&mut params, &grad);
        }
        let train_loss = epoch_loss / train_x.len() as f64;
        let val_sample_f1 = f1_on(&params, &val_x, &val_labels)?;
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_sample_f1,
        });
        if val_sample_f1 >= best.0 || !select {
            best = (val_sample_f1, epoch, params.clone());
        }
    }
    if !best.2.is_finite() {
        return Err(Error::InvalidConfig(
            "training diverged to non-finite parameters".into(),
        ));
    }
    Ok(TrainOutcome {
        model: SharnnModel {
            params: best.2,
            standardizer,
            feature_set,
        },
        history,
        best_epoch: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn tiny_cfg(seed: u64, dropout: f64) -> ModelConfig {
        ModelConfig {
            hidden_size: 8,
            boom_dim: 16,
            attention_dim: 8,
            dropout,
            channel_input_dims: vec![5, 5, 80],
            seed,
            ..ModelConfig::default()
        }
    }

    fn random_inputs(rng: &mut ChaCha8Rng) -> Vec<Array> {
        [5usize, 5, 80]
            .iter()
            .map(|&d| {
                let t = rng.random_range(1..=4);
                Array::from_vec(
                    &[t, d],
                    (0..t * d).map(|_| rng.random_range(-1.5..1.5)).collect(),
                )
            })
            .collect()
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..3 {
            let params = init_params(&tiny_cfg(seed, 0.2)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let xs: Vec<Vec<Array>> = (0..2).map(|_| random_inputs(&mut rng)).collect();
            let ys = [
                LabelVector::single(Subclass::Alarm),
                LabelVector::from_classes(&[Subclass::Panic, Subclass::Distress]).unwrap(),
            ];
            let spec = LossSpec {
                alpha: AlphaWeights::uniform(1.7),
                cbce_ratio: 0.3,
                mixer: Mixer::Mean,
            };
            let xr: Vec<&[Array]> = xs.iter().map(Vec::as_slice).collect();
            let yr: Vec<&LabelVector> = ys.iter().collect();
            let err = gradient_check(&params, &xr, &yr, &spec, Some(seed), 1e-5, 1e-6).unwrap();
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn duplicated_sample_matches_single() {
        let params = init_params(&tiny_cfg(1, 0.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_inputs(&mut rng);
        let y = LabelVector::single(Subclass::Fear);
        let spec = LossSpec {
            alpha: AlphaWeights::uniform(1.0),
            cbce_ratio: 0.1,
            mixer: Mixer::Mean,
        };
        let (l1, g1) = batch_loss_and_grad(&params, &[&x], &[&y], &spec, None).unwrap();
        let (l2, g2) = batch_loss_and_grad(&params, &[&x, &x], &[&y, &y], &spec, None).unwrap();
        assert!((l1 - l2).abs() < 1e-14);
        for (a, b) in g1.arrays().iter().zip(g2.arrays()) {
            for (u, v) in a.data.iter().zip(&b.data) {
                assert!((u - v).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn saturated_all_positive_has_flat_gradient() {
        let mut params = init_params(&tiny_cfg(2, 0.0)).unwrap();
        params.boom_down.weight.data.fill(0.0);
        params.boom_down.bias.data.fill(20.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_inputs(&mut rng);
        let y = LabelVector::from_subclasses([true; 8]).unwrap();
        let spec = LossSpec {
            alpha: AlphaWeights::uniform(1.0),
            cbce_ratio: 1.0,
            mixer: Mixer::Mean,
        };
        let (_, g) = batch_loss_and_grad(&params, &[&x], &[&y], &spec, None).unwrap();
        let norm: f64 = g
            .arrays()
            .iter()
            .flat_map(|a| a.data.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        assert!(norm < 1e-6, "{norm}");
    }

    #[test]
    fn history_format() {
        let h = [EpochRecord {
            epoch: 1,
            train_loss: 0.5,
            val_sample_f1: 0.25,
        }];
        assert_eq!(history_text(&h), "1\t0.5\t0.25\n");
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            cbce_ratio: 1.5,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            alpha_mode: AlphaMode::Fixed(0.0),
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }
}
