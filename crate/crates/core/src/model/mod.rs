//! Attention-pooled recurrent classifier.
//!
//! Per channel: a linear feature layer, stacked LSTM layers and a single-head
//! attention pool whose only projection acts on the query. The pooled
//! contexts are concatenated and passed through the Boom block, which expands
//! to `boom_dim` and projects down to the 8 subclass logits.

mod array;
mod checkpoint;
mod forward;
mod standardize;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use array::Array;
pub(crate) use array::{matvec_acc, matvec_t_acc, outer_acc};
pub use checkpoint::Checkpoint;
pub use forward::{
    backward, boom, encode_channel, forward, gelu, gelu_grad, sha_attention, ForwardCache,
    ForwardTrace, Mode,
};
pub use standardize::Standardizer;

use crate::error::{Error, Result};
use crate::features::{FeatureSet, MultiChannelFeatures};
use crate::labels::NUM_SUBCLASSES;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub hidden_size: usize,
    pub boom_dim: usize,
    pub num_classes: usize,
    pub dropout: f64,
    pub channel_input_dims: Vec<usize>,
    /// Query dimension. Keys are raw hidden states, so this equals `hidden_size`.
    pub attention_dim: usize,
    pub num_layers: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_size: 1024,
            boom_dim: 512,
            num_classes: NUM_SUBCLASSES,
            dropout: 0.2,
            channel_input_dims: vec![5, 5, 80],
            attention_dim: 1024,
            num_layers: 1,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.hidden_size == 0 || self.boom_dim == 0 || self.num_layers == 0 {
            return bad("hidden_size, boom_dim and num_layers must be at least 1".into());
        }
        if self.num_classes != NUM_SUBCLASSES {
            return bad(format!(
                "num_classes must be {NUM_SUBCLASSES}, got {}",
                self.num_classes
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if self.channel_input_dims.is_empty() || self.channel_input_dims.contains(&0) {
            return bad("every channel needs at least one input column".into());
        }
        if self.attention_dim != self.hidden_size {
            return bad(format!(
                "attention_dim ({}) must equal hidden_size ({})",
                self.attention_dim, self.hidden_size
            ));
        }
        Ok(())
    }

    pub fn num_channels(&self) -> usize {
        self.channel_input_dims.len()
    }

    pub fn context_dim(&self) -> usize {
        self.num_channels() * self.hidden_size
    }

    pub fn to_meta(&self, ck: &mut Checkpoint) {
        ck.set("hidden_size", self.hidden_size);
        ck.set("boom_dim", self.boom_dim);
        ck.set("num_classes", self.num_classes);
        ck.set("dropout", self.dropout);
        let dims: Vec<String> = self
            .channel_input_dims
            .iter()
            .map(|d| d.to_string())
            .collect();
        ck.set("channel_input_dims", dims.join(","));
        ck.set("attention_dim", self.attention_dim);
        ck.set("num_layers", self.num_layers);
        ck.set("seed", self.seed);
    }

    pub fn from_meta(ck: &Checkpoint) -> Result<Self> {
        let dims = ck
            .require("channel_input_dims")?
            .split(',')
            .map(|d| {
                d.parse()
                    .map_err(|_| Error::BadCheckpoint(format!("bad channel dim `{d}`")))
            })
            .collect::<Result<Vec<usize>>>()?;
        let cfg = Self {
            hidden_size: ck.parse("hidden_size")?,
            boom_dim: ck.parse("boom_dim")?,
            num_classes: ck.parse("num_classes")?,
            dropout: ck.parse("dropout")?,
            channel_input_dims: dims,
            attention_dim: ck.parse("attention_dim")?,
            num_layers: ck.parse("num_layers")?,
            seed: ck.parse("seed")?,
        };
        cfg.validate()
            .map_err(|e| Error::BadCheckpoint(e.to_string()))?;
        Ok(cfg)
    }
}

/// Row-major `weight` of shape (out x in) and `bias` of length out.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array,
    pub bias: Array,
}

impl Dense {
    fn init(rng: &mut ChaCha8Rng, input: usize, output: usize) -> Self {
        Self {
            weight: uniform(rng, &[output, input], input),
            bias: Array::zeros(&[output]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.bias.data.clone();
        matvec_acc(&self.weight, x, &mut out);
        out
    }
}

/// Gate blocks are stacked in the order input, forget, cell, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    pub w_input: Array,
    pub w_recurrent: Array,
    pub bias: Array,
}

impl LstmLayer {
    fn init(rng: &mut ChaCha8Rng, input: usize, hidden: usize) -> Self {
        let w_input = uniform(rng, &[4 * hidden, input], input);
        let w_recurrent = uniform(rng, &[4 * hidden, hidden], hidden);
        let mut bias = Array::zeros(&[4 * hidden]);
        bias.data[hidden..2 * hidden].fill(1.0);
        Self {
            w_input,
            w_recurrent,
            bias,
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.w_recurrent.cols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    pub feature: Dense,
    pub lstm: Vec<LstmLayer>,
    /// Square query projection applied to the last hidden state.
    pub query: Array,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub config: ModelConfig,
    pub channels: Vec<ChannelParams>,
    pub boom_up: Dense,
    /// Boom down-projection to the 8 logits; this is the output head.
    pub boom_down: Dense,
}

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> Array {
    let k = 1.0 / (fan_in as f64).sqrt();
    let n = shape.iter().product();
    Array::from_vec(shape, (0..n).map(|_| rng.random_range(-k..k)).collect())
}

pub fn init_params(cfg: &ModelConfig) -> Result<ModelParameters> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let h = cfg.hidden_size;
    let channels = cfg
        .channel_input_dims
        .iter()
        .map(|&d| ChannelParams {
            feature: Dense::init(&mut rng, d, h),
            lstm: (0..cfg.num_layers)
                .map(|_| LstmLayer::init(&mut rng, h, h))
                .collect(),
            query: uniform(&mut rng, &[h, h], h),
        })
        .collect();
    let boom_up = Dense::init(&mut rng, cfg.context_dim(), cfg.boom_dim);
    let boom_down = Dense::init(&mut rng, cfg.boom_dim, cfg.num_classes);
    Ok(ModelParameters {
        config: cfg.clone(),
        channels,
        boom_up,
        boom_down,
    })
}

impl ModelParameters {
    /// Same shapes, all zeros. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        out.for_each_mut(|_, a| a.data.fill(0.0));
        out
    }

    /// Visits every array with its checkpoint name, in a fixed order.
    pub fn for_each(&self, mut f: impl FnMut(String, &Array)) {
        for (c, ch) in self.channels.iter().enumerate() {
            f(format!("c{c}.feature.weight"), &ch.feature.weight);
            f(format!("c{c}.feature.bias"), &ch.feature.bias);
            for (l, layer) in ch.lstm.iter().enumerate() {
                f(format!("c{c}.lstm{l}.w_input"), &layer.w_input);
                f(format!("c{c}.lstm{l}.w_recurrent"), &layer.w_recurrent);
                f(format!("c{c}.lstm{l}.bias"), &layer.bias);
            }
            f(format!("c{c}.query"), &ch.query);
        }
        f("boom.up.weight".into(), &self.boom_up.weight);
        f("boom.up.bias".into(), &self.boom_up.bias);
        f("boom.down.weight".into(), &self.boom_down.weight);
        f("boom.down.bias".into(), &self.boom_down.bias);
    }

    pub fn for_each_mut(&mut self, mut f: impl FnMut(String, &mut Array)) {
        for (c, ch) in self.channels.iter_mut().enumerate() {
            f(format!("c{c}.feature.weight"), &mut ch.feature.weight);
            f(format!("c{c}.feature.bias"), &mut ch.feature.bias);
            for (l, layer) in ch.lstm.iter_mut().enumerate() {
                f(format!("c{c}.lstm{l}.w_input"), &mut layer.w_input);
                f(format!("c{c}.lstm{l}.w_recurrent"), &mut layer.w_recurrent);
                f(format!("c{c}.lstm{l}.bias"), &mut layer.bias);
            }
            f(format!("c{c}.query"), &mut ch.query);
        }
        f("boom.up.weight".into(), &mut self.boom_up.weight);
        f("boom.up.bias".into(), &mut self.boom_up.bias);
        f("boom.down.weight".into(), &mut self.boom_down.weight);
        f("boom.down.bias".into(), &mut self.boom_down.bias);
    }

    pub fn arrays_mut(&mut self) -> Vec<&mut Array> {
        let mut out: Vec<&mut Array> = Vec::new();
        for ch in &mut self.channels {
            out.push(&mut ch.feature.weight);
            out.push(&mut ch.feature.bias);
            for layer in &mut ch.lstm {
                out.push(&mut layer.w_input);
                out.push(&mut layer.w_recurrent);
                out.push(&mut layer.bias);
            }
            out.push(&mut ch.query);
        }
        out.push(&mut self.boom_up.weight);
        out.push(&mut self.boom_up.bias);
        out.push(&mut self.boom_down.weight);
        out.push(&mut self.boom_down.bias);
        out
    }

    pub fn arrays(&self) -> Vec<&Array> {
        let mut out = Vec::new();
        for ch in &self.channels {
            out.push(&ch.feature.weight);
            out.push(&ch.feature.bias);
            for layer in &ch.lstm {
                out.push(&layer.w_input);
                out.push(&layer.w_recurrent);
                out.push(&layer.bias);
            }
            out.push(&ch.query);
        }
        out.extend([
            &self.boom_up.weight,
            &self.boom_up.bias,
            &self.boom_down.weight,
            &self.boom_down.bias,
        ]);
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.arrays().iter().map(|a| a.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.arrays().iter().all(|a| a.is_finite())
    }

    /// Adds `scale * other` elementwise.
    pub fn add_scaled(&mut self, other: &Self, scale: f64) {
        for (a, b) in self.arrays_mut().into_iter().zip(other.arrays()) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += scale * y;
            }
        }
    }

    pub fn write_into(&self, ck: &mut Checkpoint) {
        self.config.to_meta(ck);
        self.for_each(|name, a| ck.push(name, a.clone()));
    }

    pub fn read_from(ck: &Checkpoint) -> Result<Self> {
        let cfg = ModelConfig::from_meta(ck)?;
        let mut params = init_params(&cfg)?;
        let mut err = None;
        params.for_each_mut(|name, a| {
            if err.is_some() {
                return;
            }
            match ck.array(&name) {
                Ok(stored) if stored.shape == a.shape => a.data.clone_from(&stored.data),
                Ok(stored) => {
                    err = Some(Error::BadCheckpoint(format!(
                        "array `{name}` has shape {:?}, expected {:?}",
                        stored.shape, a.shape
                    )))
                }
                Err(e) => err = Some(e),
            }
        });
        match err {
            Some(e) => Err(e),
            None if params.is_finite() => Ok(params),
            None => Err(Error::BadCheckpoint("non-finite parameter".into())),
        }
    }
}

/// A trained classifier: parameters plus the input normalization and the
/// feature channels it consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct SharnnModel {
    pub params: ModelParameters,
    pub standardizer: Standardizer,
    pub feature_set: FeatureSet,
}

pub const SHARNN_KIND: &str = "sharnn";

impl SharnnModel {
    /// Standardized model inputs for the selected channels.
    pub fn inputs(&self, f: &MultiChannelFeatures) -> Result<Vec<Array>> {
        self.standardizer.apply(&self.feature_set.select(f))
    }

    pub fn logits(&self, f: &MultiChannelFeatures) -> Result<[f64; NUM_SUBCLASSES]> {
        let x = self.inputs(f)?;
        Ok(forward(&self.params, &x, Mode::Eval)?.logits)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(SHARNN_KIND);
        ck.set("feature_set", self.feature_set);
        self.params.write_into(&mut ck);
        self.standardizer.write_into(&mut ck);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.expect_kind(SHARNN_KIND)?;
        let feature_set = ck.require("feature_set")?.parse()?;
        let params = ModelParameters::read_from(ck)?;
        let standardizer = Standardizer::read_from(ck, params.config.num_channels())?;
        Ok(Self {
            params,
            standardizer,
            feature_set,
        })
    }
}
