//! Forward pass with retained activations, and exact reverse-mode backward.

use rand::{Rng, RngCore};

use super::{
    matvec_acc, matvec_t_acc, outer_acc, Array, ChannelParams, Dense, LstmLayer, ModelParameters,
};
use crate::error::{Error, Result};
use crate::labels::NUM_SUBCLASSES;
use crate::loss::sigmoid;

const GELU_C: f64 = 0.044_715;
const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

/// Tanh approximation of the Gaussian error linear unit.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (SQRT_2_OVER_PI * (x + GELU_C * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let t = (SQRT_2_OVER_PI * (x + GELU_C * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_C * x * x)
}

/// Eval disables dropout. Train draws inverted-dropout masks from the given RNG.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut dyn RngCore),
}

impl Mode<'_> {
    fn mask(&mut self, n: usize, p: f64) -> Option<Vec<f64>> {
        match self {
            Mode::Train(rng) if p > 0.0 => {
                let keep = 1.0 / (1.0 - p);
                Some(
                    (0..n)
                        .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
                        .collect(),
                )
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
struct LstmCache {
    input: Array,
    /// Post-activation gates, T x 4H, blocks i f g o.
    gates: Array,
    cell: Array,
    hidden: Array,
}

#[derive(Debug, Clone)]
struct ChannelCache {
    x: Array,
    feature_mask: Option<Vec<f64>>,
    layers: Vec<LstmCache>,
    query: Vec<f64>,
    weights: Vec<f64>,
    context_mask: Option<Vec<f64>>,
}

/// Activations retained for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    channels: Vec<ChannelCache>,
    concat: Vec<f64>,
    boom_pre: Vec<f64>,
    boom_act: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub logits: [f64; NUM_SUBCLASSES],
    pub attention_weights: Vec<Vec<f64>>,
    pub hidden_states: ForwardCache,
}

fn apply_mask(values: &mut [f64], mask: &Option<Vec<f64>>) {
    if let Some(m) = mask {
        for (v, k) in values.iter_mut().zip(m) {
            *v *= k;
        }
    }
}

fn lstm_forward(layer: &LstmLayer, input: Array) -> LstmCache {
    let t_len = input.rows();
    let h = layer.hidden_size();
    let mut gates = Array::zeros(&[t_len, 4 * h]);
    let mut cell = Array::zeros(&[t_len, h]);
    let mut hidden = Array::zeros(&[t_len, h]);
    let mut h_prev = vec![0.0; h];
    let mut c_prev = vec![0.0; h];
    for t in 0..t_len {
        let mut a = layer.bias.data.clone();
        matvec_acc(&layer.w_input, input.row(t), &mut a);
        matvec_acc(&layer.w_recurrent, &h_prev, &mut a);
        for (k, v) in a.iter_mut().enumerate() {
            *v = if (2 * h..3 * h).contains(&k) {
                v.tanh()
            } else {
                sigmoid(*v)
            };
        }
        for j in 0..h {
            let (i, f, g, o) = (a[j], a[h + j], a[2 * h + j], a[3 * h + j]);
            let c = f * c_prev[j] + i * g;
            c_prev[j] = c;
            h_prev[j] = o * c.tanh();
        }
        gates.row_mut(t).copy_from_slice(&a);
        cell.row_mut(t).copy_from_slice(&c_prev);
        hidden.row_mut(t).copy_from_slice(&h_prev);
    }
    LstmCache {
        input,
        gates,
        cell,
        hidden,
    }
}

/// Returns d(input) and accumulates parameter gradients.
fn lstm_backward(
    layer: &LstmLayer,
    cache: &LstmCache,
    d_hidden: &Array,
    grad: &mut LstmLayer,
) -> Array {
    let t_len = cache.input.rows();
    let h = layer.hidden_size();
    let mut d_input = Array::zeros(&cache.input.shape);
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let zeros = vec![0.0; h];
    let mut da = vec![0.0; 4 * h];
    for t in (0..t_len).rev() {
        let a = cache.gates.row(t);
        let c = cache.cell.row(t);
        let c_prev = if t > 0 { cache.cell.row(t - 1) } else { &zeros };
        let h_prev = if t > 0 {
            cache.hidden.row(t - 1)
        } else {
            &zeros
        };
        for j in 0..h {
            let (i, f, g, o) = (a[j], a[h + j], a[2 * h + j], a[3 * h + j]);
            let dh = d_hidden.row(t)[j] + dh_next[j];
            let tc = c[j].tanh();
            let dc = dh * o * (1.0 - tc * tc) + dc_next[j];
            da[j] = dc * g * i * (1.0 - i);
            da[h + j] = dc * c_prev[j] * f * (1.0 - f);
            da[2 * h + j] = dc * i * (1.0 - g * g);
            da[3 * h + j] = dh * tc * o * (1.0 - o);
            dc_next[j] = dc * f;
        }
        outer_acc(&mut grad.w_input, &da, cache.input.row(t));
        outer_acc(&mut grad.w_recurrent, &da, h_prev);
        for (b, d) in grad.bias.data.iter_mut().zip(&da) {
            *b += d;
        }
        matvec_t_acc(&layer.w_input, &da, d_input.row_mut(t));
        dh_next.fill(0.0);
        matvec_t_acc(&layer.w_recurrent, &da, &mut dh_next);
    }
    d_input
}

fn dense_rows(dense: &Dense, x: &Array) -> Array {
    let out_dim = dense.output_dim();
    let mut out = Array::zeros(&[x.rows(), out_dim]);
    for t in 0..x.rows() {
        let row = out.row_mut(t);
        row.copy_from_slice(&dense.bias.data);
        matvec_acc(&dense.weight, x.row(t), row);
    }
    out
}

fn check_input(params: &ModelParameters, x: &Array, channel: usize) -> Result<()> {
    let dims = &params.config.channel_input_dims;
    let Some(&d) = dims.get(channel) else {
        return Err(Error::DimMismatch(format!(
            "channel {channel} out of range ({} channels)",
            dims.len()
        )));
    };
    if x.shape.len() != 2 || x.cols() != d {
        return Err(Error::DimMismatch(format!(
            "channel {channel}: input shape {:?}, expected (T, {d})",
            x.shape
        )));
    }
    if x.rows() == 0 {
        return Err(Error::EmptyChannel(channel));
    }
    Ok(())
}

fn encode_cached(
    ch: &ChannelParams,
    x: &Array,
    p: f64,
    mode: &mut Mode,
) -> (Option<Vec<f64>>, Vec<LstmCache>) {
    let mut u = dense_rows(&ch.feature, x);
    let feature_mask = mode.mask(u.len(), p);
    apply_mask(&mut u.data, &feature_mask);
    let mut layers: Vec<LstmCache> = Vec::with_capacity(ch.lstm.len());
    for layer in &ch.lstm {
        let input = layers
            .last()
            .map(|c| c.hidden.clone())
            .unwrap_or_else(|| u.clone());
        layers.push(lstm_forward(layer, input));
    }
    (feature_mask, layers)
}

/// Hidden states (T x hidden) of the top recurrent layer for one channel.
pub fn encode_channel(
    params: &ModelParameters,
    x: &Array,
    channel: usize,
    mut mode: Mode,
) -> Result<Array> {
    check_input(params, x, channel)?;
    let (_, layers) = encode_cached(
        &params.channels[channel],
        x,
        params.config.dropout,
        &mut mode,
    );
    Ok(layers.into_iter().last().unwrap().hidden)
}

/// Single-head attention with the last hidden state as query.
/// Returns (context, weights, projected query).
pub fn sha_attention(hidden: &Array, query_proj: &Array) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let t_len = hidden.rows();
    let h = hidden.cols();
    let mut q = vec![0.0; query_proj.rows()];
    matvec_acc(query_proj, hidden.row(t_len - 1), &mut q);
    let scale = 1.0 / (h as f64).sqrt();
    let scores: Vec<f64> = (0..t_len)
        .map(|t| {
            scale
                * hidden
                    .row(t)
                    .iter()
                    .zip(&q)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
        })
        .collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exp.iter().sum();
    let weights: Vec<f64> = exp.iter().map(|e| e / z).collect();
    let mut context = vec![0.0; h];
    for (t, w) in weights.iter().enumerate() {
        for (c, v) in context.iter_mut().zip(hidden.row(t)) {
            *c += w * v;
        }
    }
    (context, weights, q)
}

/// Boom block: up-projection, GELU, down-projection to the logits.
pub fn boom(params: &ModelParameters, v: &[f64]) -> Result<[f64; NUM_SUBCLASSES]> {
    if v.len() != params.boom_up.input_dim() {
        return Err(Error::DimMismatch(format!(
            "boom input has {} values, expected {}",
            v.len(),
            params.boom_up.input_dim()
        )));
    }
    let act: Vec<f64> = params.boom_up.apply(v).into_iter().map(gelu).collect();
    Ok(params.boom_down.apply(&act).try_into().unwrap())
}

/// Full forward pass. `inputs` holds one T_c x d_c array per channel.
pub fn forward(params: &ModelParameters, inputs: &[Array], mut mode: Mode) -> Result<ForwardTrace> {
    let cfg = &params.config;
    if inputs.len() != cfg.num_channels() {
        return Err(Error::DimMismatch(format!(
            "{} channels given, model has {}",
            inputs.len(),
            cfg.num_channels()
        )));
    }
    for (c, x) in inputs.iter().enumerate() {
        check_input(params, x, c)?;
    }
    let mut channels = Vec::with_capacity(inputs.len());
    let mut concat = Vec::with_capacity(cfg.context_dim());
    for (ch, x) in params.channels.iter().zip(inputs) {
        let (feature_mask, layers) = encode_cached(ch, x, cfg.dropout, &mut mode);
        let (mut context, weights, query) =
            sha_attention(&layers.last().unwrap().hidden, &ch.query);
        let context_mask = mode.mask(context.len(), cfg.dropout);
        apply_mask(&mut context, &context_mask);
        concat.extend_from_slice(&context);
        channels.push(ChannelCache {
            x: x.clone(),
            feature_mask,
            layers,
            query,
            weights,
            context_mask,
        });
    }
    let boom_pre = params.boom_up.apply(&concat);
    let boom_act: Vec<f64> = boom_pre.iter().map(|&a| gelu(a)).collect();
    let logits: [f64; NUM_SUBCLASSES] = params.boom_down.apply(&boom_act).try_into().unwrap();
    let attention_weights = channels.iter().map(|c| c.weights.clone()).collect();
    Ok(ForwardTrace {
        logits,
        attention_weights,
        hidden_states: ForwardCache {
            channels,
            concat,
            boom_pre,
            boom_act,
        },
    })
}

/// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(logits).
pub fn backward(
    params: &ModelParameters,
    cache: &ForwardCache,
    d_logits: &[f64; NUM_SUBCLASSES],
    grad: &mut ModelParameters,
) {
    let h = params.config.hidden_size;

    outer_acc(&mut grad.boom_down.weight, d_logits, &cache.boom_act);
    for (b, d) in grad.boom_down.bias.data.iter_mut().zip(d_logits) {
        *b += d;
    }
    let mut d_act = vec![0.0; cache.boom_act.len()];
    matvec_t_acc(&params.boom_down.weight, d_logits, &mut d_act);
    let d_pre: Vec<f64> = d_act
        .iter()
        .zip(&cache.boom_pre)
        .map(|(d, &a)| d * gelu_grad(a))
        .collect();
    outer_acc(&mut grad.boom_up.weight, &d_pre, &cache.concat);
    for (b, d) in grad.boom_up.bias.data.iter_mut().zip(&d_pre) {
        *b += d;
    }
    let mut d_concat = vec![0.0; cache.concat.len()];
    matvec_t_acc(&params.boom_up.weight, &d_pre, &mut d_concat);

    for (c, (ch, cc)) in params.channels.iter().zip(&cache.channels).enumerate() {
        let g = &mut grad.channels[c];
        let mut d_ctx = d_concat[c * h..(c + 1) * h].to_vec();
        apply_mask(&mut d_ctx, &cc.context_mask);

        let top = &cc.layers.last().unwrap().hidden;
        let t_len = top.rows();
        let scale = 1.0 / (h as f64).sqrt();
        let mut d_hidden = Array::zeros(&top.shape);
        let dw: Vec<f64> = (0..t_len)
            .map(|t| top.row(t).iter().zip(&d_ctx).map(|(a, b)| a * b).sum())
            .collect();
        let mean_dw: f64 = cc.weights.iter().zip(&dw).map(|(w, d)| w * d).sum();
        let mut d_q = vec![0.0; h];
        for t in 0..t_len {
            let w = cc.weights[t];
            let ds = w * (dw[t] - mean_dw) * scale;
            let (row_h, row_d) = (top.row(t), d_hidden.row_mut(t));
            for j in 0..h {
                row_d[j] += w * d_ctx[j] + ds * cc.query[j];
                d_q[j] += ds * row_h[j];
            }
        }
        outer_acc(&mut g.query, &d_q, top.row(t_len - 1));
        matvec_t_acc(&ch.query, &d_q, d_hidden.row_mut(t_len - 1));

        for (l, layer) in ch.lstm.iter().enumerate().rev() {
            d_hidden = lstm_backward(layer, &cc.layers[l], &d_hidden, &mut g.lstm[l]);
        }
        let mut d_u = d_hidden;
        apply_mask(&mut d_u.data, &cc.feature_mask);
        for t in 0..t_len {
            outer_acc(&mut g.feature.weight, d_u.row(t), cc.x.row(t));
            for (b, d) in g.feature.bias.data.iter_mut().zip(d_u.row(t)) {
                *b += d;
            }
        }
    }
}
