//! Nested master-class weighted binary cross-entropy.
//!
//! For 8 subclass logits `z`:
//!
//! * subclass loss: mean over the 8 subclasses of `cbce(y_i, sigmoid(z_i), alpha_i)`
//! * master logits: per master class, the top-2 member logits (all members if
//!   fewer) are masked out of `z` and mixed into one logit
//! * master loss: mean over the 4 masters of `cbce(Y_m, sigmoid(g_m), alpha_m)`
//! * total: `(1 - r) * master + r * subclass` with `r` the cbce ratio

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::labels::{LabelVector, MasterClass, NUM_MASTERS, NUM_SUBCLASSES};

pub const PROB_CLAMP: f64 = 1e-7;
pub const TOP_K: usize = 2;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// `-(alpha * y * ln(p) + (1 - y) * ln(1 - p))` with `p` clamped to
/// `[1e-7, 1 - 1e-7]`.
pub fn cbce(y: f64, yhat: f64, alpha: f64) -> f64 {
    let p = clamp_prob(yhat);
    -(alpha * y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// d cbce(y, sigmoid(z), alpha) / dz. Zero where the clamp is active.
pub fn cbce_logit_grad(y: f64, z: f64, alpha: f64) -> f64 {
    let p = sigmoid(z);
    if !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
        return 0.0;
    }
    (1.0 - y) * p - alpha * y * (1.0 - p)
}

/// How the selected top-k member logits of a master class are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mixer {
    #[default]
    Mean,
    Max,
    LogSumExp,
}

impl fmt::Display for Mixer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mixer::Mean => "mean",
            Mixer::Max => "max",
            Mixer::LogSumExp => "logsumexp",
        })
    }
}

impl FromStr for Mixer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "mean" => Ok(Mixer::Mean),
            "max" => Ok(Mixer::Max),
            "logsumexp" => Ok(Mixer::LogSumExp),
            _ => Err(Error::InvalidConfig(format!("unknown mixer `{s}`"))),
        }
    }
}

/// Top-k member indices of `master`, highest logit first; ties go to the
/// lower subclass index.
fn top_members(z: &[f64; NUM_SUBCLASSES], master: MasterClass) -> Vec<usize> {
    let mut members: Vec<usize> = master.members().iter().map(|c| c.index()).collect();
    members.sort_by(|&a, &b| z[b].total_cmp(&z[a]).then(a.cmp(&b)));
    members.truncate(TOP_K);
    members
}

/// Master logit of each master class and its partial derivatives with
/// respect to the 8 subclass logits.
pub fn master_logits_with_grad(
    z: &[f64; NUM_SUBCLASSES],
    mixer: Mixer,
) -> ([f64; NUM_MASTERS], [[f64; NUM_SUBCLASSES]; NUM_MASTERS]) {
    let mut g = [0.0; NUM_MASTERS];
    let mut jac = [[0.0; NUM_SUBCLASSES]; NUM_MASTERS];
    for m in MasterClass::ALL {
        let sel = top_members(z, m);
        let row = &mut jac[m.index()];
        g[m.index()] = match mixer {
            Mixer::Mean => {
                let k = sel.len() as f64;
                sel.iter().for_each(|&i| row[i] = 1.0 / k);
                sel.iter().map(|&i| z[i]).sum::<f64>() / k
            }
            Mixer::Max => {
                row[sel[0]] = 1.0;
                z[sel[0]]
            }
            Mixer::LogSumExp => {
                let top = z[sel[0]];
                let total: f64 = sel.iter().map(|&i| (z[i] - top).exp()).sum();
                sel.iter()
                    .for_each(|&i| row[i] = (z[i] - top).exp() / total);
                top + total.ln()
            }
        };
    }
    (g, jac)
}

pub fn master_logits(z: &[f64; NUM_SUBCLASSES], mixer: Mixer) -> [f64; NUM_MASTERS] {
    master_logits_with_grad(z, mixer).0
}

/// Positive-class weights for the subclass and master terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaWeights {
    pub sub: [f64; NUM_SUBCLASSES],
    pub master: [f64; NUM_MASTERS],
}

impl AlphaWeights {
    pub fn uniform(alpha: f64) -> Self {
        Self {
            sub: [alpha; NUM_SUBCLASSES],
            master: [alpha; NUM_MASTERS],
        }
    }

    /// `alpha_i = negatives_i / positives_i` over `labels`.
    pub fn class_balanced<'a>(labels: impl IntoIterator<Item = &'a LabelVector>) -> Result<Self> {
        let mut pos_s = [0usize; NUM_SUBCLASSES];
        let mut pos_m = [0usize; NUM_MASTERS];
        let mut n = 0usize;
        for l in labels {
            n += 1;
            for (p, &b) in pos_s.iter_mut().zip(l.subclass()) {
                *p += b as usize;
            }
            for (p, &b) in pos_m.iter_mut().zip(l.master()) {
                *p += b as usize;
            }
        }
        let ratio = |pos: usize, what: String| {
            if pos == 0 {
                Err(Error::DegenerateLabels(format!(
                    "{what} has no positive training samples"
                )))
            } else {
                Ok((n - pos) as f64 / pos as f64)
            }
        };
        let mut w = Self::uniform(1.0);
        for (i, &p) in pos_s.iter().enumerate() {
            w.sub[i] = ratio(p, format!("subclass {i}"))?;
        }
        for (i, &p) in pos_m.iter().enumerate() {
            w.master[i] = ratio(p, format!("master class {i}"))?;
        }
        Ok(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub subclass: f64,
    pub master: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub alpha: AlphaWeights,
    pub cbce_ratio: f64,
    pub mixer: Mixer,
}

pub fn nested_loss(z: &[f64; NUM_SUBCLASSES], labels: &LabelVector, spec: &LossSpec) -> LossParts {
    nested_loss_with_grad(z, labels, spec).0
}

/// Loss and its gradient with respect to the 8 logits.
pub fn nested_loss_with_grad(
    z: &[f64; NUM_SUBCLASSES],
    labels: &LabelVector,
    spec: &LossSpec,
) -> (LossParts, [f64; NUM_SUBCLASSES]) {
    let y = labels.subclass_targets();
    let ym = labels.master_targets();
    let r = spec.cbce_ratio;
    let mut grad = [0.0; NUM_SUBCLASSES];

    let mut sub = 0.0;
    for i in 0..NUM_SUBCLASSES {
        sub += cbce(y[i], sigmoid(z[i]), spec.alpha.sub[i]);
        grad[i] += r * cbce_logit_grad(y[i], z[i], spec.alpha.sub[i]) / NUM_SUBCLASSES as f64;
    }
    sub /= NUM_SUBCLASSES as f64;

    let (g, jac) = master_logits_with_grad(z, spec.mixer);
    let mut master = 0.0;
    for m in 0..NUM_MASTERS {
        master += cbce(ym[m], sigmoid(g[m]), spec.alpha.master[m]);
        let dg =
            (1.0 - r) * cbce_logit_grad(ym[m], g[m], spec.alpha.master[m]) / NUM_MASTERS as f64;
        for (gi, j) in grad.iter_mut().zip(&jac[m]) {
            *gi += dg * j;
        }
    }
    master /= NUM_MASTERS as f64;

    (
        LossParts {
            total: (1.0 - r) * master + r * sub,
            subclass: sub,
            master,
        },
        grad,
    )
}
