//! First-order optimizers over [`ModelParameters`].

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::ModelParameters;

pub const ADADELTA_RHO: f64 = 0.9;
pub const ADADELTA_EPS: f64 = 1e-6;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adadelta,
    Sgd,
    Adam,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Adadelta => "adadelta",
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "adadelta" => Ok(Self::Adadelta),
            "sgd" => Ok(Self::Sgd),
            "adam" => Ok(Self::Adam),
            other => Err(Error::InvalidConfig(format!("unknown optimizer `{other}`"))),
        }
    }
}

/// Per-element accumulators in the parameter visiting order.
///
/// Adadelta keeps (mean squared gradient, mean squared update); Adam keeps
/// (first moment, second moment).
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
    pub steps: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64, params: &ModelParameters) -> Self {
        let zeros: Vec<Vec<f64>> = params.arrays().iter().map(|a| vec![0.0; a.len()]).collect();
        Self {
            kind,
            learning_rate,
            first: zeros.clone(),
            second: zeros,
            steps: 0,
        }
    }

    pub fn step(&mut self, params: &mut ModelParameters, grads: &ModelParameters) {
        self.steps += 1;
        let lr = self.learning_rate;
        let t = self.steps as i32;
        for (((p, g), s1), s2) in params
            .arrays_mut()
            .into_iter()
            .zip(grads.arrays())
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                match self.kind {
                    OptimizerKind::Sgd => p.data[i] -= lr * gi,
                    OptimizerKind::Adadelta => {
                        s1[i] = ADADELTA_RHO * s1[i] + (1.0 - ADADELTA_RHO) * gi * gi;
                        let delta =
                            ((s2[i] + ADADELTA_EPS).sqrt() / (s1[i] + ADADELTA_EPS).sqrt()) * gi;
                        s2[i] = ADADELTA_RHO * s2[i] + (1.0 - ADADELTA_RHO) * delta * delta;
                        p.data[i] -= lr * delta;
                    }
                    OptimizerKind::Adam => {
                        s1[i] = ADAM_BETA1 * s1[i] + (1.0 - ADAM_BETA1) * gi;
                        s2[i] = ADAM_BETA2 * s2[i] + (1.0 - ADAM_BETA2) * gi * gi;
                        let m = s1[i] / (1.0 - ADAM_BETA1.powi(t));
                        let v = s2[i] / (1.0 - ADAM_BETA2.powi(t));
                        p.data[i] -= lr * m / (v.sqrt() + ADAM_EPS);
                    }
                }
            }
        }
    }
}
