use crate::error::{Error, Result};
use crate::loss::sigmoid;

const L2: f64 = 1e-2;
const LEARNING_RATE: f64 = 0.5;
const ITERATIONS: usize = 500;

/// Binary L2-regularized logistic regression, trained by full-batch
/// gradient descent from zero weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticRegression {
    pub fn fit(x: &[Vec<f64>], y: &[bool]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        let n = x.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let d = x[0].len();
        let mut w = vec![0.0; d];
        let mut b = 0.0;
        let mut gw = vec![0.0; d];
        for _ in 0..ITERATIONS {
            gw.iter_mut().zip(&w).for_each(|(g, wi)| *g = L2 * wi);
            let mut gb = 0.0;
            for (xi, &yi) in x.iter().zip(y) {
                let z = b + xi.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
                let r = (sigmoid(z) - if yi { 1.0 } else { 0.0 }) / n as f64;
                gb += r;
                for (g, a) in gw.iter_mut().zip(xi) {
                    *g += r * a;
                }
            }
            for (wi, g) in w.iter_mut().zip(&gw) {
                *wi -= LEARNING_RATE * g;
            }
            b -= LEARNING_RATE * gb;
        }
        Ok(Self {
            weights: w,
            bias: b,
        })
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.bias + x.iter().zip(&self.weights).map(|(a, c)| a * c).sum::<f64>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_a_threshold() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 10.0 - 1.0]).collect();
        let y: Vec<bool> = (0..20).map(|i| i >= 10).collect();
        let m = LogisticRegression::fit(&x, &y).unwrap();
        assert!(m.probability(&[0.8]) > 0.5);
        assert!(m.probability(&[-0.8]) < 0.5);
        assert_eq!(m, LogisticRegression::fit(&x, &y).unwrap());
    }
}
