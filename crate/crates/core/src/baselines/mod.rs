//! Comparison classifiers over fixed-length clip summaries.

pub mod cascade;
pub mod gmm;
pub mod logistic;

pub use cascade::{CascadeEnsemble, DecisionRule};
pub use gmm::{GmmClassifier, Mixture};
pub use logistic::LogisticRegression;

use crate::error::{Error, Result};
use crate::features::MultiChannelFeatures;
use crate::model::{Array, Checkpoint};

/// Mean and standard deviation over rows of every column of every active
/// channel, concatenated in channel order.
pub fn summary_vector(f: &MultiChannelFeatures) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (c, m) in f.active_channels().into_iter().enumerate() {
        if m.rows == 0 {
            return Err(Error::EmptyChannel(c));
        }
        let (mean, std) = m.mean_std();
        out.extend(mean);
        out.extend(std);
    }
    if out.is_empty() {
        return Err(Error::DimMismatch("no active channels".into()));
    }
    Ok(out)
}

/// Column z-scoring of summary vectors, fitted on training vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl VectorScaler {
    pub fn fit(vectors: &[Vec<f64>]) -> Result<Self> {
        let first = vectors.first().ok_or(Error::EmptyDataset)?;
        let d = first.len();
        let n = vectors.len() as f64;
        let mut mean = vec![0.0; d];
        for v in vectors {
            if v.len() != d {
                return Err(Error::DimMismatch(format!(
                    "vector of length {}, expected {d}",
                    v.len()
                )));
            }
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x / n;
            }
        }
        let mut var = vec![0.0; d];
        for v in vectors {
            for ((s, x), m) in var.iter_mut().zip(v).zip(&mean) {
                *s += (x - m) * (x - m) / n;
            }
        }
        let std = var
            .into_iter()
            .map(|v| if v.sqrt() < 1e-8 { 1.0 } else { v.sqrt() })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.mean.len() {
            return Err(Error::DimMismatch(format!(
                "vector of length {}, expected {}",
                v.len(),
                self.mean.len()
            )));
        }
        Ok(v.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| (x - m) / s)
            .collect())
    }

    pub fn write_into(&self, ck: &mut Checkpoint) {
        ck.push(
            "scaler.mean",
            Array::from_vec(&[self.mean.len()], self.mean.clone()),
        );
        ck.push(
            "scaler.std",
            Array::from_vec(&[self.std.len()], self.std.clone()),
        );
    }

    pub fn read_from(ck: &Checkpoint) -> Result<Self> {
        let mean = ck.array("scaler.mean")?.data.clone();
        let std = ck.array("scaler.std")?.data.clone();
        if mean.len() != std.len() {
            return Err(Error::BadCheckpoint(
                "scaler arrays differ in length".into(),
            ));
        }
        Ok(Self { mean, std })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureMatrix;

    #[test]
    fn summary_layout() {
        let f = MultiChannelFeatures {
            id: String::new(),
            time: FeatureMatrix::from_rows(&[[1.0, 2.0], [3.0, 2.0]], 2),
            spectral: FeatureMatrix::empty(),
            cepstral: FeatureMatrix::from_rows(&[[5.0]], 1),
            label: None,
        };
        assert_eq!(
            summary_vector(&f).unwrap(),
            vec![2.0, 2.0, 1.0, 0.0, 5.0, 0.0]
        );
    }

    #[test]
    fn scaler_standardizes() {
        let v = vec![vec![1.0, 7.0], vec![3.0, 7.0]];
        let s = VectorScaler::fit(&v).unwrap();
        assert_eq!(s.apply(&v[0]).unwrap(), vec![-1.0, 0.0]);
        assert!(s.apply(&[1.0]).is_err());
    }
}
