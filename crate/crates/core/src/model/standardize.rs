use super::{Array, Checkpoint};
use crate::error::{Error, Result};
use crate::features::MultiChannelFeatures;

const STD_FLOOR: f64 = 1e-8;

/// Per-channel, per-column z-scoring fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<Vec<f64>>,
    pub std: Vec<Vec<f64>>,
}

impl Standardizer {
    /// Fits on the active channels of `samples`, pooling all rows.
    pub fn fit(samples: &[MultiChannelFeatures]) -> Result<Self> {
        let first = samples.first().ok_or(Error::EmptyDataset)?;
        let dims = first.channel_dims();
        let mut mean = Vec::with_capacity(dims.len());
        let mut std = Vec::with_capacity(dims.len());
        for (c, &d) in dims.iter().enumerate() {
            let mut sum = vec![0.0; d];
            let mut sq = vec![0.0; d];
            let mut n = 0usize;
            for s in samples {
                let m = s.active_channels()[c];
                if m.cols != d {
                    return Err(Error::DimMismatch(format!(
                        "channel {c}: {} columns, expected {d}",
                        m.cols
                    )));
                }
                for r in 0..m.rows {
                    for (j, &v) in m.row(r).iter().enumerate() {
                        sum[j] += v as f64;
                        sq[j] += (v as f64) * (v as f64);
                    }
                }
                n += m.rows;
            }
            if n == 0 {
                return Err(Error::EmptyChannel(c));
            }
            let mu: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
            let sd = sq
                .iter()
                .zip(&mu)
                .map(|(q, m)| {
                    let v = (q / n as f64 - m * m).max(0.0).sqrt();
                    if v < STD_FLOOR {
                        1.0
                    } else {
                        v
                    }
                })
                .collect();
            mean.push(mu);
            std.push(sd);
        }
        Ok(Self { mean, std })
    }

    pub fn identity(dims: &[usize]) -> Self {
        Self {
            mean: dims.iter().map(|&d| vec![0.0; d]).collect(),
            std: dims.iter().map(|&d| vec![1.0; d]).collect(),
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        self.mean.iter().map(Vec::len).collect()
    }

    /// One T x d array per active channel.
    pub fn apply(&self, f: &MultiChannelFeatures) -> Result<Vec<Array>> {
        let active = f.active_channels();
        if active.len() != self.mean.len() {
            return Err(Error::DimMismatch(format!(
                "{} active channels, model expects {}",
                active.len(),
                self.mean.len()
            )));
        }
        active
            .iter()
            .enumerate()
            .map(|(c, m)| {
                let (mu, sd) = (&self.mean[c], &self.std[c]);
                if m.cols != mu.len() {
                    return Err(Error::DimMismatch(format!(
                        "channel {c}: {} columns, expected {}",
                        m.cols,
                        mu.len()
                    )));
                }
                if m.rows == 0 {
                    return Err(Error::EmptyChannel(c));
                }
                let data = m
                    .data
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| (v as f64 - mu[i % m.cols]) / sd[i % m.cols])
                    .collect();
                Ok(Array::from_vec(&[m.rows, m.cols], data))
            })
            .collect()
    }

    pub fn write_into(&self, ck: &mut Checkpoint) {
        for (c, (mu, sd)) in self.mean.iter().zip(&self.std).enumerate() {
            ck.push(
                format!("norm.c{c}.mean"),
                Array::from_vec(&[mu.len()], mu.clone()),
            );
            ck.push(
                format!("norm.c{c}.std"),
                Array::from_vec(&[sd.len()], sd.clone()),
            );
        }
    }

    pub fn read_from(ck: &Checkpoint, channels: usize) -> Result<Self> {
        let mut mean = Vec::new();
        let mut std = Vec::new();
        for c in 0..channels {
            mean.push(ck.array(&format!("norm.c{c}.mean"))?.data.clone());
            std.push(ck.array(&format!("norm.c{c}.std"))?.data.clone());
        }
        Ok(Self { mean, std })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureMatrix;

    fn sample(time: &[[f64; 2]]) -> MultiChannelFeatures {
        MultiChannelFeatures {
            id: String::new(),
            time: FeatureMatrix::from_rows(time, 2),
            spectral: FeatureMatrix::empty(),
            cepstral: FeatureMatrix::empty(),
            label: None,
        }
    }

    #[test]
    fn zero_mean_unit_std_on_training_rows() {
        let s = [sample(&[[1.0, 5.0], [3.0, 5.0]]), sample(&[[5.0, 5.0]])];
        let st = Standardizer::fit(&s).unwrap();
        assert_eq!(st.mean, vec![vec![3.0, 5.0]]);
        assert_eq!(st.std[0][1], 1.0);
        let x = st.apply(&s[0]).unwrap();
        let sd = (8.0f64 / 3.0).sqrt();
        assert!((x[0].at(0, 0) + 2.0 / sd).abs() < 1e-12);
        assert_eq!(x[0].at(1, 1), 0.0);
    }

    #[test]
    fn empty_and_mismatched_rejected() {
        let st = Standardizer::identity(&[2]);
        assert!(matches!(
            st.apply(&sample(&[])),
            Err(Error::EmptyChannel(0))
        ));
        assert!(Standardizer::identity(&[3])
            .apply(&sample(&[[1.0, 2.0]]))
            .is_err());
        assert!(Standardizer::fit(&[]).is_err());
    }
}
