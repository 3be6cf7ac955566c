//! Per-class diagonal Gaussian mixtures fitted by expectation-maximization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{summary_vector, VectorScaler};
use crate::error::{Error, Result};
use crate::eval::argmax;
use crate::features::{FeatureSet, MultiChannelFeatures};
use crate::labels::{Subclass, NUM_SUBCLASSES};
use crate::model::{Array, Checkpoint};

pub const VAR_FLOOR: f64 = 1e-6;
pub const MAX_ITER: usize = 200;
pub const TOL: f64 = 1e-6;
pub const GMM_KIND: &str = "gmm";

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub vars: Vec<Vec<f64>>,
    /// Total log-likelihood after initialization and after each EM iteration.
    pub log_likelihood: Vec<f64>,
}

fn log_gauss(x: &[f64], mean: &[f64], var: &[f64]) -> f64 {
    let mut s = 0.0;
    for ((xi, m), v) in x.iter().zip(mean).zip(var) {
        s += (xi - m) * (xi - m) / v + v.ln() + LN_2PI;
    }
    -0.5 * s
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeans_pp(data: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centers = vec![data[rng.random_range(0..data.len())].clone()];
    while centers.len() < k {
        let d: Vec<f64> = data
            .iter()
            .map(|x| {
                centers
                    .iter()
                    .map(|c| sq_dist(x, c))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d.iter().sum();
        let pick = if total <= 0.0 {
            rng.random_range(0..data.len())
        } else {
            let mut u = rng.random::<f64>() * total;
            let mut idx = data.len() - 1;
            for (i, di) in d.iter().enumerate() {
                if u < *di {
                    idx = i;
                    break;
                }
                u -= di;
            }
            idx
        };
        centers.push(data[pick].clone());
    }
    centers
}

impl Mixture {
    pub fn num_components(&self) -> usize {
        self.weights.len()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> = (0..self.num_components())
            .map(|k| self.weights[k].ln() + log_gauss(x, &self.means[k], &self.vars[k]))
            .collect();
        log_sum_exp(&terms)
    }

    fn total_ll(&self, data: &[Vec<f64>]) -> f64 {
        data.iter().map(|x| self.log_density(x)).sum()
    }

    /// EM from a k-means++ hard assignment. Stops when the log-likelihood
    /// gain drops below [`TOL`] or after [`MAX_ITER`] iterations.
    pub fn fit(data: &[Vec<f64>], k: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig(
                "mixture needs at least one component".into(),
            ));
        }
        if data.len() < k {
            return Err(Error::TooFewSamples(format!(
                "{} vectors for {k} components",
                data.len()
            )));
        }
        let d = data[0].len();
        if data
            .iter()
            .any(|x| x.len() != d || x.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::DimMismatch(
                "mixture data must be finite vectors of equal length".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = kmeans_pp(data, k, &mut rng);
        let mut resp: Vec<Vec<f64>> = data
            .iter()
            .map(|x| {
                let best = argmax(&centers.iter().map(|c| -sq_dist(x, c)).collect::<Vec<_>>());
                (0..k).map(|j| if j == best { 1.0 } else { 0.0 }).collect()
            })
            .collect();
        let mut mix = Mixture {
            weights: vec![1.0 / k as f64; k],
            means: centers,
            vars: vec![vec![1.0; d]; k],
            log_likelihood: Vec::new(),
        };
        mix.m_step(data, &resp);
        let mut prev = mix.total_ll(data);
        mix.log_likelihood.push(prev);
        for _ in 0..MAX_ITER {
            for (x, r) in data.iter().zip(resp.iter_mut()) {
                let terms: Vec<f64> = (0..k)
                    .map(|j| mix.weights[j].ln() + log_gauss(x, &mix.means[j], &mix.vars[j]))
                    .collect();
                let z = log_sum_exp(&terms);
                for (rj, t) in r.iter_mut().zip(&terms) {
                    *rj = (t - z).exp();
                }
            }
            mix.m_step(data, &resp);
            let ll = mix.total_ll(data);
            mix.log_likelihood.push(ll);
            if ll - prev < TOL {
                break;
            }
            prev = ll;
        }
        Ok(mix)
    }

    fn m_step(&mut self, data: &[Vec<f64>], resp: &[Vec<f64>]) {
        let n = data.len() as f64;
        let d = data[0].len();
        for j in 0..self.num_components() {
            let nk: f64 = resp.iter().map(|r| r[j]).sum();
            if nk <= 1e-12 {
                // Component lost all support: keep its shape, give it no weight.
                self.weights[j] = f64::MIN_POSITIVE;
                continue;
            }
            self.weights[j] = nk / n;
            let mut mean = vec![0.0; d];
            for (x, r) in data.iter().zip(resp) {
                for (m, xi) in mean.iter_mut().zip(x) {
                    *m += r[j] * xi / nk;
                }
            }
            let mut var = vec![0.0; d];
            for (x, r) in data.iter().zip(resp) {
                for ((v, xi), m) in var.iter_mut().zip(x).zip(&mean) {
                    *v += r[j] * (xi - m) * (xi - m) / nk;
                }
            }
            self.means[j] = mean;
            self.vars[j] = var.into_iter().map(|v| v.max(VAR_FLOOR)).collect();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmClassifier {
    pub feature_set: FeatureSet,
    pub scaler: VectorScaler,
    pub classes: Vec<Mixture>,
}

impl GmmClassifier {
    /// One mixture per subclass over standardized summary vectors. A
    /// multi-label sample trains every class it carries.
    pub fn fit(
        samples: &[MultiChannelFeatures],
        feature_set: FeatureSet,
        k: usize,
        seed: u64,
    ) -> Result<Self> {
        let selected: Vec<MultiChannelFeatures> =
            samples.iter().map(|s| feature_set.select(s)).collect();
        let raw = selected
            .iter()
            .map(summary_vector)
            .collect::<Result<Vec<_>>>()?;
        let scaler = VectorScaler::fit(&raw)?;
        let vectors = raw
            .iter()
            .map(|v| scaler.apply(v))
            .collect::<Result<Vec<_>>>()?;
        let mut classes = Vec::with_capacity(NUM_SUBCLASSES);
        for c in Subclass::ALL {
            let data: Vec<Vec<f64>> = selected
                .iter()
                .zip(&vectors)
                .filter(|(s, _)| s.label.is_some_and(|l| l.has(c)))
                .map(|(_, v)| v.clone())
                .collect();
            if data.len() < k {
                return Err(Error::TooFewSamples(format!(
                    "{} has {} samples for {k} components",
                    c.name(),
                    data.len()
                )));
            }
            classes.push(Mixture::fit(&data, k, seed.wrapping_add(c.index() as u64))?);
        }
        Ok(Self {
            feature_set,
            scaler,
            classes,
        })
    }

    /// Per-class log-likelihoods and the argmax class (ties to the lowest
    /// index, equal priors).
    pub fn predict(&self, f: &MultiChannelFeatures) -> Result<([f64; NUM_SUBCLASSES], Subclass)> {
        if self.classes.len() != NUM_SUBCLASSES {
            return Err(Error::NotFitted);
        }
        let v = self
            .scaler
            .apply(&summary_vector(&self.feature_set.select(f))?)?;
        let ll: [f64; NUM_SUBCLASSES] = std::array::from_fn(|c| self.classes[c].log_density(&v));
        Ok((ll, Subclass::ALL[argmax(&ll)]))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(GMM_KIND);
        ck.set("feature_set", self.feature_set);
        ck.set(
            "components",
            self.classes.first().map_or(0, Mixture::num_components),
        );
        self.scaler.write_into(&mut ck);
        for (c, m) in self.classes.iter().enumerate() {
            let k = m.num_components();
            let d = m.means.first().map_or(0, Vec::len);
            ck.push(
                format!("class{c}.weights"),
                Array::from_vec(&[k], m.weights.clone()),
            );
            ck.push(
                format!("class{c}.means"),
                Array::from_vec(&[k, d], m.means.concat()),
            );
            ck.push(
                format!("class{c}.vars"),
                Array::from_vec(&[k, d], m.vars.concat()),
            );
        }
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.expect_kind(GMM_KIND)?;
        let feature_set = ck.require("feature_set")?.parse()?;
        let scaler = VectorScaler::read_from(ck)?;
        let mut classes = Vec::with_capacity(NUM_SUBCLASSES);
        for c in 0..NUM_SUBCLASSES {
            let w = ck.array(&format!("class{c}.weights"))?;
            let m = ck.array(&format!("class{c}.means"))?;
            let v = ck.array(&format!("class{c}.vars"))?;
            if m.shape != v.shape || m.rows() != w.len() || m.cols() != scaler.mean.len() {
                return Err(Error::BadCheckpoint(format!(
                    "inconsistent mixture shapes for class {c}"
                )));
            }
            let rows = |a: &Array| (0..a.rows()).map(|r| a.row(r).to_vec()).collect();
            classes.push(Mixture {
                weights: w.data.clone(),
                means: rows(m),
                vars: rows(v),
                log_likelihood: Vec::new(),
            });
        }
        Ok(Self {
            feature_set,
            scaler,
            classes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn single_component_moments() {
        let m = Mixture::fit(&[vec![0.0], vec![2.0]], 1, 0).unwrap();
        assert!((m.means[0][0] - 1.0).abs() < 1e-12);
        assert!((m.vars[0][0] - 1.0).abs() < 1e-12);
        assert!((m.weights[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn separated_clusters_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = Normal::new(0.0, 1.0).unwrap();
        let data: Vec<Vec<f64>> = (0..200)
            .map(|i| vec![if i % 2 == 0 { 0.0 } else { 100.0 } + n.sample(&mut rng)])
            .collect();
        let m = Mixture::fit(&data, 2, 3).unwrap();
        let mut means: Vec<f64> = m.means.iter().map(|v| v[0]).collect();
        means.sort_by(f64::total_cmp);
        assert!(
            means[0].abs() < 0.5 && (means[1] - 100.0).abs() < 0.5,
            "{means:?}"
        );
        assert!((m.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            Mixture::fit(&[vec![1.0]], 2, 0),
            Err(Error::TooFewSamples(_))
        ));
    }

    #[test]
    fn floor_applies_to_duplicates() {
        let m = Mixture::fit(&vec![vec![1.0, 2.0]; 5], 2, 0).unwrap();
        assert!(m.vars.iter().flatten().all(|&v| v >= VAR_FLOOR));
        assert!(m.log_likelihood.iter().all(|v| v.is_finite()));
    }
}
