//! Metrics and the data-splitting protocol.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::labels::{LabelVector, MasterClass, Subclass, NUM_MASTERS, NUM_SUBCLASSES};

/// A possibly empty set of predicted subclasses.
pub type LabelSet = [bool; NUM_SUBCLASSES];

pub fn label_set(l: &LabelVector) -> LabelSet {
    *l.subclass()
}

pub fn singleton(c: Subclass) -> LabelSet {
    let mut s = [false; NUM_SUBCLASSES];
    s[c.index()] = true;
    s
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in scores.iter().enumerate() {
        if v > scores[best] {
            best = i;
        }
    }
    best
}

/// Multi-label decision: every class with probability above 0.5, or the
/// argmax class when none clears the threshold.
pub fn threshold_set(probs: &[f64; NUM_SUBCLASSES]) -> LabelSet {
    let mut s = probs.map(|p| p > 0.5);
    if !s.contains(&true) {
        s[argmax(probs)] = true;
    }
    s
}

fn f1_of_sets(p: &LabelSet, t: &LabelSet) -> f64 {
    let inter = p.iter().zip(t).filter(|(a, b)| **a && **b).count();
    let np = p.iter().filter(|v| **v).count();
    let nt = t.iter().filter(|v| **v).count();
    if np + nt == 0 {
        1.0
    } else {
        2.0 * inter as f64 / (np + nt) as f64
    }
}

pub fn sample_f1(preds: &[LabelSet], truths: &[LabelSet]) -> Result<f64> {
    if preds.len() != truths.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: truths.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(preds
        .iter()
        .zip(truths)
        .map(|(p, t)| f1_of_sets(p, t))
        .sum::<f64>()
        / preds.len() as f64)
}

/// Binary F1 per subclass from TP/FP/FN counts; 0 when the class is never
/// predicted nor present.
pub fn per_class_f1(preds: &[LabelSet], truths: &[LabelSet]) -> Result<[f64; NUM_SUBCLASSES]> {
    if preds.len() != truths.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: truths.len(),
        });
    }
    let mut out = [0.0; NUM_SUBCLASSES];
    for (c, slot) in out.iter_mut().enumerate() {
        let (mut tp, mut fp, mut fns) = (0usize, 0usize, 0usize);
        for (p, t) in preds.iter().zip(truths) {
            match (p[c], t[c]) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fns += 1,
                _ => {}
            }
        }
        let denom = 2 * tp + fp + fns;
        *slot = if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        };
    }
    Ok(out)
}

/// Ratio with a flag set when the denominator is zero (value reported as 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rate {
    pub value: f64,
    pub undefined: bool,
}

/// Rows are true master classes, columns predicted.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_MASTERS]; NUM_MASTERS],
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; NUM_MASTERS]; NUM_MASTERS]) -> Self {
        Self { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, r: usize) -> u64 {
        self.counts[r].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|row| row[c]).sum()
    }

    fn rate(num: u64, den: u64) -> Rate {
        if den == 0 {
            Rate {
                value: 0.0,
                undefined: true,
            }
        } else {
            Rate {
                value: num as f64 / den as f64,
                undefined: false,
            }
        }
    }

    pub fn precision(&self) -> [Rate; NUM_MASTERS] {
        std::array::from_fn(|c| Self::rate(self.counts[c][c], self.col_sum(c)))
    }

    pub fn recall(&self) -> [Rate; NUM_MASTERS] {
        std::array::from_fn(|c| Self::rate(self.counts[c][c], self.row_sum(c)))
    }
}

pub fn confusion_matrix(preds: &[Subclass], truths: &[Subclass]) -> Result<ConfusionMatrix> {
    if preds.len() != truths.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: truths.len(),
        });
    }
    let mut m = ConfusionMatrix::default();
    for (p, t) in preds.iter().zip(truths) {
        m.counts[t.master().index()][p.master().index()] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub test: Vec<usize>,
    pub folds: Vec<Vec<usize>>,
    pub seed: u64,
}

impl SplitPlan {
    /// All non-test indices, sorted.
    pub fn pool(&self) -> Vec<usize> {
        let mut p: Vec<usize> = self.folds.iter().flatten().copied().collect();
        p.sort_unstable();
        p
    }

    /// (train, validation) for fold `k`: validation is fold `k`, train the
    /// other folds.
    pub fn fold(&self, k: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != k)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        train.sort_unstable();
        let mut val = self.folds[k].clone();
        val.sort_unstable();
        (train, val)
    }
}

/// Stratified test draw plus k stratified folds over the remainder.
///
/// `strata` gives one class per sample (the primary label for multi-label
/// samples). Each class contributes round(test_frac * count) samples to the
/// test set; the rest are dealt round-robin into folds, continuing the deal
/// across classes so fold sizes differ by at most one.
pub fn make_split(strata: &[Subclass], test_frac: f64, k: usize, seed: u64) -> Result<SplitPlan> {
    let n = strata.len();
    if k == 0 || !(0.0..1.0).contains(&test_frac) {
        return Err(Error::InvalidConfig(format!(
            "bad split parameters k={k}, test_frac={test_frac}"
        )));
    }
    if n < 5 * k {
        return Err(Error::TooFewSamplesPerClass(format!(
            "{n} samples for {k} folds"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); NUM_SUBCLASSES];
    for (i, c) in strata.iter().enumerate() {
        by_class[c.index()].push(i);
    }
    for (c, members) in by_class.iter().enumerate() {
        if members.len() < k {
            return Err(Error::TooFewSamplesPerClass(format!(
                "{} has {} samples, need {k}",
                Subclass::ALL[c].name(),
                members.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test = Vec::new();
    let mut folds = vec![Vec::new(); k];
    let mut deal = 0;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        let n_test = (test_frac * members.len() as f64).round() as usize;
        test.extend_from_slice(&members[..n_test]);
        for &i in &members[n_test..] {
            folds[deal % k].push(i);
            deal += 1;
        }
    }
    test.sort_unstable();
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(SplitPlan { test, folds, seed })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub sample_f1: f64,
    pub per_class_f1: [f64; NUM_SUBCLASSES],
    pub confusion: ConfusionMatrix,
    pub precision: [Rate; NUM_MASTERS],
    pub recall: [Rate; NUM_MASTERS],
    pub split: String,
    pub seed: u64,
    pub num_samples: usize,
}

/// `sets` are multi-label predictions, `single` the argmax subclass per
/// sample. The confusion matrix compares `single` against each truth's
/// primary label.
pub fn evaluate(
    sets: &[LabelSet],
    single: &[Subclass],
    truths: &[LabelVector],
    split: &str,
    seed: u64,
) -> Result<EvalReport> {
    let truth_sets: Vec<LabelSet> = truths.iter().map(label_set).collect();
    let primaries: Vec<Subclass> = truths.iter().map(LabelVector::primary).collect();
    let confusion = confusion_matrix(single, &primaries)?;
    Ok(EvalReport {
        sample_f1: sample_f1(sets, &truth_sets)?,
        per_class_f1: per_class_f1(sets, &truth_sets)?,
        precision: confusion.precision(),
        recall: confusion.recall(),
        confusion,
        split: split.to_string(),
        seed,
        num_samples: truths.len(),
    })
}

impl EvalReport {
    /// `key: value` lines followed by a tab-separated confusion block.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let rate = |r: &Rate| {
            if r.undefined {
                "0 (undefined)".to_string()
            } else {
                r.value.to_string()
            }
        };
        writeln!(s, "split: {}", self.split).unwrap();
        writeln!(s, "seed: {}", self.seed).unwrap();
        writeln!(s, "samples: {}", self.num_samples).unwrap();
        writeln!(s, "sample_f1: {}", self.sample_f1).unwrap();
        for c in Subclass::ALL {
            writeln!(s, "f1.{}: {}", c.name(), self.per_class_f1[c.index()]).unwrap();
        }
        for m in MasterClass::ALL {
            writeln!(
                s,
                "precision.{}: {}",
                m.name(),
                rate(&self.precision[m.index()])
            )
            .unwrap();
        }
        for m in MasterClass::ALL {
            writeln!(s, "recall.{}: {}", m.name(), rate(&self.recall[m.index()])).unwrap();
        }
        writeln!(s, "confusion (rows true, columns predicted):").unwrap();
        let header: Vec<&str> = MasterClass::ALL.iter().map(|m| m.name()).collect();
        writeln!(s, "\t{}", header.join("\t")).unwrap();
        for m in MasterClass::ALL {
            let row: Vec<String> = self.confusion.counts[m.index()]
                .iter()
                .map(u64::to_string)
                .collect();
            writeln!(s, "{}\t{}", m.name(), row.join("\t")).unwrap();
        }
        s
    }
}
