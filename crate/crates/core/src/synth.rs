//! Labeled synthetic hen calls.
//!
//! Each clip is a train of harmonic tone bursts (fundamental plus two
//! harmonics) with amplitude modulation at the repetition rate, separated by
//! silent gaps, over a gaussian noise floor.
//!
//! | class        | f0 (Hz)     | burst (s)  | gap (s)    | total (s) | harmonic weights |
//! |--------------|-------------|------------|------------|-----------|------------------|
//! | food_calls   | 500 - 700   | 0.08-0.15  | 0.12-0.25  | 2.0-3.5   | 1.0 0.5 0.25     |
//! | distress     | 1300 - 1700 | 0.15-0.30  | 0.12-0.30  | 2.5-3.5   | 1.0 0.3 0.1      |
//! | panic        | 1700 - 2000 | 0.30-0.50  | 0.15-0.30  | 4.0-5.5   | 1.0 0.6 0.3      |
//! | egg_laying   | 300 - 450   | 0.20-0.35  | 0.20-0.40  | 3.0-4.0   | 1.0 0.7 0.5      |
//! | fear         | 1300 - 1700 | 0.15-0.30  | 0.12-0.30  | 2.5-3.5   | 0.3 1.0 0.7      |
//! | alarm        | 800 - 1000  | 0.40-0.80  | 0.15-0.45  | 4.0-5.8   | 1.0 0.4 0.6      |
//! | gakel_calls  | 500 - 700   | 0.08-0.15  | 0.12-0.25  | 2.0-3.5   | 0.3 1.0 0.6      |
//! | lonely_calls | 1000 - 1200 | 0.20-0.40  | 0.15-0.30  | 1.5-2.5   | 1.0 0.2 0.4      |
//!
//! Fear/distress and gakel/food share timing, pitch and loudness and differ
//! only in timbre.

use std::fs;
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::audio::{write_wav, AudioClip, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::eval::make_split;
use crate::labels::{LabelVector, Subclass};
use crate::manifest::{self, ManifestEntry};

const EDGE_S: f64 = 0.15;
const FADE_S: f64 = 0.01;
const AM_DEPTH: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CallRecipe {
    pub class: Subclass,
    pub f0_hz: (f64, f64),
    pub burst_s: (f64, f64),
    pub gap_s: (f64, f64),
    pub rep_rate_hz: (f64, f64),
    pub total_s: (f64, f64),
    pub amplitude: (f64, f64),
    pub harmonics: [f64; 3],
    pub noise_db: f64,
}

impl CallRecipe {
    pub fn for_class(class: Subclass) -> Self {
        use Subclass::*;
        let base = |f0, burst, gap, rate, total, harmonics| CallRecipe {
            class,
            f0_hz: f0,
            burst_s: burst,
            gap_s: gap,
            rep_rate_hz: rate,
            total_s: total,
            amplitude: (0.3, 0.8),
            harmonics,
            noise_db: -40.0,
        };
        match class {
            FoodCalls => base(
                (500.0, 700.0),
                (0.08, 0.15),
                (0.12, 0.25),
                (20.0, 30.0),
                (2.0, 3.5),
                [1.0, 0.5, 0.25],
            ),
            Distress => base(
                (1300.0, 1700.0),
                (0.15, 0.30),
                (0.12, 0.30),
                (12.0, 18.0),
                (2.5, 3.5),
                [1.0, 0.3, 0.1],
            ),
            Panic => base(
                (1700.0, 2000.0),
                (0.30, 0.50),
                (0.15, 0.30),
                (8.0, 12.0),
                (4.0, 5.5),
                [1.0, 0.6, 0.3],
            ),
            EggLaying => base(
                (300.0, 450.0),
                (0.20, 0.35),
                (0.20, 0.40),
                (5.0, 8.0),
                (3.0, 4.0),
                [1.0, 0.7, 0.5],
            ),
            Fear => base(
                (1300.0, 1700.0),
                (0.15, 0.30),
                (0.12, 0.30),
                (12.0, 18.0),
                (2.5, 3.5),
                [0.3, 1.0, 0.7],
            ),
            Alarm => base(
                (800.0, 1000.0),
                (0.40, 0.80),
                (0.15, 0.45),
                (6.0, 10.0),
                (4.0, 5.8),
                [1.0, 0.4, 0.6],
            ),
            GakelCalls => base(
                (500.0, 700.0),
                (0.08, 0.15),
                (0.12, 0.25),
                (20.0, 30.0),
                (2.0, 3.5),
                [0.3, 1.0, 0.6],
            ),
            LonelyCalls => base(
                (1000.0, 1200.0),
                (0.20, 0.40),
                (0.15, 0.30),
                (3.0, 5.0),
                (1.5, 2.5),
                [1.0, 0.2, 0.4],
            ),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ranges = [
            self.f0_hz,
            self.burst_s,
            self.gap_s,
            self.rep_rate_hz,
            self.total_s,
            self.amplitude,
        ];
        if ranges
            .iter()
            .any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && *lo > 0.0 && lo <= hi))
        {
            return Err(Error::InvalidConfig(format!(
                "recipe for {} has an invalid range",
                self.class
            )));
        }
        if 3.0 * self.f0_hz.1 >= SAMPLE_RATE as f64 / 2.0 {
            return Err(Error::InvalidConfig(format!(
                "recipe for {}: harmonics exceed Nyquist",
                self.class
            )));
        }
        let min_needed = 2.0 * EDGE_S + 2.0 * self.burst_s.1 + self.gap_s.1;
        if self.total_s.0 < min_needed {
            return Err(Error::InvalidConfig(format!(
                "recipe for {}: total too short for two bursts",
                self.class
            )));
        }
        Ok(())
    }
}

/// Burst positions in seconds, as (start, end).
#[derive(Debug, Clone, PartialEq)]
pub struct SynthClip {
    pub clip: AudioClip,
    pub labels: LabelVector,
    pub class: Subclass,
    pub bursts: Vec<(f64, f64)>,
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Generates one clip. Timing follows `recipe`; when `secondary` is given,
/// odd-numbered bursts take their pitch and timbre from it. Samples are
/// f32-representable so float WAV storage is lossless.
pub fn generate_clip_with(
    recipe: &CallRecipe,
    secondary: Option<&CallRecipe>,
    seed: u64,
) -> Result<SynthClip> {
    recipe.validate()?;
    if let Some(s) = secondary {
        s.validate()?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sr = SAMPLE_RATE as f64;
    let total = draw(&mut rng, recipe.total_s);
    let n = (total * sr).round() as usize;
    let mut samples = vec![0.0; n];

    let mut bursts = Vec::new();
    let mut t = EDGE_S;
    loop {
        let dur = draw(&mut rng, recipe.burst_s);
        if t + dur > total - EDGE_S {
            break;
        }
        bursts.push((t, t + dur));
        t += dur + draw(&mut rng, recipe.gap_s);
    }
    debug_assert!(bursts.len() >= 2);

    let amplitude = draw(&mut rng, recipe.amplitude);
    for (k, &(start, end)) in bursts.iter().enumerate() {
        let r = match secondary {
            Some(s) if k % 2 == 1 => s,
            _ => recipe,
        };
        let f0 = draw(&mut rng, r.f0_hz);
        let rate = draw(&mut rng, r.rep_rate_hz);
        let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let norm = r.harmonics.iter().map(|w| w * w).sum::<f64>().sqrt();
        let (i0, i1) = (
            (start * sr).round() as usize,
            ((end * sr).round() as usize).min(n),
        );
        for (i, s) in samples[i0..i1].iter_mut().enumerate() {
            let tt = i as f64 / sr;
            let len = (i1 - i0) as f64 / sr;
            let fade = (tt / FADE_S).min((len - tt) / FADE_S).clamp(0.0, 1.0);
            let fade = 0.5 - 0.5 * (std::f64::consts::PI * fade).cos();
            let am = 1.0 - AM_DEPTH * 0.5 * (1.0 - (std::f64::consts::TAU * rate * tt).cos());
            let tone: f64 = r
                .harmonics
                .iter()
                .enumerate()
                .map(|(h, w)| {
                    w * (std::f64::consts::TAU * f0 * (h + 1) as f64 * tt + phase * (h + 1) as f64)
                        .sin()
                })
                .sum();
            *s += amplitude * fade * am * tone / norm;
        }
    }

    let noise = Normal::new(0.0, 10f64.powf(recipe.noise_db / 20.0)).unwrap();
    for s in &mut samples {
        *s = (*s + noise.sample(&mut rng)) as f32 as f64;
    }
    let mut classes = vec![recipe.class];
    if let Some(s) = secondary {
        classes.push(s.class);
    }
    Ok(SynthClip {
        clip: AudioClip::new(
            samples,
            SAMPLE_RATE,
            format!("{}-{seed}", recipe.class.name()),
        )?,
        labels: LabelVector::from_classes(&classes)?,
        class: recipe.class,
        bursts,
    })
}

pub fn generate_clip(recipe: &CallRecipe, seed: u64) -> Result<SynthClip> {
    generate_clip_with(recipe, None, seed)
}

/// Second label for multi-label clips: the next member of the same master
/// class, or none for singleton masters.
pub fn companion(class: Subclass) -> Option<Subclass> {
    let members = class.master().members();
    if members.len() < 2 {
        return None;
    }
    let pos = members.iter().position(|&m| m == class).unwrap();
    Some(members[(pos + 1) % members.len()])
}

/// Every 10th clip of a class (index 3 mod 10) with a multi-member master
/// class carries a second label.
pub fn is_multi_label(index: usize) -> bool {
    index % 10 == 3
}

/// `per_class` clips for each subclass, class-major, generated in memory.
pub fn generate_examples(per_class: usize, seed: u64) -> Result<Vec<SynthClip>> {
    if per_class == 0 {
        return Err(Error::InvalidConfig("per_class must be at least 1".into()));
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(8 * per_class);
    for class in Subclass::ALL {
        let recipe = CallRecipe::for_class(class);
        for i in 0..per_class {
            let clip_seed = master.next_u64();
            let second = companion(class)
                .filter(|_| is_multi_label(i))
                .map(CallRecipe::for_class);
            out.push(generate_clip_with(&recipe, second.as_ref(), clip_seed)?);
        }
    }
    Ok(out)
}

/// Writes `per_class` clips per subclass as float WAVs plus `manifest.tsv`
/// into `out_dir`. Splits come from a stratified plan over the generated
/// classes: `test`, `val` (fold 0 of the remainder) and `train`.
pub fn generate_dataset(out_dir: &Path, per_class: usize, seed: u64) -> Result<Vec<ManifestEntry>> {
    let clips = generate_examples(per_class, seed)?;
    fs::create_dir_all(out_dir)?;
    let strata: Vec<Subclass> = clips.iter().map(|c| c.class).collect();
    let splits = split_names(&strata, seed);
    let mut entries = Vec::with_capacity(clips.len());
    for (k, (c, split)) in clips.iter().zip(splits).enumerate() {
        let path = out_dir.join(format!("{}_{:03}.wav", c.class.name(), k % per_class));
        write_wav(&path, &c.clip)?;
        entries.push(ManifestEntry {
            path,
            labels: c.labels,
            split,
        });
    }
    manifest::write(out_dir.join("manifest.tsv"), &entries)?;
    Ok(entries)
}

fn split_names(strata: &[Subclass], seed: u64) -> Vec<Option<String>> {
    let Ok(plan) = make_split(strata, 0.2, 10, seed) else {
        return vec![None; strata.len()];
    };
    let mut names = vec![Some("train".to_string()); strata.len()];
    for &i in &plan.test {
        names[i] = Some("test".into());
    }
    for &i in &plan.folds[0] {
        names[i] = Some("val".into());
    }
    names
}
