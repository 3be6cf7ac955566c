use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hencall::audio::load_wav;
use hencall::config::RunConfig;
use hencall::eval::make_split;
use hencall::experiment::{extract_all, fit, grid_text, run_grid, Classifier, ModelKind};
use hencall::features::{cache, FeatureSet, MultiChannelFeatures};
use hencall::manifest::{self, ManifestEntry};
use hencall::model::Checkpoint;
use hencall::synth::generate_dataset;
use hencall::train::history_text;
use hencall::vad::segment_syllables;
use hencall::Subclass;

#[derive(Parser)]
#[command(
    name = "hencall",
    version,
    about = "Laying-hen call recognition pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Run configuration (`key = value` lines); defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                RunConfig::load(p).with_context(|| format!("reading config {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.set_seed(s);
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a labeled synthetic dataset: WAV clips plus manifest.tsv.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print detected syllables as `start_s<TAB>end_s` lines.
    Segment {
        /// A single WAV file.
        #[arg(
            long,
            conflicts_with = "manifest",
            required_unless_present = "manifest"
        )]
        wav: Option<PathBuf>,
        /// Every clip of a manifest, each preceded by a `# id` line.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract features for a manifest into a feature cache.
    Features {
        #[arg(long)]
        manifest: PathBuf,
        /// Keep only entries of this split.
        #[arg(long)]
        split: Option<String>,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a classifier on a feature cache; writes model.ckpt (and history.tsv).
    Train {
        #[arg(long)]
        cache: PathBuf,
        /// Validation cache for model selection.
        #[arg(long)]
        val: Option<PathBuf>,
        #[arg(long, default_value = "sharnn")]
        model: ModelKind,
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on a feature cache and write the report.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        cache: PathBuf,
        /// Split name recorded in the report.
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label WAV files with a checkpoint.
    Classify {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long = "wav", required = true)]
        wavs: Vec<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and score every feature set with every model family.
    Grid {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn load_entries(path: &Path, split: Option<&str>) -> Result<Vec<ManifestEntry>> {
    let entries =
        manifest::read(path).with_context(|| format!("reading manifest {}", path.display()))?;
    Ok(match split {
        Some(s) => entries
            .into_iter()
            .filter(|e| e.split.as_deref() == Some(s))
            .collect(),
        None => entries,
    })
}

fn extract_entries(
    entries: &[ManifestEntry],
    cfg: &RunConfig,
) -> Result<Vec<(MultiChannelFeatures, Option<String>)>> {
    let mut clips = Vec::with_capacity(entries.len());
    for e in entries {
        let clip = load_wav(&e.path).with_context(|| format!("loading {}", e.path.display()))?;
        clips.push((clip, e.labels, e.id()));
    }
    let (kept, skipped) = extract_all(&clips, &cfg.experiment.features)?;
    for id in &skipped {
        eprintln!("warning: clip `{id}` has no syllables; excluded");
    }
    let split_of = |id: &str| {
        entries
            .iter()
            .find(|e| e.id() == id)
            .and_then(|e| e.split.clone())
    };
    Ok(kept
        .into_iter()
        .map(|f| {
            let s = split_of(&f.id);
            (f, s)
        })
        .collect())
}

fn read_cache(path: &Path) -> Result<Vec<MultiChannelFeatures>> {
    cache::read(path).with_context(|| format!("reading feature cache {}", path.display()))
}

fn load_classifier(path: &Path) -> Result<Classifier> {
    let ck =
        Checkpoint::load(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    Ok(Classifier::from_checkpoint(&ck)?)
}

fn format_segments(
    entries: &[(String, PathBuf)],
    cfg: &RunConfig,
    with_ids: bool,
) -> Result<String> {
    let mut s = String::new();
    for (id, path) in entries {
        let clip = load_wav(path).with_context(|| format!("loading {}", path.display()))?;
        if with_ids {
            s += &format!("# {id}\n");
        }
        for seg in segment_syllables(&clip, &cfg.experiment.features.vad)? {
            s += &format!("{:.6}\t{:.6}\n", seg.start_s, seg.end_s);
        }
    }
    Ok(s)
}

/// Splits grid data by the manifest's split column, or by a fresh
/// stratified plan when the manifest has none.
fn grid_splits(
    data: Vec<(MultiChannelFeatures, Option<String>)>,
    seed: u64,
) -> Result<[Vec<MultiChannelFeatures>; 3]> {
    let mut out: [Vec<MultiChannelFeatures>; 3] = Default::default();
    if data.iter().all(|(_, s)| s.is_some()) {
        for (f, s) in data {
            let slot = match s.as_deref() {
                Some("train") => 0,
                Some("val") => 1,
                Some("test") => 2,
                Some(other) => bail!("unknown split `{other}` for clip `{}`", f.id),
                None => unreachable!(),
            };
            out[slot].push(f);
        }
    } else {
        let strata: Vec<Subclass> = data
            .iter()
            .map(|(f, _)| f.label.map_or(Subclass::ALL[0], |l| l.primary()))
            .collect();
        let plan = make_split(&strata, 0.2, 10, seed)?;
        let (train, val) = plan.fold(0);
        for (slot, ix) in [train, val, plan.test.clone()].into_iter().enumerate() {
            out[slot] = ix.into_iter().map(|i| data[i].0.clone()).collect();
        }
    }
    if out[0].is_empty() || out[2].is_empty() {
        bail!("grid needs non-empty train and test splits");
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            out,
            per_class,
            seed,
        } => {
            let entries = generate_dataset(&out, per_class, seed)
                .with_context(|| format!("writing synthetic dataset to {}", out.display()))?;
            eprintln!(
                "wrote {} clips and {}",
                entries.len(),
                out.join("manifest.tsv").display()
            );
        }
        Command::Segment {
            wav,
            manifest,
            cfg,
            out,
        } => {
            let cfg = cfg.load()?;
            let text = match (wav, manifest) {
                (Some(w), _) => format_segments(&[(String::new(), w)], &cfg, false)?,
                (None, Some(m)) => {
                    let entries: Vec<(String, PathBuf)> = load_entries(&m, None)?
                        .into_iter()
                        .map(|e| (e.id(), e.path))
                        .collect();
                    format_segments(&entries, &cfg, true)?
                }
                (None, None) => bail!("pass --wav or --manifest"),
            };
            emit(out.as_deref(), &text)?;
        }
        Command::Features {
            manifest,
            split,
            cfg,
            out,
        } => {
            let cfg = cfg.load()?;
            let entries = load_entries(&manifest, split.as_deref())?;
            if entries.is_empty() {
                bail!("no manifest entries selected");
            }
            let feats: Vec<MultiChannelFeatures> = extract_entries(&entries, &cfg)?
                .into_iter()
                .map(|(f, _)| f)
                .collect();
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            cache::write(&out, &feats).with_context(|| format!("writing {}", out.display()))?;
            eprintln!("cached {} of {} clips", feats.len(), entries.len());
        }
        Command::Train {
            cache: cache_path,
            val,
            model,
            cfg,
            out,
        } => {
            let cfg = cfg.load()?;
            let train = read_cache(&cache_path)?;
            let val = match val {
                Some(p) => read_cache(&p)?,
                None => Vec::new(),
            };
            let e = &cfg.experiment;
            let fitted = fit(model, &train, &val, e.feature_set, e)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            fitted
                .classifier
                .to_checkpoint()
                .save(out.join("model.ckpt"))?;
            fs::write(out.join("config.conf"), cfg.to_text())?;
            if let Some(o) = &fitted.outcome {
                fs::write(out.join("history.tsv"), history_text(&o.history))?;
                eprintln!("best epoch {} of {}", o.best_epoch, o.history.len());
            }
        }
        Command::Eval {
            checkpoint,
            cache: cache_path,
            split,
            seed,
            out,
        } => {
            let clf = load_classifier(&checkpoint)?;
            let data = read_cache(&cache_path)?;
            let report = clf.evaluate(&data, &split, seed)?;
            emit(out.as_deref(), &report.to_text())?;
        }
        Command::Classify {
            checkpoint,
            wavs,
            cfg,
            out,
        } => {
            let cfg = cfg.load()?;
            let clf = load_classifier(&checkpoint)?;
            let mut text = String::new();
            for w in &wavs {
                let clip = load_wav(w).with_context(|| format!("loading {}", w.display()))?;
                let ex = hencall::features::extract(&clip, None, &cfg.experiment.features)?;
                let id = w
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                if !ex.is_usable() {
                    eprintln!("warning: clip `{id}` has no syllables; skipped");
                    continue;
                }
                let p = clf.predict(&ex.features)?;
                let set: Vec<&str> = Subclass::ALL
                    .iter()
                    .filter(|c| p.set[c.index()])
                    .map(|c| c.name())
                    .collect();
                let scores: Vec<String> = p.scores.iter().map(|s| format!("{s:.6}")).collect();
                text += &format!(
                    "{id}\t{}\t{}\t{}\n",
                    p.label,
                    set.join(","),
                    scores.join(",")
                );
            }
            emit(out.as_deref(), &text)?;
        }
        Command::Grid { manifest, cfg, out } => {
            let cfg = cfg.load()?;
            let data = extract_entries(&load_entries(&manifest, None)?, &cfg)?;
            let [train, val, test] = grid_splits(data, cfg.seed())?;
            let cells = run_grid(
                &train,
                &val,
                &test,
                &FeatureSet::ALL,
                &ModelKind::ALL,
                &cfg.experiment,
            )?;
            emit(out.as_deref(), &grid_text(&cells))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
